//! Deterministic CSV and SVG emission for curves and modality reports.

use std::fmt::Write as _;
use std::path::Path;

use placerec_core::eval::{ModalityShare, PrCurve};

use crate::error::{CliError, Result};

pub fn curve_csv(curve: &PrCurve) -> String {
    let mut out = String::from("threshold,precision,recall,tp,fp,fn\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.threshold, p.precision, p.recall, p.tp, p.fp, p.fn_
        );
    }
    out
}

pub fn modality_csv(report: &[ModalityShare]) -> String {
    let mut out = String::from("modality,percent\n");
    for share in report {
        let _ = writeln!(out, "{},{}", share.name, share.percent);
    }
    out
}

const PALETTE: &[&str] = &["#1f6fb2", "#d1495b", "#3a9c6e", "#8c6bb1"];
const PLOT: (f64, f64, f64, f64) = (70.0, 20.0, 480.0, 360.0); // x, y, w, h

fn svg_header(title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"460\" viewBox=\"0 0 600 460\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"600\" height=\"460\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"300\" y=\"445\" text-anchor=\"middle\" font-size=\"14\">{title}</text>"
    );
    out
}

fn fx(v: f64) -> f64 {
    PLOT.0 + v * PLOT.2
}

fn fy(v: f64) -> f64 {
    PLOT.1 + (1.0 - v) * PLOT.3
}

/// Precision-recall figure with one polyline per labeled curve.
pub fn curve_svg(curves: &[(&str, &PrCurve)]) -> String {
    let mut out = svg_header("precision vs recall");
    // axes and unit-gridline labels
    let _ = writeln!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        PLOT.0, PLOT.1, PLOT.2, PLOT.3
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.1}</text>",
            fx(v),
            PLOT.1 + PLOT.3 + 16.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>",
            PLOT.0 - 6.0,
            fy(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">recall</text>",
        fx(0.5),
        PLOT.1 + PLOT.3 + 34.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">precision</text>",
        fy(0.5),
        fy(0.5)
    );
    for (idx, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = String::new();
        // walk thresholds high-to-low so recall ascends, anchored at (0, 1)
        let _ = write!(points, "{:.2},{:.2}", fx(0.0), fy(1.0));
        for p in curve.points.iter().rev() {
            let _ = write!(points, " {:.2},{:.2}", fx(p.recall), fy(p.precision));
        }
        let _ = writeln!(
            out,
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>"
        );
        let ly = PLOT.1 + 18.0 + 18.0 * idx as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            PLOT.0 + 12.0,
            PLOT.0 + 40.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{label} (AUC {:.4})</text>",
            PLOT.0 + 46.0,
            ly + 4.0,
            curve.auc
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bar chart of modality weight percentages.
pub fn modality_svg(report: &[ModalityShare]) -> String {
    let mut out = svg_header("modality weight share");
    let bar_h = (PLOT.3 / report.len().max(1) as f64).min(36.0);
    for (idx, share) in report.iter().enumerate() {
        let y = PLOT.1 + idx as f64 * bar_h;
        let w = PLOT.2 * (share.percent / 100.0).clamp(0.0, 1.0);
        let color = PALETTE[idx % PALETTE.len()];
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{w:.2}\" height=\"{:.1}\" fill=\"{color}\"/>",
            PLOT.0,
            y + 2.0,
            bar_h - 4.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            PLOT.0 - 6.0,
            y + bar_h / 2.0 + 4.0,
            share.name
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{:.2}%</text>",
            PLOT.0 + w + 6.0,
            y + bar_h / 2.0 + 4.0,
            share.percent
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(CliError::io(path))
}
