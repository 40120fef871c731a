//! Persisted trained models. Text format, `version 1` first line, floats
//! written in shortest round-trip form so save→load is bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use placerec_core::features::{DescriptorConfig, ExternalSpec, GistConfig, HogConfig, NormStats};
use placerec_core::{ModalityLayout, WeightMatrix};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    /// Full run configuration, kept for provenance.
    pub config: RunConfig,
    pub descriptor: DescriptorConfig,
    pub scenario_names: Vec<String>,
    pub stats: NormStats,
    pub weights: WeightMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
}

impl ModelFile {
    pub fn layout(&self) -> &ModalityLayout {
        &self.weights.layout
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version {MODEL_VERSION}");
        out.push_str("config\n");
        out.push_str(&self.config.to_text());
        out.push_str("end_config\n");
        let h = &self.descriptor.hog;
        let _ = writeln!(out, "hog {} {} {} {}", h.cell_size, h.bins, h.block_cells, h.clip);
        let g = &self.descriptor.gist;
        let _ = writeln!(
            out,
            "gist {} {} {} {}",
            g.orientations, g.scales, g.grid, g.working_size
        );
        for e in &self.descriptor.external {
            let _ = writeln!(out, "external {} {}", e.name, e.dim);
        }
        let _ = writeln!(out, "scenarios {}", self.scenario_names.join(" "));
        out.push_str("layout\n");
        out.push_str(&self.layout().to_text());
        out.push_str("end_layout\n");
        let _ = writeln!(out, "stats {}", self.stats.per_block.len());
        for (mean, std) in &self.stats.per_block {
            let _ = writeln!(out, "{mean} {std}");
        }
        let _ = writeln!(
            out,
            "solution {} {} {}",
            self.iterations,
            if self.converged { 1 } else { 0 },
            self.final_objective
        );
        let (p, c) = (self.weights.values.nrows(), self.weights.values.ncols());
        let _ = writeln!(out, "weights {p} {c}");
        for i in 0..p {
            for j in 0..c {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", self.weights.values[(i, j)]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| CliError::Validation(format!("model file: {msg}"));
        let mut lines = text.lines();
        let mut next = || lines.next().map(str::trim);

        match next() {
            Some(l) if l == format!("version {MODEL_VERSION}") => {}
            Some(l) => {
                return Err(bad(&format!(
                    "unsupported header '{l}', expected 'version {MODEL_VERSION}'"
                )))
            }
            None => return Err(bad("empty file")),
        }
        if next() != Some("config") {
            return Err(bad("expected 'config' section"));
        }
        let mut config_text = String::new();
        loop {
            match next() {
                Some("end_config") => break,
                Some(l) => {
                    config_text.push_str(l);
                    config_text.push('\n');
                }
                None => return Err(bad("unterminated config section")),
            }
        }
        let config = RunConfig::from_text(&config_text)?;

        fn fields<T: std::str::FromStr>(line: &str, label: &str, n: usize) -> Result<Vec<T>> {
            let parts: Vec<&str> = line.split_whitespace().skip(1).collect();
            if parts.len() != n {
                return Err(CliError::Validation(format!(
                    "model file: '{label}' line needs {n} values"
                )));
            }
            parts
                .iter()
                .map(|v| {
                    v.parse().map_err(|_| {
                        CliError::Validation(format!("model file: bad value '{v}' in '{label}'"))
                    })
                })
                .collect()
        }

        let hog_line = next().filter(|l| l.starts_with("hog ")).ok_or_else(|| bad("expected 'hog'"))?;
        let hv: Vec<f64> = fields(hog_line, "hog", 4)?;
        let hog = HogConfig {
            cell_size: hv[0] as usize,
            bins: hv[1] as usize,
            block_cells: hv[2] as usize,
            clip: hv[3],
        };
        let gist_line =
            next().filter(|l| l.starts_with("gist ")).ok_or_else(|| bad("expected 'gist'"))?;
        let gv: Vec<usize> = fields(gist_line, "gist", 4)?;
        let gist = GistConfig { orientations: gv[0], scales: gv[1], grid: gv[2], working_size: gv[3] };

        let mut external = Vec::new();
        let mut line = next().ok_or_else(|| bad("truncated after descriptor section"))?;
        while let Some(rest) = line.strip_prefix("external ") {
            let mut parts = rest.split_whitespace();
            let name = parts.next().ok_or_else(|| bad("external without name"))?.to_string();
            let dim: usize = parts
                .next()
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| bad("external without valid dim"))?;
            external.push(ExternalSpec { name, dim });
            line = next().ok_or_else(|| bad("truncated after external list"))?;
        }
        let descriptor = DescriptorConfig { hog, gist, external };

        let scenario_names: Vec<String> = line
            .strip_prefix("scenarios ")
            .ok_or_else(|| bad("expected 'scenarios'"))?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        if scenario_names.is_empty() {
            return Err(bad("no scenario names"));
        }

        if next() != Some("layout") {
            return Err(bad("expected 'layout' section"));
        }
        let mut layout_text = String::new();
        loop {
            match next() {
                Some("end_layout") => break,
                Some(l) => {
                    layout_text.push_str(l);
                    layout_text.push('\n');
                }
                None => return Err(bad("unterminated layout section")),
            }
        }
        let layout = ModalityLayout::from_text(&layout_text)?;

        let stats_line =
            next().filter(|l| l.starts_with("stats ")).ok_or_else(|| bad("expected 'stats'"))?;
        let n_blocks: usize = fields::<usize>(stats_line, "stats", 1)?[0];
        let mut per_block = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let l = next().ok_or_else(|| bad("truncated stats section"))?;
            let mut parts = l.split_whitespace();
            let mean: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad stats mean"))?;
            let std: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("bad stats std"))?;
            per_block.push((mean, std));
        }
        let stats = NormStats { per_block };

        let sol_line = next()
            .filter(|l| l.starts_with("solution "))
            .ok_or_else(|| bad("expected 'solution'"))?;
        let sv: Vec<f64> = fields(sol_line, "solution", 3)?;
        let (iterations, converged, final_objective) = (sv[0] as usize, sv[1] != 0.0, sv[2]);

        let w_line =
            next().filter(|l| l.starts_with("weights ")).ok_or_else(|| bad("expected 'weights'"))?;
        let wv: Vec<usize> = fields(w_line, "weights", 2)?;
        let (p, c) = (wv[0], wv[1]);
        let mut values = DMatrix::zeros(p, c);
        for i in 0..p {
            let l = next().ok_or_else(|| bad("truncated weight rows"))?;
            let mut parts = l.split_whitespace();
            for j in 0..c {
                values[(i, j)] = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad(&format!("bad weight value at row {i}")))?;
            }
        }
        if scenario_names.len() != c {
            return Err(bad("scenario count does not match weight columns"));
        }
        let weights = WeightMatrix::new(layout, values)?;
        Ok(Self {
            config,
            descriptor,
            scenario_names,
            stats,
            weights,
            iterations,
            converged,
            final_objective,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> ModelFile {
        let layout = ModalityLayout::from_spec(&[
            ("intensity", &[("gist", 3), ("lbp", 2)]),
            ("disparity", &[("gist", 3), ("lbp", 2)]),
        ])
        .unwrap();
        let p = layout.total_dim();
        // awkward floats that only survive shortest round-trip printing
        let values = DMatrix::from_fn(p, 2, |i, j| {
            ((i * 2 + j + 1) as f64).sqrt() * if j == 0 { 1.0 } else { -0.3 }
        });
        ModelFile {
            config: RunConfig::default(),
            descriptor: DescriptorConfig::default(),
            scenario_names: vec!["summer-morning".into(), "fall-evening".into()],
            stats: NormStats {
                per_block: vec![(0.1f64.sqrt(), 1.7), (-3.25, 0.0), (2.0 / 3.0, 1e-7), (0.0, 1.0)],
            },
            weights: WeightMatrix::new(layout, values).unwrap(),
            iterations: 137,
            converged: true,
            final_objective: 0.123456789123456789,
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = sample_model();
        let text = m.to_text();
        assert!(text.starts_with("version 1\n"));
        let loaded = ModelFile::from_text(&text).unwrap();
        assert_eq!(m, loaded);
        for (a, b) in m.weights.values.iter().zip(loaded.weights.values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // a second save reproduces the exact bytes
        assert_eq!(text, loaded.to_text());
    }

    #[test]
    fn version_mismatch_rejected() {
        let m = sample_model();
        let text = m.to_text().replace("version 1", "version 2");
        assert!(ModelFile::from_text(&text).is_err());
    }

    #[test]
    fn truncated_file_rejected() {
        let m = sample_model();
        let text = m.to_text();
        let cut = &text[..text.len() / 2];
        assert!(ModelFile::from_text(cut).is_err());
    }
}
