//! Precision-recall curves and modality-importance summaries.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::GroundTruth;
use crate::matching::ModalityWeights;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// One point per threshold, in ascending threshold order.
    pub points: Vec<PrPoint>,
    /// Trapezoid area over (recall, precision), anchored at (0, 1).
    pub auc: f64,
}

/// 201 uniform thresholds in [0, 1].
pub fn default_thresholds() -> Vec<f64> {
    (0..=200).map(|i| i as f64 / 200.0).collect()
}

/// Counts every (query, template) pair with score ≥ threshold as a
/// positive prediction. Precision at zero predictions is defined as 1.
pub fn pr_curve(scores: &[Vec<f64>], gt: &GroundTruth, thresholds: &[f64]) -> Result<PrCurve> {
    if scores.len() != gt.num_queries()
        || scores.first().map_or(0, |r| r.len()) != gt.num_templates()
    {
        return Err(Error::Shape(format!(
            "score matrix is {}x{}, ground truth is {}x{}",
            scores.len(),
            scores.first().map_or(0, |r| r.len()),
            gt.num_queries(),
            gt.num_templates()
        )));
    }
    if gt.positive_count() == 0 {
        return Err(Error::Validation(
            "ground truth has no positive pairs; precision-recall is undefined".into(),
        ));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("thresholds must be sorted ascending".into()));
    }
    let positives = gt.positive_count();
    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (row, gt_row) in scores.iter().zip(&gt.same_place) {
            for (&s, &is_same) in row.iter().zip(gt_row) {
                if s >= threshold {
                    if is_same {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
        }
        let fn_ = positives - tp;
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = tp as f64 / positives as f64;
        points.push(PrPoint { threshold, precision, recall, tp, fp, fn_ });
    }
    let auc = pr_auc(&points);
    Ok(PrCurve { points, auc })
}

/// Trapezoid integral over (recall, precision), walking thresholds from
/// high to low (recall ascending) with an anchor at recall 0, precision 1.
fn pr_auc(points: &[PrPoint]) -> f64 {
    let mut prev_recall = 0.0;
    let mut prev_precision = 1.0;
    let mut auc = 0.0;
    for p in points.iter().rev() {
        auc += (p.recall - prev_recall) * (p.precision + prev_precision) / 2.0;
        prev_recall = p.recall;
        prev_precision = p.precision;
    }
    auc
}

/// One line of the modality-importance summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityShare {
    /// Feature name; disparity-derived entries carry a "-D" suffix.
    pub name: String,
    pub percent: f64,
}

/// Combined weight w̄_q·w̃_qk of each feature block as a percentage of
/// the total; percentages sum to 100.
pub fn modality_report(weights: &ModalityWeights) -> Result<Vec<ModalityShare>> {
    if weights.normalizer <= 0.0 {
        return Err(Error::DegenerateModel("total modality weight is zero".into()));
    }
    let sensors = weights.layout.sensors();
    let report = weights
        .layout
        .feature_blocks()
        .into_iter()
        .enumerate()
        .map(|(idx, (q, k, _))| {
            let base = &sensors[q].features[k].name;
            let name = if sensors[q].name == "disparity" {
                format!("{base}-D")
            } else {
                base.to_string()
            };
            ModalityShare { name, percent: 100.0 * weights.combined(idx) / weights.normalizer }
        })
        .collect();
    Ok(report)
}
