//! Weighted similarity scoring between query and template images.
//!
//! Per feature block the similarity is exp(−‖x_q − x_t‖₂ / √d); the total
//! score combines blocks with the learned weights w̄_q·w̃_qk, divided by
//! their sum so identical images score exactly 1 and scaling the weight
//! matrix cancels.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layout::ModalityLayout;
use crate::model::{FeatureMatrix, WeightMatrix};

/// Per-modality scalar weights derived from a solved weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityWeights {
    pub layout: ModalityLayout,
    /// w̃_qk = ‖W_qk‖_F per (sensor, feature) block, in layout order.
    pub feature_w: Vec<f64>,
    /// w̄_q = ‖W_q‖_F per sensor block.
    pub sensor_w: Vec<f64>,
    /// Z = Σ_q Σ_k w̄_q·w̃_qk.
    pub normalizer: f64,
}

impl ModalityWeights {
    /// Combined weight w̄_q·w̃_qk of one feature block.
    pub fn combined(&self, block_index: usize) -> f64 {
        let (q, _, _) = self.layout.feature_blocks()[block_index];
        self.sensor_w[q] * self.feature_w[block_index]
    }

    /// Equal-weight variant used as the concatenation baseline.
    pub fn uniform(layout: &ModalityLayout) -> Self {
        let blocks = layout.feature_blocks().len();
        Self {
            layout: layout.clone(),
            feature_w: alloc::vec![1.0; blocks],
            sensor_w: alloc::vec![1.0; layout.sensor_count()],
            normalizer: blocks as f64,
        }
    }

    /// Share of the total weight per feature block, in percent.
    pub fn percentages(&self) -> Vec<f64> {
        (0..self.feature_w.len())
            .map(|i| 100.0 * self.combined(i) / self.normalizer)
            .collect()
    }
}

/// Block Frobenius norms of the solved weights:
/// w̃_qk = ‖W_qk‖_F per feature block and w̄_q = ‖W_q‖_F per sensor.
pub fn extract_weights(w: &WeightMatrix) -> Result<ModalityWeights> {
    let frob = |range: core::ops::Range<usize>| -> f64 {
        let mut acc = 0.0;
        for j in 0..w.values.ncols() {
            for i in range.clone() {
                acc += w.values[(i, j)] * w.values[(i, j)];
            }
        }
        libm::sqrt(acc)
    };
    let feature_w: Vec<f64> = w
        .layout
        .feature_blocks()
        .into_iter()
        .map(|(_, _, r)| frob(r))
        .collect();
    let sensor_w: Vec<f64> = w.layout.sensor_blocks().into_iter().map(|(_, r)| frob(r)).collect();
    let normalizer: f64 = w
        .layout
        .feature_blocks()
        .iter()
        .zip(&feature_w)
        .map(|((q, _, _), fw)| sensor_w[*q] * fw)
        .sum();
    if normalizer <= 0.0 {
        return Err(Error::DegenerateModel(
            "all learned weights are zero; no modality carries information".into(),
        ));
    }
    Ok(ModalityWeights { layout: w.layout.clone(), feature_w, sensor_w, normalizer })
}

/// Similarity of one feature block: exp(−‖x_q − x_t‖₂ / √d) ∈ (0, 1].
pub fn block_similarity(query: &[f64], template: &[f64]) -> f64 {
    debug_assert_eq!(query.len(), template.len());
    let mut sq = 0.0;
    for (a, b) in query.iter().zip(template) {
        let d = a - b;
        sq += d * d;
    }
    libm::exp(-libm::sqrt(sq) / libm::sqrt(query.len() as f64))
}

/// Weighted similarity of two full descriptor columns.
pub fn score(query: &[f64], template: &[f64], weights: &ModalityWeights) -> Result<f64> {
    let p = weights.layout.total_dim();
    if query.len() != p || template.len() != p {
        return Err(Error::Shape(format!(
            "descriptor lengths {} / {} do not match layout dim {p}",
            query.len(),
            template.len()
        )));
    }
    let mut acc = 0.0;
    for (idx, (q, _, range)) in weights.layout.feature_blocks().into_iter().enumerate() {
        let w = weights.sensor_w[q] * weights.feature_w[idx];
        if w == 0.0 {
            continue;
        }
        acc += w * block_similarity(&query[range.clone()], &template[range]);
    }
    Ok(acc / weights.normalizer)
}

/// One scored candidate for a query.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub template_index: usize,
    pub template_id: String,
    pub score: f64,
    pub accepted: bool,
    /// Ground-truth same-place flag, when available.
    pub same_place: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub query_id: String,
    /// Candidates sorted by descending score; ties broken by ascending
    /// template index.
    pub ranked: Vec<Candidate>,
}

/// Scores of every query against every template, plus ranked decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    pub threshold: f64,
    pub queries: Vec<QueryResult>,
    /// Dense score matrix, queries × templates, in input order.
    pub scores: Vec<Vec<f64>>,
    /// Same matrix under equal modality weights.
    pub baseline_scores: Vec<Vec<f64>>,
}

impl MatchReport {
    /// Fraction of queries whose top candidate is a true same-place pair.
    /// Only defined when ground-truth flags were attached.
    pub fn top1_recall(&self) -> Option<f64> {
        let mut hits = 0usize;
        let mut total = 0usize;
        for q in &self.queries {
            let top = q.ranked.first()?;
            match top.same_place {
                Some(flag) => {
                    total += 1;
                    if flag {
                        hits += 1;
                    }
                }
                None => return None,
            }
        }
        if total == 0 {
            None
        } else {
            Some(hits as f64 / total as f64)
        }
    }
}

/// Scores all query columns against all template columns.
pub fn match_all(
    queries: &FeatureMatrix,
    templates: &FeatureMatrix,
    weights: &ModalityWeights,
    threshold: f64,
    ground_truth: Option<&crate::geo::GroundTruth>,
) -> Result<MatchReport> {
    if templates.num_images() == 0 {
        return Err(Error::Validation("template set is empty".into()));
    }
    if queries.layout != templates.layout || queries.layout != weights.layout {
        return Err(Error::Shape("query, template and weight layouts must agree".into()));
    }
    if let Some(gt) = ground_truth {
        if gt.num_queries() != queries.num_images() || gt.num_templates() != templates.num_images()
        {
            return Err(Error::Shape(format!(
                "ground truth is {}x{}, scores are {}x{}",
                gt.num_queries(),
                gt.num_templates(),
                queries.num_images(),
                templates.num_images()
            )));
        }
    }
    let baseline = ModalityWeights::uniform(&queries.layout);
    let nq = queries.num_images();
    let nt = templates.num_images();
    let mut scores = Vec::with_capacity(nq);
    let mut baseline_scores = Vec::with_capacity(nq);
    let mut results = Vec::with_capacity(nq);
    for qi in 0..nq {
        let qcol: Vec<f64> = queries.values.column(qi).iter().copied().collect();
        let mut row = Vec::with_capacity(nt);
        let mut brow = Vec::with_capacity(nt);
        for ti in 0..nt {
            let tcol: Vec<f64> = templates.values.column(ti).iter().copied().collect();
            row.push(score(&qcol, &tcol, weights)?);
            brow.push(score(&qcol, &tcol, &baseline)?);
        }
        let mut ranked: Vec<Candidate> = row
            .iter()
            .enumerate()
            .map(|(ti, &s)| Candidate {
                template_index: ti,
                template_id: templates.image_ids[ti].clone(),
                score: s,
                accepted: s >= threshold,
                same_place: ground_truth.map(|gt| gt.same_place[qi][ti]),
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.template_index.cmp(&b.template_index))
        });
        results.push(QueryResult { query_id: queries.image_ids[qi].clone(), ranked });
        scores.push(row);
        baseline_scores.push(brow);
    }
    Ok(MatchReport { threshold, queries: results, scores, baseline_scores })
}
