//! Matrices of the learning problem and the two group norms.
//!
//! The stacked descriptor matrix has one column per image; the weight
//! matrix shares its row structure with the descriptor through a
//! [`ModalityLayout`]. The M-norm sums Frobenius norms over feature
//! blocks, the S-norm over whole sensor blocks; both are plain group
//! norms over a tree of row ranges.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::layout::ModalityLayout;

/// Stacked multimodal descriptors, one column per image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub layout: ModalityLayout,
    pub values: DMatrix<f64>,
    pub image_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(layout: ModalityLayout, values: DMatrix<f64>, image_ids: Vec<String>) -> Result<Self> {
        if values.nrows() != layout.total_dim() {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows, layout expects {}",
                values.nrows(),
                layout.total_dim()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::Validation("feature matrix needs at least one column".into()));
        }
        if values.ncols() != image_ids.len() {
            return Err(Error::Shape(format!(
                "{} columns but {} image ids",
                values.ncols(),
                image_ids.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature matrix contains non-finite entries".into()));
        }
        Ok(Self { layout, values, image_ids })
    }

    pub fn num_images(&self) -> usize {
        self.values.ncols()
    }
}

/// Binary image-to-scenario membership, one row per image.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLabels {
    pub values: DMatrix<f64>,
    pub scenario_names: Vec<String>,
}

impl ScenarioLabels {
    pub fn new(values: DMatrix<f64>, scenario_names: Vec<String>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::Validation("need at least one scenario".into()));
        }
        if values.ncols() != scenario_names.len() {
            return Err(Error::Shape(format!(
                "{} label columns but {} scenario names",
                values.ncols(),
                scenario_names.len()
            )));
        }
        for i in 0..values.nrows() {
            let mut ones = 0usize;
            for j in 0..values.ncols() {
                let v = values[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Validation(format!(
                        "label entry ({i},{j}) is {v}, must be 0 or 1"
                    )));
                }
                if v == 1.0 {
                    ones += 1;
                }
            }
            if ones != 1 {
                return Err(Error::Validation(format!(
                    "image row {i} belongs to {ones} scenarios, must be exactly 1"
                )));
            }
        }
        for j in 0..values.ncols() {
            if (0..values.nrows()).all(|i| values[(i, j)] == 0.0) {
                return Err(Error::Validation(format!(
                    "scenario '{}' has no images",
                    scenario_names[j]
                )));
            }
        }
        Ok(Self { values, scenario_names })
    }

    /// Builds one-hot labels from a per-image scenario index.
    pub fn from_assignments(assignments: &[usize], scenario_names: Vec<String>) -> Result<Self> {
        let c = scenario_names.len();
        let mut values = DMatrix::zeros(assignments.len(), c);
        for (i, &j) in assignments.iter().enumerate() {
            if j >= c {
                return Err(Error::Validation(format!(
                    "image {i} assigned to scenario {j}, only {c} scenarios"
                )));
            }
            values[(i, j)] = 1.0;
        }
        ScenarioLabels::new(values, scenario_names)
    }

    pub fn num_scenarios(&self) -> usize {
        self.values.ncols()
    }
}

/// Learned importance weights, rows structured by the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub layout: ModalityLayout,
    pub values: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(layout: ModalityLayout, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != layout.total_dim() {
            return Err(Error::Shape(format!(
                "weight matrix has {} rows, layout expects {}",
                values.nrows(),
                layout.total_dim()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::Shape("weight matrix needs at least one column".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("weight matrix contains non-finite entries".into()));
        }
        Ok(Self { layout, values })
    }

    pub fn zeros(layout: ModalityLayout, scenarios: usize) -> Self {
        let values = DMatrix::zeros(layout.total_dim(), scenarios);
        Self { layout, values }
    }

    /// Sub-matrix of one addressed block: a single feature block, or the
    /// whole sensor block when `feature` is omitted.
    pub fn block_view(&self, sensor: usize, feature: Option<usize>) -> Result<DMatrix<f64>> {
        let range = match feature {
            Some(k) => self.layout.feature_range(sensor, k)?,
            None => self.layout.sensor_range(sensor)?,
        };
        Ok(self.values.rows(range.start, range.len()).into_owned())
    }
}

/// Which residual norm the objective uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossVariant {
    /// ½‖AᵀW − B‖²_F (smooth; default).
    #[default]
    Squared,
    /// ‖AᵀW − B‖_F.
    Unsquared,
}

/// Regularization strengths and loss choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub loss_variant: LossVariant,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { lambda1: 0.1, lambda2: 0.01, loss_variant: LossVariant::Squared }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::Validation(format!("lambda1 = {} must be >= 0", self.lambda1)));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::Validation(format!("lambda2 = {} must be >= 0", self.lambda2)));
        }
        Ok(())
    }
}

fn frob(m: &DMatrix<f64>, rows: core::ops::Range<usize>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in rows.clone() {
            let v = m[(i, j)];
            acc += v * v;
        }
    }
    libm::sqrt(acc)
}

/// Sum of Frobenius norms over feature blocks.
pub fn m_norm(w: &WeightMatrix) -> f64 {
    w.layout
        .feature_blocks()
        .into_iter()
        .map(|(_, _, range)| frob(&w.values, range))
        .sum()
}

/// Sum of Frobenius norms over sensor blocks.
pub fn s_norm(w: &WeightMatrix) -> f64 {
    w.layout
        .sensor_blocks()
        .into_iter()
        .map(|(_, range)| frob(&w.values, range))
        .sum()
}

/// Residual loss for the chosen variant.
pub fn loss(a: &FeatureMatrix, b: &ScenarioLabels, w: &WeightMatrix, variant: LossVariant) -> Result<f64> {
    if a.layout != w.layout {
        return Err(Error::Shape("feature and weight layouts differ".into()));
    }
    if a.num_images() != b.values.nrows() {
        return Err(Error::Shape(format!(
            "{} feature columns but {} label rows",
            a.num_images(),
            b.values.nrows()
        )));
    }
    if w.values.ncols() != b.num_scenarios() {
        return Err(Error::Shape(format!(
            "{} weight columns but {} scenarios",
            w.values.ncols(),
            b.num_scenarios()
        )));
    }
    let residual = a.values.transpose() * &w.values - &b.values;
    let sq = residual.iter().map(|v| v * v).sum::<f64>();
    Ok(match variant {
        LossVariant::Squared => 0.5 * sq,
        LossVariant::Unsquared => libm::sqrt(sq),
    })
}

/// Full regularized objective: loss + λ₁·M-norm + λ₂·S-norm.
pub fn objective(a: &FeatureMatrix, b: &ScenarioLabels, w: &WeightMatrix, h: &Hyperparams) -> Result<f64> {
    h.validate()?;
    Ok(loss(a, b, w, h.loss_variant)? + h.lambda1 * m_norm(w) + h.lambda2 * s_norm(w))
}
