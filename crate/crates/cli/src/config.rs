//! Plain-text key-value run configuration, embedded verbatim in reports.

use std::fmt::Write as _;
use std::path::Path;

use placerec_core::solver::Backend;
use placerec_core::{Hyperparams, LossVariant, SolverConfig};

use crate::error::{CliError, Result};

/// Everything a run needs, with documented defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub loss: LossVariant,
    pub backend: Backend,
    pub max_iters: usize,
    pub tol: f64,
    pub epsilon: f64,
    pub radius_m: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Frames larger than this are area-averaged down to it.
    pub downsample_width: usize,
    pub downsample_height: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 0.01,
            loss: LossVariant::Squared,
            backend: Backend::Irls,
            max_iters: 2000,
            tol: 1e-8,
            epsilon: 1e-8,
            radius_m: 50.0,
            threshold: 0.85,
            seed: 42,
            downsample_width: 752,
            downsample_height: 120,
        }
    }
}

impl RunConfig {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams { lambda1: self.lambda1, lambda2: self.lambda2, loss_variant: self.loss }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            epsilon: self.epsilon,
            backend: self.backend,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lambda1 {}", self.lambda1);
        let _ = writeln!(out, "lambda2 {}", self.lambda2);
        let _ = writeln!(out, "loss {}", loss_name(self.loss));
        let _ = writeln!(out, "backend {}", backend_name(self.backend));
        let _ = writeln!(out, "max_iters {}", self.max_iters);
        let _ = writeln!(out, "tol {}", self.tol);
        let _ = writeln!(out, "epsilon {}", self.epsilon);
        let _ = writeln!(out, "radius_m {}", self.radius_m);
        let _ = writeln!(out, "threshold {}", self.threshold);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "downsample_width {}", self.downsample_width);
        let _ = writeln!(out, "downsample_height {}", self.downsample_height);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(char::is_whitespace).ok_or_else(|| {
                CliError::Validation(format!("config line {}: expected 'key value'", lineno + 1))
            })?;
            cfg.set(key, value.trim())
                .map_err(|e| CliError::Validation(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value.parse().map_err(|_| format!("bad value '{value}' for {key}"))
        }
        match key {
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "loss" => {
                self.loss = match value {
                    "squared" => LossVariant::Squared,
                    "unsquared" => LossVariant::Unsquared,
                    _ => return Err(format!("loss must be 'squared' or 'unsquared', got '{value}'")),
                }
            }
            "backend" => {
                self.backend = match value {
                    "irls" => Backend::Irls,
                    "prox_grad" => Backend::ProxGrad,
                    _ => return Err(format!("backend must be 'irls' or 'prox_grad', got '{value}'")),
                }
            }
            "max_iters" => self.max_iters = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "radius_m" => self.radius_m = parse(key, value)?,
            "threshold" => self.threshold = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "downsample_width" => self.downsample_width = parse(key, value)?,
            "downsample_height" => self.downsample_height = parse(key, value)?,
            _ => return Err(format!("unknown config key '{key}'")),
        }
        Ok(())
    }
}

pub fn loss_name(loss: LossVariant) -> &'static str {
    match loss {
        LossVariant::Squared => "squared",
        LossVariant::Unsquared => "unsquared",
    }
}

pub fn backend_name(backend: Backend) -> &'static str {
    match backend {
        Backend::Irls => "irls",
        Backend::ProxGrad => "prox_grad",
    }
}
