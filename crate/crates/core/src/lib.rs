//! Algorithmic core for multisensory place recognition.
//!
//! Learns sparse importance weights over feature and sensor modalities by
//! minimizing a Frobenius loss with nested group-norm regularization, then
//! scores place matches with the learned weights and evaluates loop-closure
//! decisions against GPS ground truth.
//!
//! The crate is `no_std` (alloc only); all IO, file formats and the CLI
//! live in the companion `placerec-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod features;
pub mod geo;
pub mod layout;
pub mod matching;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use layout::{FeatureBlock, ModalityLayout, SensorBlock};
pub use model::{FeatureMatrix, Hyperparams, LossVariant, ScenarioLabels, WeightMatrix};
pub use solver::{Backend, SolveResult, SolverConfig};
