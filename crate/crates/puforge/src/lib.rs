//! Learning binary classifiers from positive and unlabeled data.
//!
//! The crate covers the full experimental loop: synthetic dataset
//! generation and PU marking ([`data`]), unbiased and clipped PU risk
//! estimators plus the distillation and consistency losses ([`losses`]), a
//! small dense network trained by SGD with momentum ([`nn`]), self-paced
//! trusted-sample selection ([`selection`]), the training loops for every
//! baseline and for the dual-student/mean-teacher pipeline ([`trainers`]),
//! and the multi-run experiment harness with report emission ([`harness`]).
//!
//! Everything is deterministic given a seed: reruns of the same config are
//! bitwise identical, including saved models and reports.

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod nn;
pub mod selection;
pub mod trainers;

pub use error::{Error, Result};
