//! Minimal fully-connected network with hand-derived gradients.
//!
//! Everything here is `f64` and deterministic: no threads, no global RNG,
//! fixed iteration order. The model outputs one unconstrained logit per
//! sample; probability mapping and losses live elsewhere.

mod checkpoint;
mod gradcheck;
mod model;
mod optim;

pub use checkpoint::{load_model, save_model};
pub(crate) use checkpoint::fmt_f64;
pub use gradcheck::grad_check;
pub use model::{Activation, GradientSet, ModelParams};
pub use optim::{ema_update, OptimizerState};
