//! Training loops for the supervised baselines, PU risk minimization, and
//! the dual-student/mean-teacher pipeline, plus shared evaluation helpers.
//!
//! Reproducibility contract: every source of randomness is a ChaCha stream
//! whose seed is derived from the run seed and a purpose tag (see
//! [`seeds`]), so identical configs produce bitwise-identical parameters,
//! histories, and metrics.

mod batching;
mod pu;
mod selfpu;
mod supervised;

pub use pu::{train_nnpu, train_pu_with_kind};
pub use selfpu::{train_selfpu, SelfPuModels};
pub use supervised::{make_supervised_view, train_supervised};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::nn::ModelParams;
use crate::selection::{SelectionConfig, TrustedSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Seed derivation for the independent RNG streams inside one run.
///
/// `derive` folds purpose tags into the run seed with splitmix64 steps, so
/// streams for init, batching, selection, and view subsetting are
/// decorrelated but fully determined by `(run seed, tags)`.
pub(crate) mod seeds {
    pub const TAG_INIT: u64 = 1;
    pub const TAG_P_STREAM: u64 = 2;
    pub const TAG_U_STREAM: u64 = 3;
    pub const TAG_SHARED_U: u64 = 4;
    pub const TAG_SELECT: u64 = 5;
    pub const TAG_VIEW: u64 = 6;

    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn derive(seed: u64, tags: &[u64]) -> u64 {
        let mut z = splitmix64(seed);
        for &t in tags {
            z = splitmix64(z ^ splitmix64(t.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        }
        z
    }
}

/// The six trainable methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Every training sample with its true label: the supervised ceiling.
    FullPn,
    /// The labeled positives plus all true negatives.
    StandardPn,
    /// The labeled positives plus an equally scarce negative subset.
    SmallPn,
    /// Unlabeled samples treated as negatives; the naive PU baseline.
    NaivePu,
    /// Non-negative PU risk minimization.
    Nnpu,
    /// Warm-up, self-paced trusted selection, dual students, mean teachers.
    SelfPu,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::FullPn,
        Method::StandardPn,
        Method::SmallPn,
        Method::NaivePu,
        Method::Nnpu,
        Method::SelfPu,
    ];

    /// Identifier used in config files and run-log filenames.
    pub fn key(self) -> &'static str {
        match self {
            Method::FullPn => "full_pn",
            Method::StandardPn => "standard_pn",
            Method::SmallPn => "small_pn",
            Method::NaivePu => "naive_pu",
            Method::Nnpu => "nnpu",
            Method::SelfPu => "self_pu",
        }
    }

    /// Human-readable name used as a report column header.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::FullPn => "Full PN",
            Method::StandardPn => "Standard PN",
            Method::SmallPn => "Small PN",
            Method::NaivePu => "PU",
            Method::Nnpu => "nnPU",
            Method::SelfPu => "Self-PU",
        }
    }

    pub fn from_key(key: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.key() == key)
    }
}

/// Which branches of the dual-student pipeline are active. All three on is
/// the full method; all three off reduces the trainer to plain PU risk
/// minimization on a single model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfPuOptions {
    /// Self-paced trusted selection feeding the cross-entropy half of the
    /// hybrid objective.
    pub use_trusted: bool,
    /// Dual students with the gated distillation loss.
    pub use_student_loss: bool,
    /// Mean teachers with the consistency loss; also makes teachers the
    /// inference models.
    pub use_teacher: bool,
}

impl Default for SelfPuOptions {
    fn default() -> Self {
        SelfPuOptions {
            use_trusted: true,
            use_student_loss: true,
            use_teacher: true,
        }
    }
}

/// Hyperparameters for one training run. Fields irrelevant to the chosen
/// method are still validated so a config error surfaces regardless of the
/// method it first ships with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub method: Method,
    /// Labeled-positive fraction of the PU view this run trains on.
    pub r: f64,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Distillation gate threshold.
    pub alpha: f64,
    /// Teacher EMA coefficient.
    pub beta: f64,
    /// Hidden layer widths; empty means a linear model.
    pub hidden_dims: Vec<usize>,
    pub selection: SelectionConfig,
    pub selfpu: SelfPuOptions,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            method: Method::Nnpu,
            r: 0.1,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 16,
            epochs: 100,
            alpha: 20.0,
            beta: 0.5,
            hidden_dims: vec![64, 32],
            selection: SelectionConfig::default(),
            selfpu: SelfPuOptions::default(),
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(Error::config(format!("r must be in (0, 1], got {}", self.r)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::config(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::config(format!(
                "beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        if self.selection.warmup_epochs > self.epochs {
            return Err(Error::config(format!(
                "warm-up ({}) cannot exceed epochs ({})",
                self.selection.warmup_epochs, self.epochs
            )));
        }
        self.selection.validate()
    }

    pub(crate) fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(1);
        dims
    }
}

/// A plain labeled set: the form every baseline trains on and every
/// validation/test evaluation reads.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

impl LabeledSet {
    pub fn from_dataset(ds: &Dataset) -> Self {
        LabeledSet {
            features: ds.samples.iter().map(|s| s.features.clone()).collect(),
            labels: ds.samples.iter().map(|s| s.true_label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn count_label(&self, label: i8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Mean positive probability across an ensemble of models.
pub fn predict_proba<S: AsRef<[f64]>>(models: &[&ModelParams], inputs: &[S]) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::data("prediction needs at least one model"));
    }
    let mut probs = vec![0.0; inputs.len()];
    for m in models {
        let scores = m.forward(inputs)?;
        for (p, s) in probs.iter_mut().zip(scores) {
            *p += sigmoid(s);
        }
    }
    let k = models.len() as f64;
    for p in probs.iter_mut() {
        *p /= k;
    }
    Ok(probs)
}

/// Ensemble prediction thresholded at probability 0.5 (exactly 0.5 falls
/// to the negative class).
pub fn predict<S: AsRef<[f64]>>(models: &[&ModelParams], inputs: &[S]) -> Result<Vec<i8>> {
    Ok(predict_proba(models, inputs)?
        .into_iter()
        .map(|p| if p > 0.5 { 1 } else { -1 })
        .collect())
}

/// Accuracy, precision, recall, and F1 for the positive class; the 0/0
/// corner cases all report 0.
pub fn evaluate<S: AsRef<[f64]>>(
    models: &[&ModelParams],
    set_features: &[S],
    set_labels: &[i8],
) -> Result<Metrics> {
    if set_features.is_empty() {
        return Err(Error::data("cannot evaluate on an empty set"));
    }
    if set_features.len() != set_labels.len() {
        return Err(Error::shape("evaluation labels", set_features.len(), set_labels.len()));
    }
    let preds = predict(models, set_features)?;
    Ok(metrics_from_predictions(&preds, set_labels))
}

pub(crate) fn metrics_from_predictions(preds: &[i8], labels: &[i8]) -> Metrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, -1) => fp += 1,
            (-1, -1) => tn += 1,
            _ => fn_ += 1,
        }
    }
    let total = (tp + fp + tn + fn_) as f64;
    let accuracy = (tp + tn) as f64 / total;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
    }
}

/// Per-epoch traces recorded by every trainer. All vectors have length
/// `epochs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Mean training objective per epoch (mean over its batches).
    pub train_loss: Vec<f64>,
    /// Named components of the objective, same indexing.
    pub loss_parts: BTreeMap<String, Vec<f64>>,
    pub val_accuracy: Vec<f64>,
    /// Total trusted-set size per epoch (one student's budget; zero during
    /// warm-up and for methods without selection).
    pub trusted_sizes: Vec<usize>,
}

/// How the training data for a run was produced, echoed into run records
/// so any cell can be regenerated from its JSON file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDesc {
    /// Generator name ("two_gaussians", "two_moons") or "file:<path>".
    pub source: String,
    pub n: usize,
    pub dim: usize,
    pub pi_p: f64,
    /// Class-mean separation; zero when not applicable to the source.
    pub mu_sep: f64,
    pub seed: u64,
}

/// Everything one training run produces besides the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub config: TrainerConfig,
    /// Provenance of the training data, when the caller generated it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dataset: Option<DatasetDesc>,
    /// Test metrics of the best-validation-accuracy checkpoint.
    pub metrics: Metrics,
    pub best_epoch: usize,
    pub history: History,
    /// Per-epoch trusted sets per student, for selection audits.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trusted_log: Option<Vec<Vec<TrustedSet>>>,
    /// Wall-clock seconds; excluded from determinism comparisons.
    pub wall_time_s: f64,
}

/// Trains `cfg.method` on a PU-marked training split and returns the
/// inference models plus the run record. Validation and test sets are
/// fully labeled.
pub fn train_method(
    train_pu: &Dataset,
    val: &LabeledSet,
    test: &LabeledSet,
    cfg: &TrainerConfig,
) -> Result<(Vec<ModelParams>, RunResult)> {
    cfg.validate()?;
    match cfg.method {
        Method::FullPn | Method::StandardPn | Method::SmallPn | Method::NaivePu => {
            let view = make_supervised_view(
                train_pu,
                cfg.method,
                cfg.r,
                seeds::derive(cfg.seed, &[seeds::TAG_VIEW]),
            )?;
            let (model, result) = train_supervised(&view, val, test, cfg)?;
            Ok((vec![model], result))
        }
        Method::Nnpu => {
            let (model, result) = train_nnpu(train_pu, val, test, cfg)?;
            Ok((vec![model], result))
        }
        Method::SelfPu => {
            let (models, result) = train_selfpu(train_pu, val, test, cfg)?;
            Ok((models.inference_models().to_vec(), result))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    #[test]
    fn constant_negative_model_on_a_30_percent_positive_set() {
        let model = ModelParams {
            layer_dims: vec![1, 1],
            weights: vec![vec![0.0]],
            biases: vec![vec![-5.0]],
            activation: Activation::Relu,
        };
        let features: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<i8> = (0..10).map(|i| if i < 3 { 1 } else { -1 }).collect();
        let m = evaluate(&[&model], &features, &labels).unwrap();
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
    }

    #[test]
    fn metrics_match_a_hand_counted_confusion_table() {
        let preds = [1i8, 1, 1, -1, -1, -1, 1, -1];
        let labels = [1i8, 1, -1, -1, 1, -1, -1, 1];
        // tp=2 fp=2 tn=2 fn=2.
        let m = metrics_from_predictions(&preds, &labels);
        assert!((m.accuracy - 0.5).abs() < 1e-12);
        assert!((m.precision - 0.5).abs() < 1e-12);
        assert!((m.recall - 0.5).abs() < 1e-12);
        assert!((m.f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_half_probability_predicts_negative() {
        let model = ModelParams {
            layer_dims: vec![1, 1],
            weights: vec![vec![0.0]],
            biases: vec![vec![0.0]],
            activation: Activation::Relu,
        };
        let preds = predict(&[&model], &[[1.0]]).unwrap();
        assert_eq!(preds, vec![-1]);
    }

    #[test]
    fn ensemble_prediction_averages_probabilities() {
        let up = ModelParams {
            layer_dims: vec![1, 1],
            weights: vec![vec![0.0]],
            biases: vec![vec![3.0]],
            activation: Activation::Relu,
        };
        let down = ModelParams {
            layer_dims: vec![1, 1],
            weights: vec![vec![0.0]],
            biases: vec![vec![-1.0]],
            activation: Activation::Relu,
        };
        let probs = predict_proba(&[&up, &down], &[[0.0]]).unwrap();
        let expect = (sigmoid(3.0) + sigmoid(-1.0)) / 2.0;
        assert!((probs[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn config_validation_catches_each_field() {
        let ok = TrainerConfig::default();
        assert!(ok.validate().is_ok());
        for breaker in [
            |c: &mut TrainerConfig| c.r = 0.0,
            |c: &mut TrainerConfig| c.lr = -1.0,
            |c: &mut TrainerConfig| c.momentum = 1.0,
            |c: &mut TrainerConfig| c.batch_size = 1,
            |c: &mut TrainerConfig| c.epochs = 0,
            |c: &mut TrainerConfig| c.alpha = 0.0,
            |c: &mut TrainerConfig| c.beta = 1.5,
            |c: &mut TrainerConfig| c.hidden_dims = vec![0],
            |c: &mut TrainerConfig| c.selection.warmup_epochs = 1000,
            |c: &mut TrainerConfig| c.selection.bootstrap_frac = 0.0,
        ] {
            let mut bad = ok.clone();
            breaker(&mut bad);
            assert!(matches!(bad.validate().unwrap_err(), Error::Config(_)));
        }
    }

    #[test]
    fn method_keys_roundtrip() {
        for m in Method::ALL {
            assert_eq!(Method::from_key(m.key()), Some(m));
        }
        assert_eq!(Method::from_key("bogus"), None);
    }

    #[test]
    fn seed_derivation_is_stable_and_tag_sensitive() {
        use seeds::*;
        assert_eq!(derive(7, &[TAG_INIT, 1]), derive(7, &[TAG_INIT, 1]));
        assert_ne!(derive(7, &[TAG_INIT, 1]), derive(7, &[TAG_INIT, 2]));
        assert_ne!(derive(7, &[TAG_INIT, 1]), derive(8, &[TAG_INIT, 1]));
        assert_ne!(derive(7, &[TAG_P_STREAM]), derive(7, &[TAG_U_STREAM]));
    }
}
