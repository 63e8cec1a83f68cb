//! Self-paced selection of trusted pseudo-labeled samples from the
//! unlabeled pool.
//!
//! Each epoch after warm-up, a model ranks the pool by predicted positive
//! probability; the most confident samples become pseudo-positives and the
//! least confident become pseudo-negatives, in equal numbers. Selection is
//! restricted to a seeded bootstrap subset of the pool so the trusted set
//! varies across epochs instead of locking onto one fixed frontier.

use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::nn::ModelParams;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How the per-epoch trusted budget evolves and whether earlier picks are
/// kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Constant budget at the ceiling, reselected from scratch each epoch.
    FixedSize,
    /// Linearly growing budget; previous picks are kept and only the
    /// increment is chosen fresh, so the set grows monotonically.
    WithoutReplacement,
    /// Linearly growing budget, reselected from scratch each epoch.
    DynamicLinear,
}

impl SelectionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SelectionStrategy::FixedSize => "fixed_size",
            SelectionStrategy::WithoutReplacement => "without_replacement",
            SelectionStrategy::DynamicLinear => "dynamic_linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "fixed_size" => Some(SelectionStrategy::FixedSize),
            "without_replacement" => Some(SelectionStrategy::WithoutReplacement),
            "dynamic_linear" => Some(SelectionStrategy::DynamicLinear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub strategy: SelectionStrategy,
    /// Ceiling on the trusted share of the pool at the end of training.
    pub max_trust_frac: f64,
    /// Share of the pool visible to each epoch's selection.
    pub bootstrap_frac: f64,
    /// Epochs of pure PU training before any selection happens.
    pub warmup_epochs: usize,
    /// Extra seed component mixed into the per-epoch bootstrap draw.
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            strategy: SelectionStrategy::DynamicLinear,
            max_trust_frac: 0.2,
            bootstrap_frac: 0.75,
            warmup_epochs: 10,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_trust_frac > 0.0 && self.max_trust_frac <= 1.0) {
            return Err(Error::config(format!(
                "max_trust_frac must be in (0, 1], got {}",
                self.max_trust_frac
            )));
        }
        if !(self.bootstrap_frac > 0.0 && self.bootstrap_frac <= 1.0) {
            return Err(Error::config(format!(
                "bootstrap_frac must be in (0, 1], got {}",
                self.bootstrap_frac
            )));
        }
        Ok(())
    }
}

/// Trusted pseudo-labeled pool positions for one student at one epoch.
/// Positions index into the unlabeled pool the selection ranked, pseudo-
/// positives in `pos`, pseudo-negatives in `neg`; the two sets are disjoint
/// and equally sized.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrustedSet {
    pub pos: BTreeSet<usize>,
    pub neg: BTreeSet<usize>,
    pub epoch: usize,
}

impl TrustedSet {
    pub fn total(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.pos.contains(&index) || self.neg.contains(&index)
    }
}

/// Scores a pool with the model and returns `(pool index, positive
/// probability)` sorted by descending probability, ties broken by ascending
/// index so the order is total and deterministic.
pub fn rank_by_confidence<S: AsRef<[f64]>>(
    model: &ModelParams,
    pool: &[S],
) -> Result<Vec<(usize, f64)>> {
    if pool.is_empty() {
        return Err(Error::data("cannot rank an empty pool"));
    }
    let scores = model.forward(pool)?;
    let mut ranked: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (i, sigmoid(s)))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Per-class trusted budget at `epoch`.
///
/// The total budget ramps linearly from 0 at the end of warm-up to
/// `round(max_trust_frac * pool_size)` at the final epoch; the per-class
/// budget is half that, rounded down so both classes stay equal. The
/// fixed-size strategy sits at the ceiling throughout.
pub fn schedule_trust_size(
    epoch: usize,
    total_epochs: usize,
    cfg: &SelectionConfig,
    pool_size: usize,
) -> Result<usize> {
    cfg.validate()?;
    if epoch < cfg.warmup_epochs {
        return Err(Error::Schedule(format!(
            "epoch {epoch} is inside the warm-up ({} epochs)",
            cfg.warmup_epochs
        )));
    }
    if epoch > total_epochs {
        return Err(Error::Schedule(format!(
            "epoch {epoch} exceeds total_epochs {total_epochs}"
        )));
    }
    if total_epochs <= cfg.warmup_epochs {
        return Err(Error::Schedule(format!(
            "schedule needs total_epochs > warm-up, got {total_epochs} <= {}",
            cfg.warmup_epochs
        )));
    }
    let ceiling = (cfg.max_trust_frac * pool_size as f64).round();
    let total = match cfg.strategy {
        SelectionStrategy::FixedSize => ceiling,
        SelectionStrategy::WithoutReplacement | SelectionStrategy::DynamicLinear => {
            let progress =
                (epoch - cfg.warmup_epochs) as f64 / (total_epochs - cfg.warmup_epochs) as f64;
            (ceiling * progress).round()
        }
    };
    Ok((total as usize) / 2)
}

/// Picks the trusted set for one epoch from a confidence ranking.
///
/// A seeded bootstrap of `round(bootstrap_frac * pool)` indices is drawn
/// without replacement; the top `n_per_class` of the ranking restricted to
/// that subset become pseudo-positives and the bottom `n_per_class` become
/// pseudo-negatives. `WithoutReplacement` keeps everything in `previous`
/// and only draws the increment. Requires `2 * n_per_class` to fit in the
/// bootstrap subset.
pub fn select_trusted<R: Rng>(
    ranked: &[(usize, f64)],
    n_per_class: usize,
    strategy: SelectionStrategy,
    previous: &TrustedSet,
    bootstrap_frac: f64,
    epoch: usize,
    rng: &mut R,
) -> Result<TrustedSet> {
    if ranked.is_empty() {
        return Err(Error::Selection("empty ranking".into()));
    }
    if !(bootstrap_frac > 0.0 && bootstrap_frac <= 1.0) {
        return Err(Error::config(format!(
            "bootstrap_frac must be in (0, 1], got {bootstrap_frac}"
        )));
    }
    let pool = ranked.len();
    let subset_size = (bootstrap_frac * pool as f64).round() as usize;
    if 2 * n_per_class > subset_size {
        return Err(Error::Selection(format!(
            "need {} trusted samples but the bootstrap subset has only {subset_size}",
            2 * n_per_class
        )));
    }
    let member: Vec<bool> = {
        let mut m = vec![false; pool];
        for idx in rand::seq::index::sample(rng, pool, subset_size) {
            m[idx] = true;
        }
        m
    };

    let mut out = TrustedSet {
        epoch,
        ..TrustedSet::default()
    };
    if strategy == SelectionStrategy::WithoutReplacement {
        out.pos = previous.pos.clone();
        out.neg = previous.neg.clone();
    }
    // Walk the ranking from the top for pseudo-positives and from the
    // bottom for pseudo-negatives, restricted to bootstrap members and
    // skipping anything already trusted.
    for &(idx, _) in ranked.iter() {
        if out.pos.len() >= n_per_class {
            break;
        }
        if member[idx] && !out.contains(idx) {
            out.pos.insert(idx);
        }
    }
    for &(idx, _) in ranked.iter().rev() {
        if out.neg.len() >= n_per_class {
            break;
        }
        if member[idx] && !out.contains(idx) {
            out.neg.insert(idx);
        }
    }
    // The budget can only go unmet when previous selections crowd out the
    // bootstrap subset; surface that instead of returning a short set.
    if out.pos.len() < n_per_class || out.neg.len() < n_per_class {
        return Err(Error::Selection(format!(
            "could not fill {} per class from the bootstrap subset",
            n_per_class
        )));
    }
    Ok(out)
}
