//! Synthetic benchmark data, positive/unlabeled views, and dataset files.
//!
//! A [`Sample`] always keeps its ground-truth label for evaluation; the
//! optional [`PuMark`] is what a PU trainer is allowed to see: `P` for the
//! labeled positives, `U` for everything else.

mod generate;
mod io;

pub use generate::{bayes_accuracy, gen_two_gaussians, gen_two_moons, normal_cdf};
pub use io::{load_dataset, save_dataset};

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Visibility of a sample under the PU protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PuMark {
    /// Labeled positive.
    P,
    /// Unlabeled; may be either class.
    U,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Ground truth, +1 or -1. Used for evaluation and for building
    /// supervised baseline views, never shown to a PU trainer.
    pub true_label: i8,
    pub mark: Option<PuMark>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dim: usize,
    /// Positive prior of the generating distribution.
    pub pi_p: f64,
    /// Fraction of true positives carrying a `P` mark; `None` until
    /// [`make_pu`] has been applied.
    pub r: Option<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count_label(&self, label: i8) -> usize {
        self.samples.iter().filter(|s| s.true_label == label).count()
    }

    pub fn indices_with_mark(&self, mark: PuMark) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.mark == Some(mark))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Ratios for a train/validation/test partition. Every ratio must be
/// strictly positive and the three must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.4,
            val: 0.3,
            test: 0.3,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!(
                    "split ratio {name} must be positive, got {v}"
                )));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Marks a seeded uniformly-random `r`-fraction of the true positives as
/// `P` and everything else as `U`. Features, labels, and sample order are
/// untouched; only the marks (and the stored `r`) change.
pub fn make_pu(dataset: &Dataset, r: f64, seed: u64) -> Result<Dataset> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::config(format!(
            "labeled fraction r must be in (0, 1], got {r}"
        )));
    }
    let pos_indices: Vec<usize> = dataset
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.true_label == 1)
        .map(|(i, _)| i)
        .collect();
    if pos_indices.is_empty() {
        return Err(Error::data("cannot build a PU view without positives"));
    }
    let n_marked = (r * pos_indices.len() as f64).round() as usize;
    if n_marked == 0 {
        return Err(Error::data(format!(
            "r = {r} marks zero of {} positives",
            pos_indices.len()
        )));
    }
    if n_marked == dataset.len() {
        return Err(Error::data("PU view would leave no unlabeled samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = pos_indices.clone();
    shuffled.shuffle(&mut rng);
    let chosen: std::collections::HashSet<usize> = shuffled[..n_marked].iter().copied().collect();
    let mut out = dataset.clone();
    for (i, s) in out.samples.iter_mut().enumerate() {
        s.mark = Some(if chosen.contains(&i) { PuMark::P } else { PuMark::U });
    }
    out.r = Some(r);
    Ok(out)
}

/// Seeded three-way partition. With `stratified` set, each class is split
/// by cumulative rounding so every part size is within one sample of its
/// exact share per class; an empty part is a data error.
pub fn split(
    dataset: &Dataset,
    spec: &SplitSpec,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::data("cannot split an empty dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let strata: Vec<Vec<usize>> = if spec.stratified {
        let pos: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.samples[i].true_label == 1)
            .collect();
        let neg: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.samples[i].true_label == -1)
            .collect();
        vec![pos, neg]
    } else {
        vec![(0..dataset.len()).collect()]
    };

    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        let n = stratum.len();
        let b1 = (n as f64 * spec.train).round() as usize;
        let b2 = (n as f64 * (spec.train + spec.val)).round() as usize;
        let b1 = b1.min(n);
        let b2 = b2.clamp(b1, n);
        parts[0].extend_from_slice(&stratum[..b1]);
        parts[1].extend_from_slice(&stratum[b1..b2]);
        parts[2].extend_from_slice(&stratum[b2..]);
    }
    for p in parts.iter_mut() {
        p.shuffle(&mut rng);
    }
    if parts.iter().any(Vec::is_empty) {
        return Err(Error::data(
            "split produced an empty part; dataset too small for the ratios",
        ));
    }
    let build = |ids: &[usize]| Dataset {
        samples: ids.iter().map(|&i| dataset.samples[i].clone()).collect(),
        dim: dataset.dim,
        pi_p: dataset.pi_p,
        r: dataset.r,
        seed,
    };
    Ok((build(&parts[0]), build(&parts[1]), build(&parts[2])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset(n_pos: usize, n_neg: usize) -> Dataset {
        let mut samples = Vec::new();
        for i in 0..n_pos {
            samples.push(Sample {
                features: vec![i as f64, 1.0],
                true_label: 1,
                mark: None,
            });
        }
        for i in 0..n_neg {
            samples.push(Sample {
                features: vec![-(i as f64), -1.0],
                true_label: -1,
                mark: None,
            });
        }
        Dataset {
            samples,
            dim: 2,
            pi_p: n_pos as f64 / (n_pos + n_neg) as f64,
            r: None,
            seed: 0,
        }
    }

    #[test]
    fn make_pu_marks_the_rounded_fraction() {
        let ds = toy_dataset(100, 200);
        let pu = make_pu(&ds, 0.1, 3).unwrap();
        let n_p = pu.indices_with_mark(PuMark::P).len();
        assert_eq!(n_p, 10);
        assert_eq!(pu.indices_with_mark(PuMark::U).len(), 290);
        assert!(pu
            .indices_with_mark(PuMark::P)
            .iter()
            .all(|&i| pu.samples[i].true_label == 1));
    }

    #[test]
    fn make_pu_changes_marks_only() {
        let ds = toy_dataset(50, 70);
        let a = make_pu(&ds, 0.2, 1).unwrap();
        let b = make_pu(&ds, 0.2, 2).unwrap();
        assert_ne!(
            a.indices_with_mark(PuMark::P),
            b.indices_with_mark(PuMark::P)
        );
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.features, sb.features);
            assert_eq!(sa.true_label, sb.true_label);
        }
    }

    #[test]
    fn make_pu_rejects_a_vanishing_fraction() {
        let ds = toy_dataset(4, 40);
        // round(0.01 * 4) = 0 marked positives.
        assert!(matches!(
            make_pu(&ds, 0.01, 1).unwrap_err(),
            Error::Data(_)
        ));
    }

    #[test]
    fn make_pu_is_seed_deterministic() {
        let ds = toy_dataset(30, 50);
        assert_eq!(make_pu(&ds, 0.3, 9).unwrap(), make_pu(&ds, 0.3, 9).unwrap());
    }

    #[test]
    fn split_sizes_follow_the_ratios_per_class() {
        let ds = toy_dataset(300, 700);
        let spec = SplitSpec::default();
        let (train, val, test) = split(&ds, &spec, 11).unwrap();
        assert_eq!(train.len(), 400);
        assert_eq!(val.len(), 300);
        assert_eq!(test.len(), 300);
        assert_eq!(train.count_label(1), 120);
        assert_eq!(val.count_label(1), 90);
        assert_eq!(test.count_label(1), 90);
    }

    #[test]
    fn split_parts_are_disjoint_and_exhaustive() {
        let ds = toy_dataset(40, 60);
        let (train, val, test) = split(&ds, &SplitSpec::default(), 5).unwrap();
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for part in [&train, &val, &test] {
            for s in &part.samples {
                seen.push(s.features.clone());
            }
        }
        assert_eq!(seen.len(), ds.len());
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), ds.len());
    }

    #[test]
    fn degenerate_ratios_are_config_errors() {
        let ds = toy_dataset(20, 20);
        let bad = SplitSpec {
            train: 1.0,
            val: 0.0,
            test: 0.0,
            stratified: true,
        };
        assert!(matches!(
            split(&ds, &bad, 1).unwrap_err(),
            Error::Config(_)
        ));
        let off = SplitSpec {
            train: 0.5,
            val: 0.3,
            test: 0.3,
            stratified: true,
        };
        assert!(matches!(split(&ds, &off, 1).unwrap_err(), Error::Config(_)));
    }

    #[test]
    fn tiny_dataset_with_empty_part_is_a_data_error() {
        let ds = toy_dataset(1, 1);
        let spec = SplitSpec {
            train: 0.98,
            val: 0.01,
            test: 0.01,
            stratified: false,
        };
        assert!(matches!(split(&ds, &spec, 1).unwrap_err(), Error::Data(_)));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let ds = toy_dataset(50, 50);
        let a = split(&ds, &SplitSpec::default(), 21).unwrap();
        let b = split(&ds, &SplitSpec::default(), 21).unwrap();
        assert_eq!(a, b);
    }
}
