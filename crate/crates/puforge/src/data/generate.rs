//! Seeded synthetic benchmark generators.

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn check_common(n: usize, pi_p: f64) -> Result<usize> {
    if n < 10 {
        return Err(Error::config(format!("need at least 10 samples, got {n}")));
    }
    if !(pi_p > 0.0 && pi_p < 1.0) {
        return Err(Error::config(format!(
            "class prior must be in (0, 1), got {pi_p}"
        )));
    }
    let n_pos = (pi_p * n as f64).round() as usize;
    if n_pos == 0 || n_pos == n {
        return Err(Error::config(format!(
            "prior {pi_p} with n = {n} leaves a class empty"
        )));
    }
    Ok(n_pos)
}

/// Two spherical unit-variance Gaussians in `d` dimensions whose means sit
/// `mu_sep` apart along the first axis: positives at `+mu_sep/2 * e1`,
/// negatives at `-mu_sep/2 * e1`. Class counts are `round(pi_p * n)` and the
/// rest; sample order is a seeded shuffle.
///
/// The midpoint hyperplane achieves accuracy `normal_cdf(mu_sep / 2)`,
/// which [`bayes_accuracy`] reports as the benchmark's reference ceiling.
pub fn gen_two_gaussians(n: usize, pi_p: f64, mu_sep: f64, d: usize, seed: u64) -> Result<Dataset> {
    let n_pos = check_common(n, pi_p)?;
    if d == 0 {
        return Err(Error::config("dimension must be at least 1"));
    }
    if !(mu_sep > 0.0) || !mu_sep.is_finite() {
        return Err(Error::config(format!(
            "mean separation must be positive, got {mu_sep}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = mu_sep / 2.0;
    let mut samples = Vec::with_capacity(n);
    for label in [1i8, -1] {
        let count = if label == 1 { n_pos } else { n - n_pos };
        let shift = if label == 1 { half } else { -half };
        for _ in 0..count {
            let mut features: Vec<f64> =
                (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            features[0] += shift;
            samples.push(Sample {
                features,
                true_label: label,
                mark: None,
            });
        }
    }
    samples.shuffle(&mut rng);
    Ok(Dataset {
        samples,
        dim: d,
        pi_p,
        r: None,
        seed,
    })
}

/// Two interleaved half-circles in the plane. Positives trace the upper
/// unit arc `(cos t, sin t)`, negatives the shifted lower arc
/// `(1 - cos t, 1/2 - sin t)`, `t` evenly spaced over `[0, pi]`, with
/// isotropic Gaussian noise of standard deviation `noise_sd` added on top.
pub fn gen_two_moons(n: usize, pi_p: f64, noise_sd: f64, seed: u64) -> Result<Dataset> {
    let n_pos = check_common(n, pi_p)?;
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::config(format!(
            "noise standard deviation must be non-negative, got {noise_sd}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arc = |count: usize, idx: usize| -> f64 {
        if count == 1 {
            0.0
        } else {
            std::f64::consts::PI * idx as f64 / (count - 1) as f64
        }
    };
    let mut samples = Vec::with_capacity(n);
    for i in 0..n_pos {
        let t = arc(n_pos, i);
        let mut x = t.cos();
        let mut y = t.sin();
        if noise_sd > 0.0 {
            x += noise_sd * rng.sample::<f64, _>(StandardNormal);
            y += noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        samples.push(Sample {
            features: vec![x, y],
            true_label: 1,
            mark: None,
        });
    }
    let n_neg = n - n_pos;
    for i in 0..n_neg {
        let t = arc(n_neg, i);
        let mut x = 1.0 - t.cos();
        let mut y = 0.5 - t.sin();
        if noise_sd > 0.0 {
            x += noise_sd * rng.sample::<f64, _>(StandardNormal);
            y += noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        samples.push(Sample {
            features: vec![x, y],
            true_label: -1,
            mark: None,
        });
    }
    samples.shuffle(&mut rng);
    Ok(Dataset {
        samples,
        dim: 2,
        pi_p,
        r: None,
        seed,
    })
}

/// Standard normal CDF via a rational erf approximation (absolute error
/// below 1.5e-7, plenty for accuracy comparisons at two decimals).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Accuracy of the midpoint hyperplane on the two-Gaussian benchmark:
/// `normal_cdf(mu_sep / 2)` for either class.
pub fn bayes_accuracy(mu_sep: f64) -> Result<f64> {
    if !(mu_sep > 0.0) || !mu_sep.is_finite() {
        return Err(Error::config(format!(
            "mean separation must be positive, got {mu_sep}"
        )));
    }
    Ok(normal_cdf(mu_sep / 2.0))
}
