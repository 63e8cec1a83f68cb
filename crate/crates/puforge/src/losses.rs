//! Loss functions for positive-unlabeled training.
//!
//! Scores are raw logits. The probability map is the logistic sigmoid
//! `f(z) = 1/(1+exp(-z))` and the classification surrogate is
//! `l(z) = 1/(1+exp(z))`, i.e. `f(-z)`: a smooth, strictly decreasing
//! stand-in for the zero-one loss at margin `z` with `l(z) + l(-z) = 1`.
//!
//! Every loss here comes in a value form and a `_grad` form returning
//! `d loss / d score` per sample, so a trainer can combine upstream
//! gradients from several losses and run one backward pass per model.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Numerically stable logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_prime(z: f64) -> f64 {
    sigmoid(z) * sigmoid(-z)
}

/// Surrogate loss at margin `z`: `1/(1+exp(z))`. Stable over all of f64.
pub fn surrogate(z: f64) -> f64 {
    sigmoid(-z)
}

/// `d surrogate / d z = -sigmoid(z) * sigmoid(-z)`.
pub fn surrogate_prime(z: f64) -> f64 {
    -sigmoid_prime(z)
}

fn stable_softplus(x: f64) -> f64 {
    // log(1 + exp(x)) without overflow.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn check_prior(pi_p: f64) -> Result<()> {
    if !(pi_p > 0.0 && pi_p < 1.0) {
        return Err(Error::config(format!(
            "class prior must be in (0, 1), got {pi_p}"
        )));
    }
    Ok(())
}

/// The three pieces of a PU risk estimate.
///
/// `positive_term` is `pi_p * mean l(s)` over positive scores;
/// `negative_correction` is `mean l(-s) over unlabeled - pi_p * mean l(-s)
/// over positives`. The unbiased total is their sum; the non-negative total
/// clamps the correction at zero and records that it did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub positive_term: f64,
    pub negative_correction: f64,
    pub total: f64,
    pub correction_clipped: bool,
}

/// Which estimator a PU risk evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskKind {
    /// Plain unbiased estimator; can go negative when the model overfits.
    Unbiased,
    /// Correction clamped at zero. When the clamp is active the gradient
    /// contract switches to descending on `-(correction)`, pushing the
    /// correction back toward zero.
    NonNegative,
}

fn risk_parts(scores_p: &[f64], scores_u: &[f64], pi_p: f64) -> Result<(f64, f64, f64)> {
    check_prior(pi_p)?;
    if scores_p.is_empty() {
        return Err(Error::data("pu risk needs at least one positive score"));
    }
    if scores_u.is_empty() {
        return Err(Error::data("pu risk needs at least one unlabeled score"));
    }
    let n_p = scores_p.len() as f64;
    let n_u = scores_u.len() as f64;
    let r_p_pos = scores_p.iter().map(|&s| surrogate(s)).sum::<f64>() / n_p;
    let r_p_neg = scores_p.iter().map(|&s| surrogate(-s)).sum::<f64>() / n_p;
    let r_u_neg = scores_u.iter().map(|&s| surrogate(-s)).sum::<f64>() / n_u;
    Ok((pi_p * r_p_pos, r_u_neg - pi_p * r_p_neg, r_u_neg))
}

/// Unbiased PU risk: `pi_p * R_p^+ + (R_u^- - pi_p * R_p^-)`.
pub fn upu_risk(scores_p: &[f64], scores_u: &[f64], pi_p: f64) -> Result<RiskBreakdown> {
    let (positive_term, negative_correction, _) = risk_parts(scores_p, scores_u, pi_p)?;
    Ok(RiskBreakdown {
        positive_term,
        negative_correction,
        total: positive_term + negative_correction,
        correction_clipped: false,
    })
}

/// Non-negative PU risk: same positive term, correction clamped at zero.
pub fn nnpu_risk(scores_p: &[f64], scores_u: &[f64], pi_p: f64) -> Result<RiskBreakdown> {
    let (positive_term, negative_correction, _) = risk_parts(scores_p, scores_u, pi_p)?;
    let clipped = negative_correction < 0.0;
    Ok(RiskBreakdown {
        positive_term,
        negative_correction,
        total: if clipped {
            positive_term
        } else {
            positive_term + negative_correction
        },
        correction_clipped: clipped,
    })
}

/// Risk value plus `d/d score` for the positive and unlabeled batches.
///
/// For the non-negative estimator with an active clamp, the returned
/// gradient is that of `-(negative_correction)` alone: a descent step then
/// raises the correction toward zero instead of minimizing a clamped
/// constant. The positive term contributes no gradient in that regime.
pub fn pu_risk_grad(
    scores_p: &[f64],
    scores_u: &[f64],
    pi_p: f64,
    kind: RiskKind,
) -> Result<(RiskBreakdown, Vec<f64>, Vec<f64>)> {
    let breakdown = match kind {
        RiskKind::Unbiased => upu_risk(scores_p, scores_u, pi_p)?,
        RiskKind::NonNegative => nnpu_risk(scores_p, scores_u, pi_p)?,
    };
    let n_p = scores_p.len() as f64;
    let n_u = scores_u.len() as f64;
    let (grad_p, grad_u) = if breakdown.correction_clipped {
        // d/ds of -(R_u^- - pi_p * R_p^-).
        let gp = scores_p
            .iter()
            .map(|&s| -pi_p * surrogate_prime(-s) / n_p)
            .collect();
        let gu = scores_u
            .iter()
            .map(|&s| surrogate_prime(-s) / n_u)
            .collect();
        (gp, gu)
    } else {
        let gp = scores_p
            .iter()
            .map(|&s| pi_p * (surrogate_prime(s) + surrogate_prime(-s)) / n_p)
            .collect();
        let gu = scores_u
            .iter()
            .map(|&s| -surrogate_prime(-s) / n_u)
            .collect();
        (gp, gu)
    };
    Ok((breakdown, grad_p, grad_u))
}

/// Per-sample PU hardness term for an unlabeled score: `l(-s)`.
/// Near zero for confident negatives, near one for samples the model
/// pushes positive; this is the sample's additive share of `R_u^-` and the
/// left-hand side of the distillation gate.
pub fn per_sample_pu(score_u: f64) -> f64 {
    surrogate(-score_u)
}

fn check_label(label: i8) -> Result<()> {
    if label != 1 && label != -1 {
        return Err(Error::data(format!("label must be +1 or -1, got {label}")));
    }
    Ok(())
}

/// Binary cross-entropy on a logit with a +/-1 label:
/// `-log f(s)` for +1, `-log(1 - f(s))` for -1.
pub fn ce_loss(score: f64, label: i8) -> Result<f64> {
    check_label(label)?;
    Ok(if label == 1 {
        stable_softplus(-score)
    } else {
        stable_softplus(score)
    })
}

/// `d ce / d score`: `f(s) - 1` for label +1, `f(s)` for label -1.
pub fn ce_grad(score: f64, label: i8) -> Result<f64> {
    check_label(label)?;
    Ok(if label == 1 {
        sigmoid(score) - 1.0
    } else {
        sigmoid(score)
    })
}

/// Supervised-plus-PU objective over one batch: mean cross-entropy on the
/// trusted pseudo-labeled samples plus the non-negative PU risk on the
/// remaining positive/unlabeled pool. An empty trusted slice reduces this
/// to the plain PU risk; an empty remaining pool is a data error.
pub fn hybrid_loss(
    trusted: &[(f64, i8)],
    scores_p: &[f64],
    scores_u: &[f64],
    pi_p: f64,
) -> Result<f64> {
    Ok(hybrid_loss_grad(trusted, scores_p, scores_u, pi_p)?.0)
}

/// Hybrid loss with per-sample gradients in input order:
/// `(value, trusted grads, positive grads, unlabeled grads, risk breakdown)`.
pub fn hybrid_loss_grad(
    trusted: &[(f64, i8)],
    scores_p: &[f64],
    scores_u: &[f64],
    pi_p: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>, RiskBreakdown)> {
    let (breakdown, grad_p, grad_u) =
        pu_risk_grad(scores_p, scores_u, pi_p, RiskKind::NonNegative)?;
    let mut ce_mean = 0.0;
    let mut trusted_grads = Vec::with_capacity(trusted.len());
    if !trusted.is_empty() {
        let n_t = trusted.len() as f64;
        for &(score, label) in trusted {
            ce_mean += ce_loss(score, label)?;
            trusted_grads.push(ce_grad(score, label)? / n_t);
        }
        ce_mean /= n_t;
    }
    Ok((
        ce_mean + breakdown.total,
        trusted_grads,
        grad_p,
        grad_u,
        breakdown,
    ))
}

/// Gate trace for one unlabeled sample in the student distillation loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub sample_index: usize,
    pub pu_term: f64,
    pub mse_term: f64,
    pub active: bool,
}

/// Gated probability-space MSE between two students.
///
/// Per sample, `m = (f(s1) - f(s2))^2`; the sample contributes `m` exactly
/// when its PU hardness exceeds `alpha * m`, so easy agreements are left
/// alone and hard disagreements are pulled together. The total is the mean
/// over the full batch (inactive samples count as zero in the numerator).
pub fn gated_mse(
    scores_1: &[f64],
    scores_2: &[f64],
    pu_terms: &[f64],
    alpha: f64,
) -> Result<(f64, Vec<GateRecord>)> {
    let (v, records, _, _) = gated_mse_grad(scores_1, scores_2, pu_terms, alpha)?;
    Ok((v, records))
}

/// Gated MSE with gradients for both score vectors. The gate and the PU
/// terms are treated as constants: gradient flows only through the squared
/// probability gap of active samples.
pub fn gated_mse_grad(
    scores_1: &[f64],
    scores_2: &[f64],
    pu_terms: &[f64],
    alpha: f64,
) -> Result<(f64, Vec<GateRecord>, Vec<f64>, Vec<f64>)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::config(format!(
            "gate alpha must be positive, got {alpha}"
        )));
    }
    if scores_2.len() != scores_1.len() {
        return Err(Error::shape("gated mse scores", scores_1.len(), scores_2.len()));
    }
    if pu_terms.len() != scores_1.len() {
        return Err(Error::shape("gated mse pu terms", scores_1.len(), pu_terms.len()));
    }
    if scores_1.is_empty() {
        return Ok((0.0, Vec::new(), Vec::new(), Vec::new()));
    }
    let n = scores_1.len() as f64;
    let mut total = 0.0;
    let mut records = Vec::with_capacity(scores_1.len());
    let mut grad_1 = vec![0.0; scores_1.len()];
    let mut grad_2 = vec![0.0; scores_2.len()];
    for i in 0..scores_1.len() {
        let f1 = sigmoid(scores_1[i]);
        let f2 = sigmoid(scores_2[i]);
        let gap = f1 - f2;
        let mse_term = gap * gap;
        let active = pu_terms[i] > alpha * mse_term;
        if active {
            total += mse_term;
            grad_1[i] = 2.0 * gap * sigmoid_prime(scores_1[i]) / n;
            grad_2[i] = -2.0 * gap * sigmoid_prime(scores_2[i]) / n;
        }
        records.push(GateRecord {
            sample_index: i,
            pu_term: pu_terms[i],
            mse_term,
            active,
        });
    }
    Ok((total / n, records, grad_1, grad_2))
}

/// Probability-space MSE pulling a student toward its exponential-moving-
/// average teacher: mean of `(f(teacher) - f(student))^2`. One call covers
/// one teacher/student pair; no gradient ever flows into the teacher.
pub fn teacher_consistency_loss(teacher_scores: &[f64], student_scores: &[f64]) -> Result<f64> {
    Ok(teacher_consistency_grad(teacher_scores, student_scores)?.0)
}

/// Consistency loss plus `d/d student score`; the teacher side is constant.
pub fn teacher_consistency_grad(
    teacher_scores: &[f64],
    student_scores: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if teacher_scores.len() != student_scores.len() {
        return Err(Error::shape(
            "consistency scores",
            teacher_scores.len(),
            student_scores.len(),
        ));
    }
    if teacher_scores.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = teacher_scores.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(student_scores.len());
    for (&t, &s) in teacher_scores.iter().zip(student_scores) {
        let gap = sigmoid(t) - sigmoid(s);
        total += gap * gap;
        grad.push(-2.0 * gap * sigmoid_prime(s) / n);
    }
    Ok((total / n, grad))
}

/// Unweighted sum of loss components.
pub fn total_loss(parts: &[f64]) -> f64 {
    parts.iter().sum()
}
