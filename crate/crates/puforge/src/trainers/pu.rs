//! Training by direct PU risk minimization, in both the unbiased and the
//! non-negative (clipped) variants.

use super::batching::PuBatcher;
use super::{
    evaluate, metrics_from_predictions, predict, seeds, History, LabeledSet, RunResult,
    TrainerConfig,
};
use crate::data::{Dataset, PuMark};
use crate::error::{Error, Result};
use crate::losses::{pu_risk_grad, RiskBreakdown, RiskKind};
use crate::nn::{Activation, ModelParams, OptimizerState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

/// One SGD step on the PU risk of a mixed batch. Returns the risk
/// breakdown so callers can track clipping.
pub(crate) fn pu_step(
    model: &mut ModelParams,
    opt: &mut OptimizerState,
    data: &Dataset,
    p_idx: &[usize],
    u_idx: &[usize],
    kind: RiskKind,
) -> Result<RiskBreakdown> {
    let feats: Vec<&[f64]> = p_idx
        .iter()
        .chain(u_idx)
        .map(|&i| data.samples[i].features.as_slice())
        .collect();
    let scores = model.forward(&feats)?;
    let (scores_p, scores_u) = scores.split_at(p_idx.len());
    let (breakdown, grad_p, grad_u) = pu_risk_grad(scores_p, scores_u, data.pi_p, kind)?;
    let mut upstream = grad_p;
    upstream.extend(grad_u);
    let grads = model.backward(&feats, &upstream)?;
    opt.step(model, &grads)?;
    Ok(breakdown)
}

pub(crate) fn pu_pools(data: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let p = data.indices_with_mark(PuMark::P);
    let u = data.indices_with_mark(PuMark::U);
    if p.is_empty() || u.is_empty() {
        return Err(Error::data(
            "PU training needs both marked positives and unlabeled samples",
        ));
    }
    Ok((p, u))
}

/// PU risk minimization with an explicit risk variant and RNG stream id.
///
/// Stream id 0 is the plain single-model trainer; the dual-student
/// pipeline trains its members on streams 1 and 2 so their batches and
/// initializations decorrelate while staying seed-determined.
pub fn train_pu_with_kind(
    data: &Dataset,
    val: &LabeledSet,
    test: &LabeledSet,
    cfg: &TrainerConfig,
    kind: RiskKind,
    stream_id: u64,
) -> Result<(ModelParams, RunResult)> {
    cfg.validate()?;
    let start = Instant::now();
    let (p_pool, u_pool) = pu_pools(data)?;
    let mut init_rng =
        ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[seeds::TAG_INIT, stream_id]));
    let mut model = ModelParams::init(&cfg.layer_dims(data.dim), Activation::Relu, &mut init_rng)?;
    let mut opt = OptimizerState::new(&model, cfg.lr, cfg.momentum)?;
    let mut batcher = PuBatcher::new(
        p_pool,
        u_pool,
        cfg.batch_size,
        seeds::derive(cfg.seed, &[seeds::TAG_P_STREAM, stream_id]),
        seeds::derive(cfg.seed, &[seeds::TAG_U_STREAM, stream_id]),
    )?;

    let mut history = History {
        train_loss: Vec::with_capacity(cfg.epochs),
        loss_parts: BTreeMap::new(),
        val_accuracy: Vec::with_capacity(cfg.epochs),
        trusted_sizes: vec![0; cfg.epochs],
    };
    let mut clipped_frac = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let mut epoch_risk = 0.0;
        let mut clipped = 0usize;
        let batches = batcher.epoch_batches();
        let n_batches = batches.len();
        for (p_idx, u_idx) in &batches {
            let breakdown = pu_step(&mut model, &mut opt, data, p_idx, u_idx, kind)?;
            epoch_risk += breakdown.total;
            clipped += breakdown.correction_clipped as usize;
        }
        history.train_loss.push(epoch_risk / n_batches as f64);
        clipped_frac.push(clipped as f64 / n_batches as f64);
        let val_acc = evaluate(&[&model], &val.features, &val.labels)?.accuracy;
        history.val_accuracy.push(val_acc);
        if best.as_ref().map_or(true, |(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, model.clone()));
        }
    }
    history
        .loss_parts
        .insert("pu_risk".to_string(), history.train_loss.clone());
    history
        .loss_parts
        .insert("clipped_frac".to_string(), clipped_frac);

    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    let preds = predict(&[&best_model], &test.features)?;
    let metrics = metrics_from_predictions(&preds, &test.labels);
    let result = RunResult {
        method: cfg.method,
        seed: cfg.seed,
        config: cfg.clone(),
        dataset: None,
        metrics,
        best_epoch,
        history,
        trusted_log: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((best_model, result))
}

/// Non-negative PU risk minimization on the default stream.
pub fn train_nnpu(
    data: &Dataset,
    val: &LabeledSet,
    test: &LabeledSet,
    cfg: &TrainerConfig,
) -> Result<(ModelParams, RunResult)> {
    train_pu_with_kind(data, val, test, cfg, RiskKind::NonNegative, 0)
}
