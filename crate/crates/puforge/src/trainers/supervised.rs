//! Supervised baselines: view construction from a PU-marked training split
//! and a plain cross-entropy training loop.

use super::batching::SupervisedBatcher;
use super::{
    evaluate, metrics_from_predictions, predict, seeds, History, LabeledSet, Method, RunResult,
    TrainerConfig,
};
use crate::data::{Dataset, PuMark};
use crate::error::{Error, Result};
use crate::losses::{ce_grad, ce_loss};
use crate::nn::{ModelParams, OptimizerState};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

/// Builds the labeled set a supervised baseline trains on.
///
/// * `full_pn`: every sample with its true label.
/// * `standard_pn`: the marked positives plus all true negatives.
/// * `small_pn`: the marked positives plus a negative subset of matching
///   scarcity, `round(r * #negatives)` drawn with `seed`.
/// * `naive_pu`: marked positives as +1, everything unlabeled as -1.
pub fn make_supervised_view(
    train: &Dataset,
    method: Method,
    r: f64,
    seed: u64,
) -> Result<LabeledSet> {
    let needs_marks = !matches!(method, Method::FullPn);
    if needs_marks && train.indices_with_mark(PuMark::P).is_empty() {
        return Err(Error::data(format!(
            "{} view needs labeled positives in the training split",
            method.key()
        )));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut push = |i: usize, label: i8| {
        features.push(train.samples[i].features.clone());
        labels.push(label);
    };
    match method {
        Method::FullPn => {
            for (i, s) in train.samples.iter().enumerate() {
                push(i, s.true_label);
            }
        }
        Method::StandardPn => {
            for i in train.indices_with_mark(PuMark::P) {
                push(i, 1);
            }
            for (i, s) in train.samples.iter().enumerate() {
                if s.true_label == -1 {
                    push(i, -1);
                }
            }
        }
        Method::SmallPn => {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::config(format!("r must be in (0, 1], got {r}")));
            }
            let positives = train.indices_with_mark(PuMark::P);
            let mut negatives: Vec<usize> = train
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.true_label == -1)
                .map(|(i, _)| i)
                .collect();
            let n_keep = (r * negatives.len() as f64).round() as usize;
            if n_keep == 0 {
                return Err(Error::data(
                    "small_pn view would have no negatives at this r",
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            negatives.shuffle(&mut rng);
            negatives.truncate(n_keep);
            negatives.sort_unstable();
            for i in positives {
                push(i, 1);
            }
            for i in negatives {
                push(i, -1);
            }
        }
        Method::NaivePu => {
            for i in train.indices_with_mark(PuMark::P) {
                push(i, 1);
            }
            for i in train.indices_with_mark(PuMark::U) {
                push(i, -1);
            }
        }
        Method::Nnpu | Method::SelfPu => {
            return Err(Error::config(format!(
                "{} does not train on a supervised view",
                method.key()
            )));
        }
    }
    let view = LabeledSet { features, labels };
    if view.count_label(1) == 0 || view.count_label(-1) == 0 {
        return Err(Error::data(format!(
            "{} view is single-class ({} samples)",
            method.key(),
            view.len()
        )));
    }
    Ok(view)
}

/// Mini-batch SGD on mean cross-entropy; returns the checkpoint with the
/// best validation accuracy (earliest epoch on ties) and its test metrics.
pub fn train_supervised(
    view: &LabeledSet,
    val: &LabeledSet,
    test: &LabeledSet,
    cfg: &TrainerConfig,
) -> Result<(ModelParams, RunResult)> {
    cfg.validate()?;
    if view.is_empty() {
        return Err(Error::data("training view is empty"));
    }
    let start = Instant::now();
    let dim = view.features[0].len();
    let mut init_rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[seeds::TAG_INIT, 0]));
    let mut model = ModelParams::init(
        &cfg.layer_dims(dim),
        crate::nn::Activation::Relu,
        &mut init_rng,
    )?;
    let mut opt = OptimizerState::new(&model, cfg.lr, cfg.momentum)?;
    let mut batcher = SupervisedBatcher::new(
        view.len(),
        cfg.batch_size,
        seeds::derive(cfg.seed, &[seeds::TAG_U_STREAM, 0]),
    )?;

    let mut history = History {
        train_loss: Vec::with_capacity(cfg.epochs),
        loss_parts: BTreeMap::new(),
        val_accuracy: Vec::with_capacity(cfg.epochs),
        trusted_sizes: vec![0; cfg.epochs],
    };
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let mut epoch_loss = 0.0;
        let batches = batcher.epoch_batches();
        let n_batches = batches.len();
        for batch in batches {
            let feats: Vec<&[f64]> = batch.iter().map(|&i| view.features[i].as_slice()).collect();
            let scores = model.forward(&feats)?;
            let n = scores.len() as f64;
            let mut loss = 0.0;
            let mut upstream = Vec::with_capacity(scores.len());
            for (pos, &i) in batch.iter().enumerate() {
                loss += ce_loss(scores[pos], view.labels[i])?;
                upstream.push(ce_grad(scores[pos], view.labels[i])? / n);
            }
            loss /= n;
            epoch_loss += loss;
            let grads = model.backward(&feats, &upstream)?;
            opt.step(&mut model, &grads)?;
        }
        epoch_loss /= n_batches as f64;
        history.train_loss.push(epoch_loss);
        let val_acc = evaluate(&[&model], &val.features, &val.labels)?.accuracy;
        history.val_accuracy.push(val_acc);
        let improved = best.as_ref().map_or(true, |(acc, _, _)| val_acc > *acc);
        if improved {
            best = Some((val_acc, epoch, model.clone()));
        }
    }
    history
        .loss_parts
        .insert("supervised_ce".to_string(), history.train_loss.clone());

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
