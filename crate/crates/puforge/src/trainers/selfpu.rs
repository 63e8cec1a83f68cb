//! The full pipeline: PU warm-up, self-paced trusted selection, dual
//! students with gated distillation, and EMA mean teachers.
//!
//! Phase 1 (epochs `1..=warmup`) trains each student by plain clipped PU
//! risk minimization on its own RNG streams. Phase 2 switches the pair to
//! one shared unlabeled stream per batch (positives keep per-student
//! streams), re-selects each student's trusted set every epoch, and adds
//! the gated student loss and the teacher consistency loss on top of the
//! hybrid objective. Teachers are spawned as student copies at the phase
//! boundary and only ever move by EMA.

use super::batching::{pu_batch_shape, PCycler, PuBatcher, UChunker};
use super::pu::{pu_pools, pu_step};
use super::{
    evaluate, metrics_from_predictions, predict, seeds, History, LabeledSet, RunResult,
    TrainerConfig,
};
use crate::data::Dataset;
use crate::error::Result;
use crate::losses::{
    ce_grad, ce_loss, gated_mse_grad, hybrid_loss_grad, per_sample_pu, teacher_consistency_grad,
    RiskKind,
};
use crate::nn::{ema_update, Activation, ModelParams, OptimizerState};
use crate::selection::{rank_by_confidence, schedule_trust_size, select_trusted, TrustedSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::Instant;

/// Gate sentinel for trusted samples: real PU hardness lies in (0, 1), so
/// a negative value keeps the gate closed for them while the distillation
/// mean keeps the full chunk as its denominator.
const GATE_EXCLUDED: f64 = -1.0;

/// Final parameters of the pipeline. `teachers` is empty when the teacher
/// branch is disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfPuModels {
    pub students: Vec<ModelParams>,
    pub teachers: Vec<ModelParams>,
}

impl SelfPuModels {
    /// The ensemble predictions come from: teachers when they exist,
    /// students otherwise.
    pub fn inference_models(&self) -> &[ModelParams] {
        if self.teachers.is_empty() {
            &self.students
        } else {
            &self.teachers
        }
    }
}

struct Student {
    model: ModelParams,
    opt: OptimizerState,
    trusted: TrustedSet,
    stream_id: u64,
}

struct StepOut {
    hybrid: f64,
    student: f64,
    teacher: f64,
    clipped: usize,
    risk_evals: usize,
}

pub fn train_selfpu(
    data: &Dataset,
    val: &LabeledSet,
    test: &LabeledSet,
    cfg: &TrainerConfig,
) -> Result<(SelfPuModels, RunResult)> {
    cfg.validate()?;
    let start = Instant::now();
    let (p_pool, u_pool) = pu_pools(data)?;
    let opts = cfg.selfpu;
    // Any branch that couples two models needs the second student; with
    // everything off this trainer degenerates to single-model PU risk
    // minimization on the default streams.
    let dual = opts.use_student_loss || opts.use_teacher;
    let stream_ids: Vec<u64> = if dual { vec![1, 2] } else { vec![0] };
    let warmup = cfg.selection.warmup_epochs;
    let (p_per_batch, u_per_batch) = pu_batch_shape(cfg.batch_size, p_pool.len(), u_pool.len());
    let u_feats: Vec<&[f64]> = u_pool
        .iter()
        .map(|&i| data.samples[i].features.as_slice())
        .collect();

    let mut students = Vec::with_capacity(stream_ids.len());
    let mut warmup_batchers = Vec::with_capacity(stream_ids.len());
    for &id in &stream_ids {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[seeds::TAG_INIT, id]));
        let model = ModelParams::init(&cfg.layer_dims(data.dim), Activation::Relu, &mut rng)?;
        let opt = OptimizerState::new(&model, cfg.lr, cfg.momentum)?;
        students.push(Student {
            model,
            opt,
            trusted: TrustedSet::default(),
            stream_id: id,
        });
        warmup_batchers.push(PuBatcher::new(
            p_pool.clone(),
            u_pool.clone(),
            cfg.batch_size,
            seeds::derive(cfg.seed, &[seeds::TAG_P_STREAM, id]),
            seeds::derive(cfg.seed, &[seeds::TAG_U_STREAM, id]),
        )?);
    }
    let mut teachers: Vec<ModelParams> = Vec::new();
    let mut shared_u: Option<UChunker> = None;
    let mut p_cyclers: Vec<PCycler> = Vec::new();

    let mut history = History {
        train_loss: Vec::with_capacity(cfg.epochs),
        loss_parts: BTreeMap::new(),
        val_accuracy: Vec::with_capacity(cfg.epochs),
        trusted_sizes: Vec::with_capacity(cfg.epochs),
    };
    let mut part_hybrid = Vec::with_capacity(cfg.epochs);
    let mut part_student = Vec::with_capacity(cfg.epochs);
    let mut part_teacher = Vec::with_capacity(cfg.epochs);
    let mut part_clipped = Vec::with_capacity(cfg.epochs);
    let mut trusted_log: Vec<Vec<TrustedSet>> = Vec::with_capacity(cfg.epochs);
    type Snapshot = (f64, usize, Vec<ModelParams>, Vec<ModelParams>);
    let mut best: Option<Snapshot> = None;

    for epoch in 1..=cfg.epochs {
        let mut hybrid_sum = 0.0;
        let mut student_sum = 0.0;
        let mut teacher_sum = 0.0;
        let mut clipped = 0usize;
        let mut risk_evals = 0usize;
        let n_batches;
        if epoch <= warmup {
            let mut nb = 0;
            for (k, st) in students.iter_mut().enumerate() {
                let batches = warmup_batchers[k].epoch_batches();
                nb = batches.len();
                for (p_idx, u_idx) in &batches {
                    let bd = pu_step(
                        &mut st.model,
                        &mut st.opt,
                        data,
                        p_idx,
                        u_idx,
                        RiskKind::NonNegative,
                    )?;
                    hybrid_sum += bd.total;
                    clipped += bd.correction_clipped as usize;
                    risk_evals += 1;
                }
            }
            n_batches = nb;
        } else {
            if opts.use_teacher && teachers.is_empty() {
                teachers = students.iter().map(|s| s.model.clone()).collect();
            }
            if dual && shared_u.is_none() {
                shared_u = Some(UChunker::new(
                    u_pool.clone(),
                    u_per_batch,
                    seeds::derive(cfg.seed, &[seeds::TAG_SHARED_U]),
                )?);
                p_cyclers = stream_ids
                    .iter()
                    .map(|&id| {
                        PCycler::new(
                            p_pool.clone(),
                            p_per_batch,
                            seeds::derive(cfg.seed, &[seeds::TAG_P_STREAM, id, 2]),
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            if opts.use_trusted {
                let n_per_class =
                    schedule_trust_size(epoch, cfg.epochs, &cfg.selection, u_pool.len())?;
                for st in students.iter_mut() {
                    let ranked = rank_by_confidence(&st.model, &u_feats)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(
                        cfg.seed,
                        &[
                            seeds::TAG_SELECT,
                            cfg.selection.seed,
                            st.stream_id,
                            epoch as u64,
                        ],
                    ));
                    st.trusted = select_trusted(
                        &ranked,
                        n_per_class,
                        cfg.selection.strategy,
                        &st.trusted,
                        cfg.selection.bootstrap_frac,
                        epoch,
                        &mut rng,
                    )?;
                }
            }
            let batches: Vec<(Vec<Vec<usize>>, Vec<usize>)> = if dual {
                shared_u
                    .as_mut()
                    .expect("built at the phase boundary")
                    .epoch_chunks()
                    .into_iter()
                    .map(|chunk| (p_cyclers.iter_mut().map(|c| c.draw()).collect(), chunk))
                    .collect()
            } else {
                warmup_batchers[0]
                    .epoch_batches()
                    .into_iter()
                    .map(|(p, u)| (vec![p], u))
                    .collect()
            };
            n_batches = batches.len();
            for (ps, chunk) in &batches {
                let out = phase2_step(data, &mut students, &mut teachers, ps, chunk, &u_pool, cfg)?;
                hybrid_sum += out.hybrid;
                student_sum += out.student;
                teacher_sum += out.teacher;
                clipped += out.clipped;
                risk_evals += out.risk_evals;
            }
        }

        let nb = n_batches as f64;
        let (h, s, t) = (hybrid_sum / nb, student_sum / nb, teacher_sum / nb);
        history.train_loss.push(h + s + t);
        part_hybrid.push(h);
        part_student.push(s);
        part_teacher.push(t);
        part_clipped.push(if risk_evals == 0 {
            0.0
        } else {
            clipped as f64 / risk_evals as f64
        });
        history.trusted_sizes.push(students[0].trusted.total());
        trusted_log.push(
            students
                .iter()
                .map(|st| {
                    let mut t = st.trusted.clone();
                    t.epoch = epoch;
                    t
                })
                .collect(),
        );

        let inference: Vec<&ModelParams> = if teachers.is_empty() {
            students.iter().map(|s| &s.model).collect()
        } else {
            teachers.iter().collect()
        };
        let val_acc = evaluate(&inference, &val.features, &val.labels)?.accuracy;
        history.val_accuracy.push(val_acc);
        if best.as_ref().map_or(true, |(acc, ..)| val_acc > *acc) {
            best = Some((
                val_acc,
                epoch,
                students.iter().map(|s| s.model.clone()).collect(),
                teachers.clone(),
            ));
        }
    }

    history.loss_parts.insert("hybrid".to_string(), part_hybrid);
    history.loss_parts.insert("student".to_string(), part_student);
    history.loss_parts.insert("teacher".to_string(), part_teacher);
    history
        .loss_parts
        .insert("clipped_frac".to_string(), part_clipped);

    let (_, best_epoch, best_students, mut best_teachers) = best.expect("at least one epoch ran");
    // A best epoch inside the warm-up predates the teachers; they would
    // have been exact student copies there, so materialize the copies.
    if opts.use_teacher && best_teachers.is_empty() {
        best_teachers = best_students.clone();
    }
    let models = SelfPuModels {
        students: best_students,
        teachers: best_teachers,
    };
    let inference: Vec<&ModelParams> = models.inference_models().iter().collect();
    let preds = predict(&inference, &test.features)?;
    let metrics = metrics_from_predictions(&preds, &test.labels);
    let result = RunResult {
        method: cfg.method,
        seed: cfg.seed,
        config: cfg.clone(),
        dataset: None,
        metrics,
        best_epoch,
        history,
        trusted_log: Some(trusted_log),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((models, result))
}

/// One phase-2 step over a shared unlabeled chunk: every loss term is
/// evaluated on the pre-step parameter snapshot, then the students step
/// and the teachers track them by EMA.
fn phase2_step(
    data: &Dataset,
    students: &mut [Student],
    teachers: &mut [ModelParams],
    ps: &[Vec<usize>],
    chunk: &[usize],
    u_pool: &[usize],
    cfg: &TrainerConfig,
) -> Result<StepOut> {
    let opts = cfg.selfpu;
    let k_n = students.len();
    let chunk_pos: Vec<usize> = chunk
        .iter()
        .map(|&di| {
            u_pool
                .binary_search(&di)
                .expect("chunk indices come from the pool")
        })
        .collect();
    let chunk_feats: Vec<&[f64]> = chunk
        .iter()
        .map(|&i| data.samples[i].features.as_slice())
        .collect();

    let mut feats: Vec<Vec<&[f64]>> = Vec::with_capacity(k_n);
    let mut p_scores: Vec<Vec<f64>> = Vec::with_capacity(k_n);
    let mut u_scores: Vec<Vec<f64>> = Vec::with_capacity(k_n);
    for (k, st) in students.iter().enumerate() {
        let f: Vec<&[f64]> = ps[k]
            .iter()
            .map(|&i| data.samples[i].features.as_slice())
            .chain(chunk_feats.iter().copied())
            .collect();
        let scores = st.model.forward(&f)?;
        let (sp, su) = scores.split_at(ps[k].len());
        p_scores.push(sp.to_vec());
        u_scores.push(su.to_vec());
        feats.push(f);
    }
    let teacher_scores: Vec<Vec<f64>> = teachers
        .iter()
        .map(|t| t.forward(&chunk_feats))
        .collect::<Result<_>>()?;

    let mut out = StepOut {
        hybrid: 0.0,
        student: 0.0,
        teacher: 0.0,
        clipped: 0,
        risk_evals: 0,
    };
    let mut u_upstream: Vec<Vec<f64>> = vec![vec![0.0; chunk.len()]; k_n];
    let mut p_upstream: Vec<Vec<f64>> = Vec::with_capacity(k_n);

    for (k, st) in students.iter().enumerate() {
        let mut trusted_pairs: Vec<(f64, i8)> = Vec::new();
        let mut trusted_at: Vec<usize> = Vec::new();
        let mut rest_scores: Vec<f64> = Vec::new();
        let mut rest_at: Vec<usize> = Vec::new();
        for (i, &pp) in chunk_pos.iter().enumerate() {
            if st.trusted.pos.contains(&pp) {
                trusted_pairs.push((u_scores[k][i], 1));
                trusted_at.push(i);
            } else if st.trusted.neg.contains(&pp) {
                trusted_pairs.push((u_scores[k][i], -1));
                trusted_at.push(i);
            } else {
                rest_scores.push(u_scores[k][i]);
                rest_at.push(i);
            }
        }
        if rest_scores.is_empty() {
            // Every unlabeled sample in the chunk is trusted: no pool is
            // left for the risk term, so this batch trains on the
            // cross-entropy half alone.
            let n_t = trusted_pairs.len() as f64;
            let mut v = 0.0;
            for (&(s, l), &i) in trusted_pairs.iter().zip(&trusted_at) {
                v += ce_loss(s, l)?;
                u_upstream[k][i] += ce_grad(s, l)? / n_t;
            }
            out.hybrid += v / n_t;
            p_upstream.push(vec![0.0; ps[k].len()]);
        } else {
            let (value, t_grads, p_grads, r_grads, bd) =
                hybrid_loss_grad(&trusted_pairs, &p_scores[k], &rest_scores, data.pi_p)?;
            out.hybrid += value;
            out.clipped += bd.correction_clipped as usize;
            out.risk_evals += 1;
            for (&g, &i) in t_grads.iter().zip(&trusted_at) {
                u_upstream[k][i] += g;
            }
            for (&g, &i) in r_grads.iter().zip(&rest_at) {
                u_upstream[k][i] += g;
            }
            p_upstream.push(p_grads);
        }

        if opts.use_student_loss {
            debug_assert_eq!(k_n, 2, "the distillation loss couples two students");
            let other = 1 - k;
            let pu_terms: Vec<f64> = chunk_pos
                .iter()
                .enumerate()
                .map(|(i, &pp)| {
                    if st.trusted.contains(pp) {
                        GATE_EXCLUDED
                    } else {
                        per_sample_pu(u_scores[k][i])
                    }
                })
                .collect();
            let (g_val, _, g_self, g_other) =
                gated_mse_grad(&u_scores[k], &u_scores[other], &pu_terms, cfg.alpha)?;
            out.student += g_val;
            for i in 0..chunk.len() {
                u_upstream[k][i] += g_self[i];
                u_upstream[other][i] += g_other[i];
            }
        }
        if opts.use_teacher {
            let (t_val, t_grads) = teacher_consistency_grad(&teacher_scores[k], &u_scores[k])?;
            out.teacher += t_val;
            for i in 0..chunk.len() {
                u_upstream[k][i] += t_grads[i];
            }
        }
    }

    for k in 0..k_n {
        let upstream: Vec<f64> = p_upstream[k].iter().chain(&u_upstream[k]).copied().collect();
        let st = &mut students[k];
        let grads = st.model.backward(&feats[k], &upstream)?;
        st.opt.step(&mut st.model, &grads)?;
    }
    if opts.use_teacher {
        for (t, st) in teachers.iter_mut().zip(students.iter()) {
            ema_update(t, &st.model, cfg.beta)?;
        }
    }
    Ok(out)
}
