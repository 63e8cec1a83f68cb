//! Acceptance gates for the whole pipeline. Each test prints one
//! `acceptance N: PASS/FAIL` line (run with `--nocapture` to see the PASS
//! lines). Tolerances are pinned here on purpose; loosening them to make a
//! red gate green defeats their point.

use std::sync::OnceLock;
use std::time::Instant;

use puforge::data::{Dataset, PuMark, Sample};
use puforge::harness::{
    make_datasets, run_alpha_sweep, run_benchmark_table, run_beta_sweep, run_component_ablation,
    ExperimentSpec, Report, ReportTable,
};
use puforge::losses::{
    ce_grad, ce_loss, gated_mse_grad, nnpu_risk, per_sample_pu, pu_risk_grad, sigmoid,
    teacher_consistency_grad, upu_risk, RiskKind,
};
use puforge::nn::{grad_check, Activation, ModelParams};
use puforge::selection::{
    rank_by_confidence, schedule_trust_size, select_trusted, SelectionConfig, SelectionStrategy,
    TrustedSet,
};
use puforge::trainers::{
    train_method, train_pu_with_kind, LabeledSet, Method, RunResult, TrainerConfig,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const BAYES_REFERENCE: f64 = 0.9192433407662290;
const POINT: f64 = 0.01;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {id:2}: {} - {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

// ---------------------------------------------------------------------------
// Shared heavy runs. The benchmark experiment backs gates 5, 9, and 10; the
// component ablation backs gates 6 and 7. OnceLock keeps each to one run.

struct Bench {
    table: ReportTable,
    dir: tempfile::TempDir,
    secs: f64,
}

fn benchmark() -> &'static Bench {
    static BENCH: OnceLock<Bench> = OnceLock::new();
    BENCH.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let start = Instant::now();
        let (table, _) = run_benchmark_table(&ExperimentSpec::default(), Some(dir.path()))
            .expect("benchmark experiment");
        Bench {
            table,
            dir,
            secs: start.elapsed().as_secs_f64(),
        }
    })
}

fn ablation() -> &'static (ReportTable, Vec<RunResult>, f64) {
    static ABLATION: OnceLock<(ReportTable, Vec<RunResult>, f64)> = OnceLock::new();
    ABLATION.get_or_init(|| {
        let start = Instant::now();
        let (table, runs) =
            run_component_ablation(&ExperimentSpec::default(), None).expect("component ablation");
        (table, runs, start.elapsed().as_secs_f64())
    })
}

fn cell_mean(table: &ReportTable, row: &str, col: &str) -> f64 {
    let i = table.rows.iter().position(|r| r == row).expect("row");
    let j = table.cols.iter().position(|c| c == col).expect("col");
    table.cells[i][j].mean
}

// ---------------------------------------------------------------------------
// 1. Gradient suite: every loss and their sum, finite-difference checked on
// small models and batches sampled away from ReLU kinks, the risk clamp
// switch, and the distillation gate boundary.

const FD_EPS: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;
const MARGIN: f64 = 1e-2;

struct Trial {
    model: ModelParams,
    batch: Vec<Vec<f64>>,
    labels: Vec<i8>,
    n_t: usize,
    n_p: usize,
    partner_u: Vec<f64>,
    teacher_u: Vec<f64>,
    pi: f64,
    alpha: f64,
    clipped: bool,
}

/// Forward pass mirrored by hand, reporting the smallest |pre-activation|
/// seen on any hidden unit so callers can reject batches near a kink.
fn forward_margin(model: &ModelParams, x: &[f64]) -> (f64, f64) {
    let mut margin = f64::INFINITY;
    let mut cur = x.to_vec();
    let layers = model.layer_dims.len() - 1;
    for l in 0..layers {
        let (n_in, n_out) = (model.layer_dims[l], model.layer_dims[l + 1]);
        let mut next = vec![0.0; n_out];
        for j in 0..n_out {
            let mut z = model.biases[l][j];
            for i in 0..n_in {
                z += model.weights[l][j * n_in + i] * cur[i];
            }
            if l + 1 < layers {
                margin = margin.min(z.abs());
                next[j] = z.max(0.0);
            } else {
                next[j] = z;
            }
        }
        cur = next;
    }
    (cur[0], margin)
}

fn trial_margins_ok(t: &Trial) -> bool {
    let mut scores = Vec::with_capacity(t.batch.len());
    for x in &t.batch {
        let (s, margin) = forward_margin(&t.model, x);
        if margin < MARGIN {
            return false;
        }
        scores.push(s);
    }
    let (sp, su) = (
        &scores[t.n_t..t.n_t + t.n_p],
        &scores[t.n_t + t.n_p..],
    );
    let risk = upu_risk(sp, su, t.pi).expect("risk");
    if risk.negative_correction.abs() < MARGIN {
        return false;
    }
    if (risk.negative_correction < 0.0) != t.clipped {
        return false;
    }
    for (i, &s) in su.iter().enumerate() {
        let gap = sigmoid(s) - sigmoid(t.partner_u[i]);
        if (per_sample_pu(s) - t.alpha * gap * gap).abs() < MARGIN {
            return false;
        }
    }
    true
}

/// One random ReLU-net trial; `None` when a margin check rejects the draw.
fn sample_relu_trial(rng: &mut ChaCha8Rng) -> Option<Trial> {
    let d = rng.gen_range(2..=4usize);
    let h = rng.gen_range(2..=5usize);
    let dims = [d, h, 1];
    let model = ModelParams::init(&dims, Activation::Relu, rng).unwrap();
    let partner = ModelParams::init(&dims, Activation::Relu, rng).unwrap();
    let teacher = ModelParams::init(&dims, Activation::Relu, rng).unwrap();
    let (n_t, n_p, n_u) = (3, 3, 6);
    let batch: Vec<Vec<f64>> = (0..n_t + n_p + n_u)
        .map(|_| (0..d).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let labels: Vec<i8> = (0..n_t).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let u_feats = &batch[n_t + n_p..];
    let partner_u: Vec<f64> = u_feats.iter().map(|x| forward_margin(&partner, x).0).collect();
    let teacher_u: Vec<f64> = u_feats.iter().map(|x| forward_margin(&teacher, x).0).collect();
    let pi = rng.gen_range(0.2..0.6);
    let trial = Trial {
        model,
        batch,
        labels,
        n_t,
        n_p,
        partner_u,
        teacher_u,
        pi,
        alpha: 20.0,
        clipped: false,
    };
    let mut t = trial;
    // Whatever sign the correction drew is fine for the uPU closure; the
    // margin check only pins the trial to one side of the clamp.
    let sp: Vec<f64> = t.batch[t.n_t..t.n_t + t.n_p]
        .iter()
        .map(|x| forward_margin(&t.model, x).0)
        .collect();
    let su: Vec<f64> = t.batch[t.n_t + t.n_p..]
        .iter()
        .map(|x| forward_margin(&t.model, x).0)
        .collect();
    t.clipped = upu_risk(&sp, &su, t.pi).ok()?.negative_correction < 0.0;
    if trial_margins_ok(&t) {
        Some(t)
    } else {
        None
    }
}

/// Linear-model trial with features placed along the weight vector so the
/// clamp lands on a chosen side with a wide margin.
fn sample_linear_trial(rng: &mut ChaCha8Rng, clipped: bool) -> Option<Trial> {
    let d = rng.gen_range(2..=4usize);
    let dims = [d, 1];
    let model = ModelParams::init(&dims, Activation::Relu, rng).unwrap();
    let partner = ModelParams::init(&dims, Activation::Relu, rng).unwrap();
    let teacher = ModelParams::init(&dims, Activation::Relu, rng).unwrap();
    let w = model.weights[0].clone();
    let b = model.biases[0][0];
    let w2: f64 = w.iter().map(|v| v * v).sum();
    if w2 < 1e-6 {
        return None;
    }
    // x = (target - b) * w / |w|^2 makes the score exactly `target`.
    let place = |target: f64| -> Vec<f64> {
        w.iter().map(|&wi| (target - b) * wi / w2).collect()
    };
    let (n_t, n_p, n_u) = (3, 3, 6);
    let mut batch = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_t {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        labels.push(if i % 2 == 0 { 1 } else { -1 });
        batch.push(place(sign * rng.gen_range(0.5..2.0)));
    }
    for _ in 0..n_p {
        batch.push(place(rng.gen_range(0.5..1.5)));
    }
    for _ in 0..n_u {
        let target = if clipped {
            rng.gen_range(-4.0..-2.5)
        } else {
            rng.gen_range(-0.5..1.5)
        };
        batch.push(place(target));
    }
    let pi = if clipped { 0.6 } else { 0.3 };
    let u_feats = &batch[n_t + n_p..];
    let partner_u: Vec<f64> = u_feats.iter().map(|x| forward_margin(&partner, x).0).collect();
    let teacher_u: Vec<f64> = u_feats.iter().map(|x| forward_margin(&teacher, x).0).collect();
    let t = Trial {
        model,
        batch,
        labels,
        n_t,
        n_p,
        partner_u,
        teacher_u,
        pi,
        alpha: 20.0,
        clipped,
    };
    if trial_margins_ok(&t) {
        Some(t)
    } else {
        None
    }
}

/// Runs all six finite-difference checks on one trial and returns the worst
/// relative error. When the clamp is active, the differentiable objective
/// is `-(correction)`, so that is what the FD probe evaluates.
fn check_trial(t: &Trial) -> f64 {
    let (n_t, n_p) = (t.n_t, t.n_p);
    let labels = t.labels.clone();
    let (pi, alpha) = (t.pi, t.alpha);
    let partner = t.partner_u.clone();
    let teacher = t.teacher_u.clone();

    let ce = |s: &[f64]| {
        let mut v = 0.0;
        let mut g = vec![0.0; s.len()];
        for (i, &l) in labels.iter().enumerate() {
            v += ce_loss(s[i], l).unwrap();
            g[i] = ce_grad(s[i], l).unwrap() / n_t as f64;
        }
        (v / n_t as f64, g)
    };
    let upu = |s: &[f64]| {
        let (bd, gp, gu) =
            pu_risk_grad(&s[n_t..n_t + n_p], &s[n_t + n_p..], pi, RiskKind::Unbiased).unwrap();
        let mut g = vec![0.0; s.len()];
        g[n_t..n_t + n_p].copy_from_slice(&gp);
        g[n_t + n_p..].copy_from_slice(&gu);
        (bd.total, g)
    };
    let nnpu = |s: &[f64]| {
        let (bd, gp, gu) =
            pu_risk_grad(&s[n_t..n_t + n_p], &s[n_t + n_p..], pi, RiskKind::NonNegative).unwrap();
        let v = if bd.correction_clipped {
            -bd.negative_correction
        } else {
            bd.total
        };
        let mut g = vec![0.0; s.len()];
        g[n_t..n_t + n_p].copy_from_slice(&gp);
        g[n_t + n_p..].copy_from_slice(&gu);
        (v, g)
    };
    let gated = |s: &[f64]| {
        let su = &s[n_t + n_p..];
        let pu_terms: Vec<f64> = su.iter().map(|&x| per_sample_pu(x)).collect();
        let (v, _, g1, _) = gated_mse_grad(su, &partner, &pu_terms, alpha).unwrap();
        let mut g = vec![0.0; s.len()];
        g[n_t + n_p..].copy_from_slice(&g1);
        (v, g)
    };
    let consistency = |s: &[f64]| {
        let (v, gs) = teacher_consistency_grad(&teacher, &s[n_t + n_p..]).unwrap();
        let mut g = vec![0.0; s.len()];
        g[n_t + n_p..].copy_from_slice(&gs);
        (v, g)
    };
    let total = |s: &[f64]| {
        let (v1, g1) = ce(s);
        let (v2, g2) = nnpu(s);
        let (v3, g3) = gated(s);
        let (v4, g4) = consistency(s);
        let g = (0..s.len()).map(|i| g1[i] + g2[i] + g3[i] + g4[i]).collect();
        (v1 + v2 + v3 + v4, g)
    };

    let mut worst: f64 = 0.0;
    worst = worst.max(grad_check(&t.model, ce, &t.batch, FD_EPS).unwrap());
    worst = worst.max(grad_check(&t.model, upu, &t.batch, FD_EPS).unwrap());
    worst = worst.max(grad_check(&t.model, nnpu, &t.batch, FD_EPS).unwrap());
    worst = worst.max(grad_check(&t.model, gated, &t.batch, FD_EPS).unwrap());
    worst = worst.max(grad_check(&t.model, consistency, &t.batch, FD_EPS).unwrap());
    worst = worst.max(grad_check(&t.model, total, &t.batch, FD_EPS).unwrap());
    worst
}

#[test]
fn c01_gradients_match_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut trials = Vec::new();
    let mut attempts = 0;
    while trials.len() < 12 {
        attempts += 1;
        assert!(attempts < 2000, "could not sample margin-safe ReLU trials");
        if let Some(t) = sample_relu_trial(&mut rng) {
            trials.push(t);
        }
    }
    for clipped in [true, false] {
        let mut got = 0;
        while got < 4 {
            attempts += 1;
            assert!(attempts < 4000, "could not sample margin-safe linear trials");
            if let Some(t) = sample_linear_trial(&mut rng, clipped) {
                trials.push(t);
                got += 1;
            }
        }
    }
    assert_eq!(trials.len(), 20);
    let clipped_count = trials.iter().filter(|t| t.clipped).count();
    assert!(clipped_count >= 4, "need clamp-active coverage");

    let worst = trials.iter().map(check_trial).fold(0.0f64, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < FD_TOL && secs < 30.0;
    verdict(
        1,
        "gradient suite",
        pass,
        &format!(
            "worst rel err {worst:.2e} over 20 models x 6 losses ({clipped_count} clamp-active), {secs:.1}s"
        ),
    );
    assert!(pass, "worst fd error {worst:.3e}, took {secs:.1}s");
}

// ---------------------------------------------------------------------------
// 2. Risk estimators against a straight-line re-evaluation.

#[test]
fn c02_risk_estimators_match_direct_formula() {
    fn l(z: f64) -> f64 {
        1.0 / (1.0 + z.exp())
    }
    fn oracle(sp: &[f64], su: &[f64], pi: f64) -> (f64, f64, f64) {
        let rp_pos = sp.iter().map(|&s| l(s)).sum::<f64>() / sp.len() as f64;
        let rp_neg = sp.iter().map(|&s| l(-s)).sum::<f64>() / sp.len() as f64;
        let ru_neg = su.iter().map(|&s| l(-s)).sum::<f64>() / su.len() as f64;
        let corr = ru_neg - pi * rp_neg;
        (pi * rp_pos + corr, pi * rp_pos + corr.max(0.0), corr)
    }

    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut max_diff: f64 = 0.0;
    let mut clipped_seen = 0;
    for case in 0..100 {
        // The last third gets score ranges that force a negative correction
        // so the clamp side of the comparison is exercised too.
        let force_clip = case >= 67;
        let pi = if force_clip { rng.gen_range(0.6..0.9) } else { rng.gen_range(0.1..0.9) };
        let sp: Vec<f64> = (0..5)
            .map(|_| {
                if force_clip { rng.gen_range(0.5..2.0) } else { rng.gen_range(-6.0..6.0) }
            })
            .collect();
        let su: Vec<f64> = (0..5)
            .map(|_| {
                if force_clip { rng.gen_range(-6.0..-4.0) } else { rng.gen_range(-6.0..6.0) }
            })
            .collect();
        let (want_upu, want_nnpu, corr) = oracle(&sp, &su, pi);
        let got_upu = upu_risk(&sp, &su, pi).unwrap();
        let got_nnpu = nnpu_risk(&sp, &su, pi).unwrap();
        max_diff = max_diff
            .max((got_upu.total - want_upu).abs())
            .max((got_nnpu.total - want_nnpu).abs());
        if corr >= 0.0 {
            assert_eq!(
                got_nnpu.total, got_upu.total,
                "clamp must be inert when the correction is non-negative"
            );
            assert!(!got_nnpu.correction_clipped);
        } else {
            clipped_seen += 1;
            assert!(got_nnpu.correction_clipped);
            assert!(got_nnpu.total >= 0.0);
        }
    }
    let pass = max_diff < 1e-10 && clipped_seen >= 30;
    verdict(
        2,
        "risk estimator oracle",
        pass,
        &format!("max |diff| {max_diff:.2e} on 100 batches, {clipped_seen} clamp-active"),
    );
    assert!(pass, "max diff {max_diff:.3e}, clipped {clipped_seen}");
}

// ---------------------------------------------------------------------------
// 3. Unbiased risk dives negative under overfitting; the clamped trace
// never does.

fn overfit_set(seed: u64) -> (Dataset, LabeledSet, LabeledSet) {
    // High dimension with few samples: every point is memorizable, which
    // is exactly the regime where the unclamped risk digs below zero.
    let d = 20;
    let mu = 1.0;
    let pi = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |label: i8, mark: Option<PuMark>, rng: &mut ChaCha8Rng| -> Sample {
        let mut features: Vec<f64> =
            (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        features[0] += if label == 1 { mu / 2.0 } else { -mu / 2.0 };
        Sample { features, true_label: label, mark }
    };
    let mut samples = Vec::new();
    for _ in 0..50 {
        samples.push(draw(1, Some(PuMark::P), &mut rng));
    }
    for _ in 0..500 {
        let label = if rng.gen_range(0.0..1.0) < pi { 1 } else { -1 };
        samples.push(draw(label, Some(PuMark::U), &mut rng));
    }
    let data = Dataset { samples, dim: d, pi_p: pi, r: Some(0.25), seed };
    let labeled = |n: usize, rng: &mut ChaCha8Rng| {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let label = if rng.gen_range(0.0..1.0) < pi { 1 } else { -1 };
            let s = draw(label, None, rng);
            features.push(s.features);
            labels.push(label);
        }
        LabeledSet { features, labels }
    };
    let val = labeled(60, &mut rng);
    let test = labeled(60, &mut rng);
    (data, val, test)
}

#[test]
fn c03_clamp_blocks_negative_risk_under_overfitting() {
    let start = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for k in 0..5u64 {
        let (data, val, test) = overfit_set(300 + k);
        // Large batches keep the risk trace smooth enough to settle below
        // the generalizing plateau instead of oscillating around it.
        let cfg = TrainerConfig {
            method: Method::Nnpu,
            r: 0.25,
            batch_size: 64,
            hidden_dims: vec![128, 128],
            seed: 300 + k,
            ..TrainerConfig::default()
        };
        let (_, unbiased) =
            train_pu_with_kind(&data, &val, &test, &cfg, RiskKind::Unbiased, 0).unwrap();
        let (_, clamped) =
            train_pu_with_kind(&data, &val, &test, &cfg, RiskKind::NonNegative, 0).unwrap();
        let dive = unbiased.history.loss_parts["pu_risk"]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let floor = clamped.history.loss_parts["pu_risk"]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        pass &= dive < -0.05 && floor >= 0.0;
        detail.push_str(&format!("[seed {k}: dive {dive:.3}, floor {floor:.1e}] "));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    verdict(3, "clamp under overfitting", pass, &format!("{detail}{secs:.0}s"));
    assert!(pass, "{detail} in {secs:.0}s");
}

// ---------------------------------------------------------------------------
// 4. Fully supervised training on the benchmark lands at the analytic
// midpoint-rule accuracy.

#[test]
fn c04_full_supervision_reaches_reference_accuracy() {
    let start = Instant::now();
    let spec = ExperimentSpec::default();
    let mut accs = Vec::new();
    for run in 0..spec.n_runs {
        let (train, val, test, _) = make_datasets(&spec, 0.1, run).unwrap();
        let mut cfg = spec.trainer.clone();
        cfg.method = Method::FullPn;
        cfg.r = 0.1;
        cfg.seed = spec.base_seed + run as u64;
        let (_, res) = train_method(&train, &val, &test, &cfg).unwrap();
        accs.push(res.metrics.accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    let pass = (mean - BAYES_REFERENCE).abs() <= 0.02 && secs < 180.0;
    verdict(
        4,
        "reference-accuracy sanity",
        pass,
        &format!("mean {mean:.4} vs {BAYES_REFERENCE:.4} (|diff| {:.4}), {secs:.0}s", (mean - BAYES_REFERENCE).abs()),
    );
    assert!(pass, "mean {mean:.4}, took {secs:.0}s");
}

// ---------------------------------------------------------------------------
// 5. Method ordering on the benchmark table.

#[test]
fn c05_method_ordering_holds_across_label_fractions() {
    let bench = benchmark();
    let t = &bench.table;
    let mut pass = true;
    let mut detail = String::new();
    for row in ["10%", "20%", "30%"] {
        let full = cell_mean(t, row, "Full PN");
        let std = cell_mean(t, row, "Standard PN");
        let small = cell_mean(t, row, "Small PN");
        let pu = cell_mean(t, row, "PU");
        let nnpu = cell_mean(t, row, "nnPU");
        let selfpu = cell_mean(t, row, "Self-PU");
        let links = [
            ("pu<small-2pt", small - pu >= 2.0 * POINT),
            ("small<=std+1pt", small <= std + POINT),
            ("std<=nnpu+1pt", std <= nnpu + POINT),
            ("nnpu<=self+1pt", nnpu <= selfpu + POINT),
            ("self<=full+1pt", selfpu <= full + POINT),
        ];
        let row_pass = links.iter().all(|(_, ok)| *ok);
        pass &= row_pass;
        detail.push_str(&format!(
            "[{row}: full {full:.3} std {std:.3} small {small:.3} pu {pu:.3} nnpu {nnpu:.3} self {selfpu:.3}{}] ",
            links
                .iter()
                .filter(|(_, ok)| !ok)
                .map(|(name, _)| format!(" !{name}"))
                .collect::<String>()
        ));
    }
    pass &= bench.secs < 1200.0;
    detail.push_str(&format!("{:.0}s", bench.secs));
    verdict(5, "method ordering", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// 6. Component ablation ordering and the full-pipeline margin over plain
// risk minimization.

#[test]
fn c06_component_ablation_is_monotone() {
    let (table, _, secs) = ablation();
    let nnpu = cell_mean(table, "nnPU", "Accuracy");
    let hybrid = cell_mean(table, "hybrid", "Accuracy");
    let hybrid_student = cell_mean(table, "hybrid + student", "Accuracy");
    let selfpu = cell_mean(table, "Self-PU", "Accuracy");
    let chain = nnpu <= hybrid + POINT
        && hybrid <= hybrid_student + POINT
        && hybrid_student <= selfpu + POINT;
    let gap = selfpu - nnpu;
    let pass = chain && gap >= 2.0 * POINT && *secs < 900.0;
    let detail = format!(
        "nnpu {nnpu:.4} -> hybrid {hybrid:.4} -> +student {hybrid_student:.4} -> full {selfpu:.4}; gap {gap:+.4} (need >= +0.02), {secs:.0}s"
    );
    verdict(6, "component ablation", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// 7. Trusted-set schedule read back from the ablation run logs.

#[test]
fn c07_trusted_schedule_is_linear_with_rounding() {
    let (_, runs, _) = ablation();
    let spec = ExperimentSpec::default();
    let (train, _, _, _) = make_datasets(&spec, 0.1, 0).unwrap();
    let pool = train.indices_with_mark(PuMark::U).len();
    assert_eq!(pool, 1552);
    let ceiling = (0.2 * pool as f64).round();

    let full_runs: Vec<&RunResult> = runs
        .iter()
        .filter(|r| {
            r.method == Method::SelfPu
                && r.config.selfpu.use_trusted
                && r.config.selfpu.use_student_loss
                && r.config.selfpu.use_teacher
                && r.config.selection.strategy == SelectionStrategy::DynamicLinear
        })
        .collect();
    assert_eq!(full_runs.len(), 5, "one full pipeline run per seed");

    let mut pass = true;
    let mut worst = 0i64;
    for run in &full_runs {
        let sizes = &run.history.trusted_sizes;
        assert_eq!(sizes.len(), 100);
        for (idx, &size) in sizes.iter().enumerate() {
            let epoch = idx + 1;
            let want = if epoch <= 10 {
                0.0
            } else {
                ceiling * (epoch - 10) as f64 / 90.0
            };
            let dev = (size as i64 - want.round() as i64).abs();
            worst = worst.max(dev);
            if epoch <= 10 {
                pass &= size == 0;
            } else {
                pass &= dev <= 1;
            }
        }
        pass &= sizes[9] == 0 && sizes[99] as f64 == ceiling;
    }
    let detail = format!(
        "pool {pool}, ceiling {ceiling}, size[epoch 10] = {}, size[epoch 100] = {}, worst |dev| {worst} over 5 runs",
        full_runs[0].history.trusted_sizes[9], full_runs[0].history.trusted_sizes[99]
    );
    verdict(7, "trusted-set schedule", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// 8. Selection purity with an oracle scorer on separable data.

#[test]
fn c08_oracle_selection_is_pure_every_epoch() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let d = 3;
    let pool_n = 400;
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<i8> = Vec::new();
    for i in 0..pool_n {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let mut x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        x[0] = (1.0 + rng.gen_range(0.0..2.0)) * label as f64;
        pool.push(x);
        labels.push(label);
    }
    // The classes sit on opposite sides of x1 = 0 with a gap of 2.
    assert!(pool
        .iter()
        .zip(&labels)
        .all(|(x, &l)| x[0] * l as f64 >= 1.0));

    let mut oracle = ModelParams::zeros(&[d, 1], Activation::Relu).unwrap();
    oracle.weights[0][0] = 4.0;
    let ranked = rank_by_confidence(&oracle, &pool).unwrap();

    let mut pass = true;
    let mut checked = 0usize;
    for strategy in [
        SelectionStrategy::DynamicLinear,
        SelectionStrategy::WithoutReplacement,
        SelectionStrategy::FixedSize,
    ] {
        let cfg = SelectionConfig { strategy, ..SelectionConfig::default() };
        let mut select_rng = ChaCha8Rng::seed_from_u64(880);
        let mut previous = TrustedSet::default();
        for epoch in 11..=100 {
            let n_per_class = schedule_trust_size(epoch, 100, &cfg, pool_n).unwrap();
            let picked = select_trusted(
                &ranked,
                n_per_class,
                strategy,
                &previous,
                cfg.bootstrap_frac,
                epoch,
                &mut select_rng,
            )
            .unwrap();
            for &i in &picked.pos {
                pass &= labels[i] == 1;
                checked += 1;
            }
            for &i in &picked.neg {
                pass &= labels[i] == -1;
                checked += 1;
            }
            previous = picked;
        }
    }
    let detail = format!("{checked} pseudo-labels across 3 strategies x 90 epochs, all correct: {pass}");
    verdict(8, "oracle selection purity", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// 9. Bitwise determinism of the full benchmark experiment.

#[test]
fn c09_experiment_reruns_bitwise_identical() {
    let bench = benchmark();
    let dir2 = tempfile::tempdir().expect("tempdir");
    let (table2, _) =
        run_benchmark_table(&ExperimentSpec::default(), Some(dir2.path())).expect("rerun");

    let mut values = 0usize;
    let mut pass = true;
    for (row1, row2) in bench.table.cells.iter().zip(&table2.cells) {
        for (c1, c2) in row1.iter().zip(row2) {
            pass &= c1.seeds == c2.seeds;
            pass &= c1.values.len() == c2.values.len();
            for (v1, v2) in c1.values.iter().zip(&c2.values) {
                pass &= v1.to_bits() == v2.to_bits();
                values += 1;
            }
        }
    }

    let report1 = Report { tables: vec![bench.table.clone()] };
    let report2 = Report { tables: vec![table2.clone()] };
    report1.emit(bench.dir.path()).unwrap();
    report2.emit(dir2.path()).unwrap();
    let bytes1 = std::fs::read(bench.dir.path().join("report.json")).unwrap();
    let bytes2 = std::fs::read(dir2.path().join("report.json")).unwrap();
    pass &= bytes1 == bytes2;

    let detail = format!(
        "{values} per-run accuracies bitwise equal: {}, report.json byte-identical: {}",
        values > 0 && pass,
        bytes1 == bytes2
    );
    verdict(9, "bitwise determinism", pass, &detail);
    assert!(pass, "{detail}");
}

// ---------------------------------------------------------------------------
// 10. Report table shapes for the benchmark and both sweeps.

#[test]
fn c10_report_tables_have_published_shapes() {
    let bench = benchmark();
    let t = &bench.table;
    let mut pass = t.cols.len() == 6 && t.rows.len() == 3;

    let md = t.to_markdown();
    let lines: Vec<&str> = md.lines().collect();
    pass &= lines[0].starts_with("## ");
    pass &= lines[2].matches('|').count() == 8; // row label + 6 method columns
    pass &= lines.len() == 7; // title, blank, header, rule, 3 data rows

    let spec = ExperimentSpec::default();
    let (alpha_table, _) = run_alpha_sweep(&spec, None).expect("alpha sweep");
    let (beta_table, _) = run_beta_sweep(&spec, None).expect("beta sweep");
    pass &= alpha_table.rows == vec!["10", "20", "30", "40"];
    pass &= alpha_table.cols.len() == 1;
    pass &= alpha_table.to_markdown().lines().count() == 8;
    pass &= beta_table.rows == vec!["0.3", "0.4", "0.5"];
    pass &= beta_table.cols.len() == 1;
    pass &= beta_table.to_markdown().lines().count() == 7;

    let detail = format!(
        "benchmark {}x{}, gate sweep {} rows, ema sweep {} rows",
        t.rows.len(),
        t.cols.len(),
        alpha_table.rows.len(),
        beta_table.rows.len()
    );
    verdict(10, "report shapes", pass, &detail);
    assert!(pass, "{detail}");
}
