//! Multi-run experiments: paired benchmark datasets, parallel training
//! across methods/settings/seeds, aggregation into report tables, and the
//! ablation sweeps.

mod config;
mod report;

pub use config::{apply_config, parse_config, ConfigMap};
pub use report::{CellStats, Report, ReportFormat, ReportTable};

use crate::data::{gen_two_gaussians, load_dataset, make_pu, split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::selection::SelectionStrategy;
use crate::trainers::{
    train_method, DatasetDesc, LabeledSet, Method, RunResult, SelfPuOptions, TrainerConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const BENCHMARK_TITLE: &str = "Accuracy by labeled-positive fraction";
pub const COMPONENT_TITLE: &str = "Component ablation";
pub const ALPHA_TITLE: &str = "Gate threshold sweep";
pub const BETA_TITLE: &str = "Teacher EMA sweep";

/// Everything one experiment command needs: the synthetic benchmark, the
/// split, which methods and labeled fractions to cover, the trainer
/// template, and how many seeds to repeat over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub dim: usize,
    pub pi_p: f64,
    pub mu_sep: f64,
    /// When set, runs draw from this saved dataset instead of the
    /// generator; `n`/`dim`/`pi_p`/`mu_sep` are then ignored.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data_path: Option<PathBuf>,
    pub split: SplitSpec,
    pub methods: Vec<Method>,
    pub r_values: Vec<f64>,
    /// Per-run template; `method`, `r`, and `seed` are overridden per job.
    pub trainer: TrainerConfig,
    pub n_runs: usize,
    pub base_seed: u64,
    /// Gate thresholds covered by the alpha sweep.
    pub alphas: Vec<f64>,
    /// EMA coefficients covered by the beta sweep.
    pub betas: Vec<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            n: 4000,
            dim: 10,
            pi_p: 0.3,
            mu_sep: 2.8,
            data_path: None,
            split: SplitSpec::default(),
            methods: Method::ALL.to_vec(),
            r_values: vec![0.1, 0.2, 0.3],
            trainer: TrainerConfig::default(),
            n_runs: 5,
            base_seed: 2024,
            alphas: vec![10.0, 20.0, 30.0, 40.0],
            betas: vec![0.3, 0.4, 0.5],
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("experiment needs at least one method"));
        }
        if self.r_values.is_empty() || self.alphas.is_empty() || self.betas.is_empty() {
            return Err(Error::config("experiment sweep lists cannot be empty"));
        }
        if self.r_values.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::config("every r must be in (0, 1]"));
        }
        if self.n_runs == 0 {
            return Err(Error::config("n_runs must be at least 1"));
        }
        self.split.validate()
    }

    fn run_seed(&self, run_idx: usize) -> u64 {
        self.base_seed + run_idx as u64
    }
}

/// Builds the benchmark triple for one `(r, run)` pair: generate (or load),
/// split, then mark positives. Fully determined by the spec and the run
/// index, so every method inside one run trains on an identical dataset.
/// Also returns the provenance record echoed into run files.
pub fn make_datasets(
    spec: &ExperimentSpec,
    r: f64,
    run_idx: usize,
) -> Result<(Dataset, LabeledSet, LabeledSet, DatasetDesc)> {
    let seed = spec.run_seed(run_idx);
    let (full, source, mu_sep) = match &spec.data_path {
        Some(path) => (
            load_dataset(path)?,
            format!("file:{}", path.display()),
            0.0,
        ),
        None => (
            gen_two_gaussians(spec.n, spec.pi_p, spec.mu_sep, spec.dim, seed)?,
            "two_gaussians".to_string(),
            spec.mu_sep,
        ),
    };
    let desc = DatasetDesc {
        source,
        n: full.samples.len(),
        dim: full.dim,
        pi_p: full.pi_p,
        mu_sep,
        seed,
    };
    let (train, val, test) = split(&full, &spec.split, seed)?;
    let train_pu = make_pu(&train, r, seed)?;
    Ok((
        train_pu,
        LabeledSet::from_dataset(&val),
        LabeledSet::from_dataset(&test),
        desc,
    ))
}

#[derive(Debug, Clone)]
struct Job {
    row: String,
    col: String,
    file_stem: String,
    cfg: TrainerConfig,
    r: f64,
    run_idx: usize,
}

fn r_row_name(r: f64) -> String {
    format!("{}%", (r * 100.0).round() as i64)
}

/// Trains every job in parallel. Successful runs are persisted under
/// `<out>/runs/<stem>.json` even when a sibling job fails; the first
/// failure is then reported with its job context.
fn run_jobs(
    spec: &ExperimentSpec,
    jobs: Vec<Job>,
    out_dir: Option<&Path>,
) -> Result<Vec<(Job, RunResult)>> {
    let outputs: Vec<(Job, Result<RunResult>)> = jobs
        .into_par_iter()
        .map(|job| {
            let res =
                make_datasets(spec, job.r, job.run_idx).and_then(|(train, val, test, desc)| {
                    train_method(&train, &val, &test, &job.cfg).map(|(_, mut result)| {
                        result.dataset = Some(desc);
                        result
                    })
                });
            (job, res)
        })
        .collect();

    if let Some(dir) = out_dir {
        let runs_dir = dir.join("runs");
        fs::create_dir_all(&runs_dir)?;
        for (job, res) in &outputs {
            if let Ok(result) = res {
                let json = serde_json::to_string_pretty(result)?;
                fs::write(runs_dir.join(format!("{}.json", job.file_stem)), json + "\n")?;
            }
        }
    }

    let mut results = Vec::with_capacity(outputs.len());
    for (job, res) in outputs {
        match res {
            Ok(r) => results.push((job, r)),
            Err(e) => {
                return Err(Error::Run(format!(
                    "run `{}` (row {}, r={}, seed={}) failed: {e}",
                    job.file_stem, job.row, job.r, job.cfg.seed
                )))
            }
        }
    }
    Ok(results)
}

fn aggregate(
    title: &str,
    row_label: &str,
    rows: &[String],
    cols: &[String],
    results: &[(Job, RunResult)],
) -> Result<ReportTable> {
    let mut cells = Vec::with_capacity(rows.len());
    for row in rows {
        let mut line = Vec::with_capacity(cols.len());
        for col in cols {
            let pairs: Vec<(u64, f64)> = results
                .iter()
                .filter(|(j, _)| &j.row == row && &j.col == col)
                .map(|(_, r)| (r.seed, r.metrics.accuracy))
                .collect();
            line.push(CellStats::from_runs(&pairs)?);
        }
        cells.push(line);
    }
    ReportTable::new(title, row_label, rows.to_vec(), cols.to_vec(), cells)
}

/// The main benchmark: every method at every labeled fraction, `n_runs`
/// seeds each, aggregated into one methods-by-r accuracy table.
pub fn run_benchmark_table(
    spec: &ExperimentSpec,
    out_dir: Option<&Path>,
) -> Result<(ReportTable, Vec<RunResult>)> {
    spec.validate()?;
    let rows: Vec<String> = spec.r_values.iter().map(|&r| r_row_name(r)).collect();
    let cols: Vec<String> = spec
        .methods
        .iter()
        .map(|m| m.display_name().to_string())
        .collect();
    let mut jobs = Vec::new();
    for &r in &spec.r_values {
        for &method in &spec.methods {
            for i in 0..spec.n_runs {
                let mut cfg = spec.trainer.clone();
                cfg.method = method;
                cfg.r = r;
                cfg.seed = spec.run_seed(i);
                jobs.push(Job {
                    row: r_row_name(r),
                    col: method.display_name().to_string(),
                    file_stem: format!("{}_{}_{}", method.key(), r, cfg.seed),
                    cfg,
                    r,
                    run_idx: i,
                });
            }
        }
    }
    let results = run_jobs(spec, jobs, out_dir)?;
    let table = aggregate(BENCHMARK_TITLE, "r", &rows, &cols, &results)?;
    Ok((table, results.into_iter().map(|(_, r)| r).collect()))
}

/// The pipeline stripped down piece by piece, all at the first labeled
/// fraction in the spec: plain PU risk, the trusted/hybrid objective under
/// each selection strategy, the added student loss, and the full pipeline.
pub fn run_component_ablation(
    spec: &ExperimentSpec,
    out_dir: Option<&Path>,
) -> Result<(ReportTable, Vec<RunResult>)> {
    spec.validate()?;
    let r = spec.r_values[0];
    let hybrid_only = SelfPuOptions {
        use_trusted: true,
        use_student_loss: false,
        use_teacher: false,
    };
    let variants: Vec<(&str, &str, TrainerConfig)> = {
        let mut base = spec.trainer.clone();
        base.r = r;
        let mut v = Vec::new();
        let mut nnpu = base.clone();
        nnpu.method = Method::Nnpu;
        v.push(("nnPU", "nnpu", nnpu));
        for (name, slug, strategy) in [
            ("hybrid (fixed size)", "hybrid_fixed", SelectionStrategy::FixedSize),
            (
                "hybrid (no replacement)",
                "hybrid_noreplace",
                SelectionStrategy::WithoutReplacement,
            ),
            ("hybrid", "hybrid", SelectionStrategy::DynamicLinear),
        ] {
            let mut cfg = base.clone();
            cfg.method = Method::SelfPu;
            cfg.selfpu = hybrid_only;
            cfg.selection.strategy = strategy;
            v.push((name, slug, cfg));
        }
        let mut with_student = base.clone();
        with_student.method = Method::SelfPu;
        with_student.selfpu = SelfPuOptions {
            use_trusted: true,
            use_student_loss: true,
            use_teacher: false,
        };
        with_student.selection.strategy = SelectionStrategy::DynamicLinear;
        v.push(("hybrid + student", "hybrid_student", with_student));
        let mut full = base.clone();
        full.method = Method::SelfPu;
        full.selfpu = SelfPuOptions::default();
        full.selection.strategy = SelectionStrategy::DynamicLinear;
        v.push(("Self-PU", "self_pu", full));
        v
    };

    let rows: Vec<String> = variants.iter().map(|(name, _, _)| name.to_string()).collect();
    let cols = vec!["Accuracy".to_string()];
    let mut jobs = Vec::new();
    for (name, slug, cfg) in &variants {
        for i in 0..spec.n_runs {
            let mut cfg = cfg.clone();
            cfg.seed = spec.run_seed(i);
            jobs.push(Job {
                row: name.to_string(),
                col: "Accuracy".to_string(),
                file_stem: format!("comp_{slug}_s{}", cfg.seed),
                cfg,
                r,
                run_idx: i,
            });
        }
    }
    let results = run_jobs(spec, jobs, out_dir)?;
    let table = aggregate(COMPONENT_TITLE, "variant", &rows, &cols, &results)?;
    Ok((table, results.into_iter().map(|(_, r)| r).collect()))
}

fn run_value_sweep(
    spec: &ExperimentSpec,
    title: &str,
    row_label: &str,
    values: &[f64],
    patch: impl Fn(&mut TrainerConfig, f64),
    out_dir: Option<&Path>,
) -> Result<(ReportTable, Vec<RunResult>)> {
    spec.validate()?;
    let r = spec.r_values[0];
    let rows: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    let cols = vec!["Self-PU".to_string()];
    let mut jobs = Vec::new();
    for &value in values {
        for i in 0..spec.n_runs {
            let mut cfg = spec.trainer.clone();
            cfg.method = Method::SelfPu;
            cfg.selfpu = SelfPuOptions::default();
            cfg.r = r;
            cfg.seed = spec.run_seed(i);
            patch(&mut cfg, value);
            jobs.push(Job {
                row: format!("{value}"),
                col: "Self-PU".to_string(),
                file_stem: format!("{row_label}{value}_s{}", cfg.seed),
                cfg,
                r,
                run_idx: i,
            });
        }
    }
    let results = run_jobs(spec, jobs, out_dir)?;
    let table = aggregate(title, row_label, &rows, &cols, &results)?;
    Ok((table, results.into_iter().map(|(_, r)| r).collect()))
}

/// Full pipeline at each gate threshold in `spec.alphas`.
pub fn run_alpha_sweep(
    spec: &ExperimentSpec,
    out_dir: Option<&Path>,
) -> Result<(ReportTable, Vec<RunResult>)> {
    run_value_sweep(
        spec,
        ALPHA_TITLE,
        "alpha",
        &spec.alphas.clone(),
        |cfg, v| cfg.alpha = v,
        out_dir,
    )
}

/// Full pipeline at each EMA coefficient in `spec.betas`.
pub fn run_beta_sweep(
    spec: &ExperimentSpec,
    out_dir: Option<&Path>,
) -> Result<(ReportTable, Vec<RunResult>)> {
    run_value_sweep(
        spec,
        BETA_TITLE,
        "beta",
        &spec.betas.clone(),
        |cfg, v| cfg.beta = v,
        out_dir,
    )
}

/// Rebuilds the benchmark table from run files persisted by
/// [`run_benchmark_table`]. Only files named `<method>_<r>_<seed>.json`
/// participate; sweep and ablation files follow other patterns and are
/// skipped.
pub fn rebuild_report_from_runs(out_dir: &Path) -> Result<ReportTable> {
    let runs_dir = out_dir.join("runs");
    let mut results: Vec<RunResult> = Vec::new();
    let entries = fs::read_dir(&runs_dir)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", runs_dir.display())))?;
    let mut names: Vec<String> = Vec::new();
    for entry in entries {
        let name = entry?.file_name().to_string_lossy().into_owned();
        names.push(name);
    }
    names.sort();
    for name in names {
        let Some(stem) = name.strip_suffix(".json") else {
            continue;
        };
        if !benchmark_stem(stem) {
            continue;
        }
        let text = fs::read_to_string(runs_dir.join(&name))?;
        let result: RunResult = serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("{name}: not a run record: {e}")))?;
        results.push(result);
    }
    if results.is_empty() {
        return Err(Error::data(format!(
            "no benchmark run files under {}",
            runs_dir.display()
        )));
    }

    let mut r_values: Vec<f64> = results.iter().map(|r| r.config.r).collect();
    r_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r_values.dedup();
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| results.iter().any(|r| r.method == *m))
        .collect();

    let rows: Vec<String> = r_values.iter().map(|&r| r_row_name(r)).collect();
    let cols: Vec<String> = methods.iter().map(|m| m.display_name().to_string()).collect();
    let mut cells = Vec::new();
    for &r in &r_values {
        let mut line = Vec::new();
        for &m in &methods {
            let pairs: Vec<(u64, f64)> = results
                .iter()
                .filter(|run| run.method == m && run.config.r == r)
                .map(|run| (run.seed, run.metrics.accuracy))
                .collect();
            line.push(CellStats::from_runs(&pairs)?);
        }
        cells.push(line);
    }
    ReportTable::new(BENCHMARK_TITLE, "r", rows, cols, cells)
}

/// True for file stems of the form `<method>_<r>_<seed>`.
fn benchmark_stem(stem: &str) -> bool {
    let Some((rest, seed)) = stem.rsplit_once('_') else {
        return false;
    };
    if seed.is_empty() || !seed.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    let Some((method, r)) = rest.rsplit_once('_') else {
        return false;
    };
    if r.parse::<f64>().is_err() {
        return false;
    }
    Method::from_key(method).is_some()
}
