//! Command-line front end: dataset generation, single training runs, the
//! multi-method benchmark, ablation sweeps, and report rebuilding.

use clap::{Args, Parser, Subcommand};
use puforge::data::{gen_two_gaussians, save_dataset};
use puforge::harness::{
    apply_config, parse_config, run_alpha_sweep, run_benchmark_table, run_component_ablation,
    run_beta_sweep, make_datasets, rebuild_report_from_runs, ExperimentSpec, Report, ReportFormat,
    ReportTable,
};
use puforge::nn::save_model;
use puforge::trainers::train_method;
use puforge::{Error, Result};
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "puforge",
    about = "Train and evaluate positive-unlabeled learners on synthetic benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset and save it under the output directory.
    GenData(CommonArgs),
    /// Train a single method once and persist its run record and models.
    Train(CommonArgs),
    /// Run every configured method at every labeled fraction and report.
    Experiment(CommonArgs),
    /// Sweep the distillation gate threshold over the configured grid.
    AblateAlpha(CommonArgs),
    /// Sweep the teacher EMA coefficient over the configured grid.
    AblateBeta(CommonArgs),
    /// Re-train the pipeline with components disabled one group at a time.
    AblateComponents(CommonArgs),
    /// Rebuild the benchmark report from previously persisted run files.
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Settings file of flat `key = value` lines; `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides both the experiment base seed and the single-run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for datasets, run records, and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write only this report format (csv, json, or md) instead of all.
    #[arg(long)]
    format: Option<String>,
}

fn load_spec(args: &CommonArgs) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        apply_config(parse_config(&text)?, &mut spec)?;
    }
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
        spec.trainer.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

fn formats(args: &CommonArgs) -> Result<Vec<ReportFormat>> {
    match &args.format {
        None => Ok(ReportFormat::ALL.to_vec()),
        Some(name) => ReportFormat::from_name(name)
            .map(|f| vec![f])
            .ok_or_else(|| {
                Error::config(format!("unknown format `{name}` (expected csv, json, or md)"))
            }),
    }
}

/// Writes `<out>/report.*` in the requested formats and prints the
/// markdown rendering.
fn emit(table: ReportTable, args: &CommonArgs) -> Result<()> {
    let report = Report {
        tables: vec![table],
    };
    for format in formats(args)? {
        report.emit_format(&args.out, "report", format)?;
    }
    print!("{}", report.to_markdown());
    Ok(())
}

fn cmd_gen_data(args: &CommonArgs) -> Result<()> {
    let spec = load_spec(args)?;
    let data = gen_two_gaussians(spec.n, spec.pi_p, spec.mu_sep, spec.dim, spec.base_seed)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("dataset.tsv");
    save_dataset(&data, &path)?;
    println!(
        "wrote {} samples (dim {}, pi {}) to {}",
        data.samples.len(),
        data.dim,
        data.pi_p,
        path.display()
    );
    Ok(())
}

fn cmd_train(args: &CommonArgs) -> Result<()> {
    let mut spec = load_spec(args)?;
    let mut cfg = spec.trainer.clone();
    cfg.r = spec.r_values[0];
    // A single run draws its data from its own seed.
    spec.base_seed = cfg.seed;
    let (train, val, test, desc) = make_datasets(&spec, cfg.r, 0)?;
    let (models, mut result) = train_method(&train, &val, &test, &cfg)?;
    result.dataset = Some(desc);

    let runs_dir = args.out.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let stem = format!("{}_{}_{}", cfg.method.key(), cfg.r, cfg.seed);
    let json = serde_json::to_string_pretty(&result)?;
    fs::write(runs_dir.join(format!("{stem}.json")), json + "\n")?;

    let models_dir = args.out.join("models");
    fs::create_dir_all(&models_dir)?;
    for (k, model) in models.iter().enumerate() {
        save_model(model, &models_dir.join(format!("{stem}_{k}.model")))?;
    }
    println!(
        "{}: accuracy {:.4} (best epoch {}), run record runs/{stem}.json, {} model(s)",
        cfg.method.display_name(),
        result.metrics.accuracy,
        result.best_epoch,
        models.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::GenData(args) => cmd_gen_data(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Experiment(args) => {
            let spec = load_spec(args)?;
            let (table, _) = run_benchmark_table(&spec, Some(&args.out))?;
            emit(table, args)
        }
        Cmd::AblateAlpha(args) => {
            let spec = load_spec(args)?;
            let (table, _) = run_alpha_sweep(&spec, Some(&args.out))?;
            emit(table, args)
        }
        Cmd::AblateBeta(args) => {
            let spec = load_spec(args)?;
            let (table, _) = run_beta_sweep(&spec, Some(&args.out))?;
            emit(table, args)
        }
        Cmd::AblateComponents(args) => {
            let spec = load_spec(args)?;
            let (table, _) = run_component_ablation(&spec, Some(&args.out))?;
            emit(table, args)
        }
        Cmd::Report(args) => {
            let table = rebuild_report_from_runs(&args.out)?;
            emit(table, args)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
