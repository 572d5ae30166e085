//! Command-line front end: argument definitions and the subcommand bodies.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::calibration::{build_store, load_store, save_store, CalibrationParams, CalibrationStore};
use crate::calibration::{DEFAULT_ALPHA, DEFAULT_BINS, DEFAULT_MIN_SAMPLES};
use crate::config::TripartiteConfig;
use crate::engine::TechniqueBank;
use crate::error::{Error, Result};
use crate::evaluation::{calibration_run, compare, pr_curve, score_predictions, EvalContext, GroundTruth, Method};
use crate::fusion::FusionParams;
use crate::io::write_atomic;
use crate::manifest::DatasetManifest;
use crate::report;
use crate::synth::SynthFile;

#[derive(Debug, Parser)]
#[command(name = "switch-fuse", version, about = "Per-query technique switching and similarity fusion for visual place recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate every configured technique on a dataset and save the store.
    Calibrate(CalibrateArgs),
    /// Predict a reference for every query and write the predictions CSV.
    Run(RunArgs),
    /// Score a predictions CSV against ground truth.
    Evaluate(EvaluateArgs),
    /// Run every method family and write the accuracy delta table.
    Compare(CompareArgs),
    /// Generate a seeded synthetic dataset (calibration and evaluation halves).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Tripartite configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Where to write the calibration store.
    #[arg(long)]
    pub out: PathBuf,
    /// Histogram bins per likelihood.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Laplace smoothing pseudo-count.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Fewest calibration queries accepted per technique.
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    pub min_samples: usize,
}

#[derive(Debug, Args)]
pub struct ThresholdArg {
    /// Override the configured acceptance threshold. A technique is accepted
    /// when its posterior is strictly greater than this value.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Calibration store written by `calibrate`.
    #[arg(long)]
    pub store: PathBuf,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// switch-fuse, switch-only, fuse-all or single:<technique>.
    #[arg(long, default_value = "switch-fuse")]
    pub method: Method,
    #[command(flatten)]
    pub threshold: ThresholdArg,
    /// Omit the `# generated` line.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions CSV written by `run`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth CSV (`query,references`).
    #[arg(long, conflicts_with_all = ["manifest", "config"])]
    pub ground_truth: Option<PathBuf>,
    /// Take ground truth from this manifest instead (needs `--config`).
    #[arg(long, requires = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    pub config: Option<PathBuf>,
    /// Output directory for outcomes.csv, pr.csv and summary.toml.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write pr.svg.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[arg(long)]
    pub store: PathBuf,
    /// Comparison CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub threshold: ThresholdArg,
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn timestamp(suppress: bool) -> Option<u64> {
    if suppress {
        None
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    }
}

fn load_dataset(args: &DatasetArgs, threshold: Option<f64>) -> Result<(TripartiteConfig, TechniqueBank, GroundTruth)> {
    let mut config = TripartiteConfig::load(&args.config)?;
    if let Some(t) = threshold {
        config = config.with_threshold(t)?;
    }
    let manifest = DatasetManifest::load(&args.manifest)?;
    let (bank, gt) = manifest.bind(&config)?;
    Ok((config, bank, gt))
}

fn load_checked_store(path: &Path, config: &TripartiteConfig) -> Result<CalibrationStore> {
    let store = load_store(path)?;
    store.check_complete(config)?;
    Ok(store)
}

pub fn calibrate(args: &CalibrateArgs, out: &mut dyn Write) -> Result<()> {
    let params = CalibrationParams {
        bins: args.bins,
        alpha: args.alpha,
        min_samples: args.min_samples,
    };
    let (config, bank, gt) = load_dataset(&args.dataset, None)?;
    let run = calibration_run(&bank, &config.techniques(), &gt)?;
    let store = build_store(&run, &config, &params)?;
    save_store(&store, &args.out)?;
    for t in config.techniques() {
        let c = store.technique(&t)?;
        writeln!(out, "prior {t} = {} ({} samples)", c.prior_match, c.sample_count)?;
    }
    Ok(())
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let (config, bank, _) = load_dataset(&args.dataset, args.threshold.threshold)?;
    let store = load_checked_store(&args.store, &config)?;
    let ctx = EvalContext {
        source: &bank,
        config: &config,
        store: Some(&store),
        fusion: FusionParams::default(),
    };
    let predictions = ctx.predict_all(&args.method)?;
    let csv = report::predictions_csv(&args.method.to_string(), &predictions, timestamp(args.no_timestamp))?;
    write_atomic(&args.out, csv.as_bytes())?;
    writeln!(out, "{} predictions ({}) written to {}", predictions.len(), args.method, args.out.display())?;
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let (method, predictions) = report::parse_predictions_csv(&crate::io::read_to_string(&args.predictions)?)?;
    let gt = match (&args.ground_truth, &args.manifest, &args.config) {
        (Some(path), _, _) => GroundTruth::load_csv(path, usize::MAX)?,
        (None, Some(manifest), Some(config)) => {
            let config = TripartiteConfig::load(config)?;
            DatasetManifest::load(manifest)?.bind(&config)?.1
        }
        _ => return Err(Error::invalid("evaluate needs --ground-truth or --manifest with --config")),
    };
    if predictions.len() != gt.query_count() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground-truth queries",
            predictions.len(),
            gt.query_count()
        )));
    }
    let mut report = score_predictions(&method, predictions, &gt)?;
    report.pr_points = pr_curve(&report.outcomes);

    std::fs::create_dir_all(&args.out)?;
    let ts = timestamp(args.no_timestamp);
    write_atomic(&args.out.join("outcomes.csv"), report::outcomes_csv(&report, ts)?.as_bytes())?;
    write_atomic(&args.out.join("pr.csv"), report::pr_csv(&report.pr_points, ts)?.as_bytes())?;
    write_atomic(&args.out.join("summary.toml"), report::summary_toml(&report).as_bytes())?;
    if args.svg {
        write_atomic(&args.out.join("pr.svg"), report::pr_svg(&method, &report.pr_points).as_bytes())?;
    }
    writeln!(
        out,
        "{method}: accuracy {} ({}/{})",
        report.accuracy, report.correct_count, report.query_count
    )?;
    Ok(())
}

pub fn compare_cmd(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let (config, bank, gt) = load_dataset(&args.dataset, args.threshold.threshold)?;
    let store = load_checked_store(&args.store, &config)?;
    let ctx = EvalContext {
        source: &bank,
        config: &config,
        store: Some(&store),
        fusion: FusionParams::default(),
    };
    let reports = Method::all_for(&config)
        .iter()
        .map(|m| ctx.run_method(m, &gt))
        .collect::<Result<Vec<_>>>()?;
    let table = compare(&reports)?;
    write_atomic(&args.out, report::comparison_csv(&table, timestamp(args.no_timestamp))?.as_bytes())?;
    for row in &table.rows {
        writeln!(out, "{:<24} {:.4} ({:+.4})", row.method, row.accuracy, row.accuracy_delta)?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let files = SynthFile::load(&args.spec)?.export(args.seed, &args.out)?;
    writeln!(out, "config: {}", files.config.display())?;
    writeln!(out, "calibration: {}", files.calibration_manifest.display())?;
    writeln!(out, "evaluation: {}", files.evaluation_manifest.display())?;
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Calibrate(a) => calibrate(a, out),
        Command::Run(a) => run(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Compare(a) => compare_cmd(a, out),
        Command::Synth(a) => synth(a, out),
    }
}
