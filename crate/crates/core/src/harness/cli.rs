use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::{
    emit_reports, prepare_splits, run_experiment, simulate_datasets, split_seed, ExperimentConfig,
};
use crate::data::make_splits;
use crate::error::{Result, SurvError};
use crate::metrics::evaluate;
use crate::numeric::{derive_seed, fmt_f64};
use crate::riskmodel::{fit_with_monitor, ModelFamily, RiskModel, TrainConfig, TrainedModel};
use crate::survpredict::{breslow_baseline, curves_to_csv, predict_risk, survival_curve};
use crate::survsim::{read_records, SurvivalData};

#[derive(Debug, Parser)]
#[command(
    name = "survkit",
    version,
    about = "Simulate survival data, fit Cox-style risk models and evaluate them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file of key=value lines, or `defaults`
    #[arg(long, global = true)]
    config: Option<String>,

    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Number of simulated datasets
    #[arg(long, global = true)]
    datasets: Option<usize>,

    /// Training replicates per model family
    #[arg(long, global = true)]
    replicates: Option<usize>,

    /// Model family (`linear` or `network`); repeat for several
    #[arg(long, global = true)]
    family: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write simulated datasets and their baselines
    Simulate,
    /// Train one model family on one dataset file
    Fit {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Evaluate a saved model on the test split of a dataset file
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run the full experiment grid and write reports
    Report,
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns 0 on success, 1 on a validation or runtime failure, 2 on a usage error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("survkit: {err}");
            1
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match cli.config.as_deref() {
        None | Some("defaults") => ExperimentConfig::default(),
        Some(path) => ExperimentConfig::load(Path::new(path))?,
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(n) = cli.datasets {
        cfg.n_datasets = n;
    }
    if let Some(r) = cli.replicates {
        cfg.replicates = r;
    }
    if !cli.family.is_empty() {
        cfg.families = cli
            .family
            .iter()
            .map(|f| ModelFamily::parse(f))
            .collect::<Result<Vec<_>>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| SurvError::io(&path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SurvError::io(dir, e))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Fit { dataset } => fit_one(&cfg, dataset),
        Command::Evaluate { model, dataset } => evaluate_one(&cfg, model, dataset),
        Command::Report => {
            let report = run_experiment(&cfg)?;
            emit_reports(&report, &cfg.output_dir)?;
            let failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
            eprintln!(
                "survkit: {} cells ({} failed) written to {}",
                report.cells.len(),
                failed,
                cfg.output_dir.display()
            );
            Ok(())
        }
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    create_dir(&cfg.output_dir)?;
    let (datasets, splits) = simulate_datasets(cfg)?;
    for (i, ds) in datasets.iter().enumerate() {
        write(
            cfg.output_dir.join(format!("dataset_{:02}.csv", i + 1)),
            &ds.to_csv(),
        )?;
        write(
            cfg.output_dir.join(format!("baseline_{:02}.csv", i + 1)),
            &ds.baseline.to_csv(),
        )?;
    }
    let mut text = String::from("row,split\n");
    for (i, l) in splits.labels.iter().enumerate() {
        let _ = writeln!(text, "{i},{}", l.as_str());
    }
    write(cfg.output_dir.join("splits.csv"), &text)
}

/// Reads a dataset file and splits it with the run's split seed.
fn load_prepared(cfg: &ExperimentConfig, path: &Path) -> Result<super::PreparedSplits> {
    let (records, names) = read_records(path)?;
    let data = SurvivalData::from_records(&records, &names)?;
    let splits = make_splits(
        data.len(),
        cfg.split_proportions,
        split_seed(cfg.master_seed),
    )?;
    prepare_splits(&data, &splits)
}

fn fit_one(cfg: &ExperimentConfig, dataset: &Path) -> Result<()> {
    let family = match cfg.families.as_slice() {
        [one] => *one,
        _ => {
            return Err(SurvError::Parameter(
                "fit needs exactly one --family".into(),
            ))
        }
    };
    let prepared = load_prepared(cfg, dataset)?;
    let seed = derive_seed(&[cfg.master_seed, 5, super::family_code(family)]);
    let model = RiskModel::init(
        family,
        prepared.train.covariates.n_cols(),
        derive_seed(&[seed, 0]),
    )?;
    let train = TrainConfig {
        seed: derive_seed(&[seed, 1]),
        ..cfg.train
    };
    let trained = fit_with_monitor(model, &prepared.train, &prepared.validation, &train, |_| {
        Ok(None)
    })?;
    create_dir(&cfg.output_dir)?;
    write(cfg.output_dir.join("model.json"), &trained.to_json()?)?;
    write(cfg.output_dir.join("history.csv"), &trained.history_csv())
}

fn evaluate_one(cfg: &ExperimentConfig, model_path: &Path, dataset: &Path) -> Result<()> {
    let text = std::fs::read_to_string(model_path).map_err(|e| SurvError::io(model_path, e))?;
    let trained = TrainedModel::from_json(&text)?;
    let prepared = load_prepared(cfg, dataset)?;
    let g_train = predict_risk(&trained, &prepared.raw_train.covariates)?;
    let baseline = breslow_baseline(
        &prepared.raw_train.times,
        &prepared.raw_train.events,
        &g_train,
    )?;
    let test = &prepared.raw_test;
    let g_test = predict_risk(&trained, &test.covariates)?;
    let curves = g_test
        .iter()
        .map(|&g| survival_curve(&baseline, g))
        .collect::<Result<Vec<_>>>()?;
    let metrics = evaluate(&test.times, &test.events, &g_test, &curves)?;

    create_dir(&cfg.output_dir)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "c_index={}", fmt_f64(metrics.c_index));
    let _ = writeln!(summary, "ibs={}", fmt_f64(metrics.ibs));
    let _ = writeln!(summary, "n_comparable_pairs={}", metrics.n_comparable_pairs);
    let _ = writeln!(summary, "n_test={}", test.len());
    write(cfg.output_dir.join("evaluation.txt"), &summary)?;
    let mut brier = String::from("time,brier\n");
    for (t, b) in &metrics.brier {
        let _ = writeln!(brier, "{t},{}", fmt_f64(*b));
    }
    write(cfg.output_dir.join("brier.csv"), &brier)?;
    write(cfg.output_dir.join("curves.csv"), &curves_to_csv(&curves))
}
