//! Experiment grid: simulated datasets × model families × replicate seeds.
//!
//! Every dataset and every cell draws from its own seed stream derived from
//! the master seed and the cell coordinates, so cells can run in any order
//! (or in parallel) and adding a family leaves existing cells untouched.

mod cli;
mod config;
mod report;

pub use cli::cli_main;
pub use config::ExperimentConfig;
pub use report::{emit_reports, FamilyAggregate};

use rayon::prelude::*;

use crate::data::{make_splits, synthesize_ef, CovariateTable, Split, SplitAssignment};
use crate::error::Result;
use crate::metrics::{
    concordance_index, evaluate, ibs_grid, integrated_brier, kaplan_meier, MetricsReport,
};
use crate::numeric::{derive_seed, pearson};
use crate::riskmodel::{
    fit_cox_newton, fit_with_monitor, EpochRecord, ModelFamily, RiskModel, TrainConfig,
    TrainedModel,
};
use crate::survpredict::{breslow_baseline, survival_curve, SurvivalCurve};
use crate::survsim::{
    individual_survivor, partial_loglik_from_risk, simulate_dataset, SimulatedDataset, SurvivalData,
};

const STREAM_COVARIATES: u64 = 1;
const STREAM_SPLITS: u64 = 2;
const STREAM_DATASET: u64 = 3;
const STREAM_CELL: u64 = 4;

fn family_code(family: ModelFamily) -> u64 {
    match family {
        ModelFamily::Linear => 1,
        ModelFamily::Network => 2,
    }
}

pub fn covariate_seed(master_seed: u64) -> u64 {
    derive_seed(&[master_seed, STREAM_COVARIATES])
}

pub fn split_seed(master_seed: u64) -> u64 {
    derive_seed(&[master_seed, STREAM_SPLITS])
}

/// Seed of dataset `index` (1-based).
pub fn dataset_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(&[master_seed, STREAM_DATASET, index as u64])
}

pub fn cell_seed(master_seed: u64, dataset: usize, family: ModelFamily, replicate: usize) -> u64 {
    derive_seed(&[
        master_seed,
        STREAM_CELL,
        dataset as u64,
        family_code(family),
        replicate as u64,
    ])
}

/// Shared covariates and split assignment for every dataset of a run.
pub fn cohort(config: &ExperimentConfig) -> Result<(CovariateTable, SplitAssignment)> {
    let ef = synthesize_ef(
        config.n_subjects,
        config.ef_mean,
        config.ef_sd,
        config.ef_lo,
        config.ef_hi,
        covariate_seed(config.master_seed),
    )?;
    let splits = make_splits(
        config.n_subjects,
        config.split_proportions,
        split_seed(config.master_seed),
    )?;
    Ok((ef, splits))
}

pub fn simulate_datasets(
    config: &ExperimentConfig,
) -> Result<(Vec<SimulatedDataset>, SplitAssignment)> {
    let (ef, splits) = cohort(config)?;
    let datasets = (1..=config.n_datasets)
        .into_par_iter()
        .map(|d| {
            simulate_dataset(
                &config.simulation(),
                &ef,
                &[config.beta_true],
                dataset_seed(config.master_seed, d),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((datasets, splits))
}

/// Raw and standardized splits of one dataset.
#[derive(Debug, Clone)]
pub struct PreparedSplits {
    pub raw_train: SurvivalData,
    pub raw_test: SurvivalData,
    pub train: SurvivalData,
    pub validation: SurvivalData,
    pub test: SurvivalData,
}

pub fn prepare_splits(data: &SurvivalData, splits: &SplitAssignment) -> Result<PreparedSplits> {
    let raw_train = data.select(&splits.indices(Split::Train));
    let raw_val = data.select(&splits.indices(Split::Validation));
    let raw_test = data.select(&splits.indices(Split::Test));
    let std_train = raw_train.covariates.standardize()?;
    let scales = std_train
        .standardization()
        .expect("standardize records scales")
        .to_vec();
    Ok(PreparedSplits {
        train: raw_train.with_covariates(std_train)?,
        validation: raw_val.with_covariates(raw_val.covariates.apply_standardization(&scales)?)?,
        test: raw_test.with_covariates(raw_test.covariates.apply_standardization(&scales)?)?,
        raw_train,
        raw_test,
    })
}

/// Per-dataset reference quantities on the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub index: usize,
    pub seed: u64,
    pub n_subjects: usize,
    pub flagged_censored: usize,
    pub flagged_fraction: f64,
    pub administrative_censored: usize,
    pub overall_censored_fraction: f64,
    pub n_test_events: usize,
    /// C-index of the true linear predictor.
    pub oracle_c_index: f64,
    /// IBS of each subject's true survivor function.
    pub oracle_ibs: f64,
    /// IBS of the covariate-free training-split Kaplan–Meier curve.
    pub km_ibs: f64,
    /// Standard Cox fit on raw EF (training split).
    pub baseline_cox_beta: f64,
    pub baseline_cox_c_index: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub dataset: usize,
    pub family: ModelFamily,
    pub replicate: usize,
    pub outcome: std::result::Result<CellMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub metrics: MetricsReport,
    pub best_epoch: usize,
    /// Linear family only, on the raw covariate scale.
    pub beta_hat: Option<Vec<f64>>,
    pub history: Vec<EpochRecord>,
    /// `(true, predicted)` per-event partial log-likelihoods on the test split.
    pub scatter: Vec<(f64, f64)>,
    pub ll_correlation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub datasets: Vec<DatasetSummary>,
    pub cells: Vec<CellResult>,
}

impl RunReport {
    pub fn successful(
        &self,
        family: ModelFamily,
    ) -> impl Iterator<Item = (&CellResult, &CellMetrics)> {
        self.cells
            .iter()
            .filter(move |c| c.family == family)
            .filter_map(|c| c.outcome.as_ref().ok().map(|m| (c, m)))
    }
}

fn curves_for(
    baseline: &crate::survpredict::BaselineHazard,
    g: &[f64],
) -> Result<Vec<SurvivalCurve>> {
    g.iter().map(|&gx| survival_curve(baseline, gx)).collect()
}

fn summarize_dataset(
    index: usize,
    ds: &SimulatedDataset,
    prepared: &PreparedSplits,
) -> Result<DatasetSummary> {
    let test = &prepared.raw_test;
    let true_risk: Vec<f64> = test
        .covariates
        .values()
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(&ds.beta).map(|(x, b)| x * b).sum())
        .collect();
    let oracle_c_index = concordance_index(&test.times, &test.events, &true_risk)?;

    let grid = ibs_grid(&test.times, &test.events);
    let oracle_curves: Vec<SurvivalCurve> = true_risk
        .iter()
        .map(|&lp| {
            let mut probs = vec![1.0];
            probs.extend(individual_survivor(&ds.baseline, lp));
            SurvivalCurve {
                times: (0..=ds.baseline.t_max()).collect(),
                probs,
            }
        })
        .collect();
    let oracle_ibs = integrated_brier(&test.times, &test.events, &oracle_curves, &grid)?;

    let km =
        kaplan_meier(&prepared.raw_train.times, &prepared.raw_train.events).to_survival_curve();
    let km_ibs = integrated_brier(&test.times, &test.events, &vec![km; test.len()], &grid)?;

    let cox = fit_cox_newton(&prepared.raw_train, 50, 1e-12)?;
    let cox_risk = RiskModel::Linear(cox.clone()).forward(test.covariates.values().view())?;
    let baseline_cox_c_index = concordance_index(&test.times, &test.events, &cox_risk)?;

    Ok(DatasetSummary {
        index,
        seed: ds.seed,
        n_subjects: ds.records.len(),
        flagged_censored: ds.flagged.len(),
        flagged_fraction: ds.flagged_fraction(),
        administrative_censored: ds.administratively_censored(),
        overall_censored_fraction: ds.censored_fraction(),
        n_test_events: test.n_events(),
        oracle_c_index,
        oracle_ibs,
        km_ibs,
        baseline_cox_beta: cox.beta_hat[0],
        baseline_cox_c_index,
    })
}

/// Trains one model and evaluates it on the test split.
pub fn run_cell(
    prepared: &PreparedSplits,
    beta_true: &[f64],
    family: ModelFamily,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<CellMetrics> {
    let n_inputs = prepared.train.covariates.n_cols();
    let model = RiskModel::init(family, n_inputs, derive_seed(&[seed, 0]))?;
    let config = TrainConfig {
        seed: derive_seed(&[seed, 1]),
        ..*train_config
    };
    let val = &prepared.validation;
    let val_grid = ibs_grid(&val.times, &val.events);
    let train_x = prepared.train.covariates.values();
    let trained: TrainedModel = fit_with_monitor(model, &prepared.train, val, &config, |m| {
        if val_grid.len() < 2 {
            return Ok(None);
        }
        let baseline = breslow_baseline(
            &prepared.train.times,
            &prepared.train.events,
            &m.forward(train_x.view())?,
        )?;
        let curves = curves_for(&baseline, &m.forward(val.covariates.values().view())?)?;
        integrated_brier(&val.times, &val.events, &curves, &val_grid).map(Some)
    })?;

    let g_train = trained.model.forward(train_x.view())?;
    let baseline = breslow_baseline(&prepared.train.times, &prepared.train.events, &g_train)?;
    let test = &prepared.test;
    let g_test = trained.model.forward(test.covariates.values().view())?;
    let curves = curves_for(&baseline, &g_test)?;
    let metrics = evaluate(&test.times, &test.events, &g_test, &curves)?;

    let centre = g_test.iter().sum::<f64>() / g_test.len() as f64;
    let centred: Vec<f64> = g_test.iter().map(|g| g - centre).collect();
    let predicted = partial_loglik_from_risk(&test.times, &test.events, &centred);
    let true_lp: Vec<f64> = prepared
        .raw_test
        .covariates
        .values()
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(beta_true).map(|(x, b)| x * b).sum())
        .collect();
    let truth = partial_loglik_from_risk(&test.times, &test.events, &true_lp);
    let ll_correlation = pearson(&truth, &predicted);

    let beta_hat = match (&trained.model, &trained.standardization) {
        (RiskModel::Linear(lin), Some(scales)) => Some(
            lin.beta_hat
                .iter()
                .zip(scales)
                .map(|(b, s)| b / s.sd)
                .collect(),
        ),
        (RiskModel::Linear(lin), None) => Some(lin.beta_hat.clone()),
        _ => None,
    };

    Ok(CellMetrics {
        metrics,
        best_epoch: trained.best_epoch,
        beta_hat,
        history: trained.history,
        scatter: truth.into_iter().zip(predicted).collect(),
        ll_correlation,
    })
}

/// Runs the whole grid. Stage errors inside a cell are recorded on that cell;
/// errors building the shared cohort or a dataset abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let (datasets, splits) = simulate_datasets(config)?;
    let prepared: Vec<(SimulatedDataset, PreparedSplits)> = datasets
        .into_iter()
        .map(|ds| {
            let data = SurvivalData::from_records(&ds.records, &ds.column_names)?;
            let p = prepare_splits(&data, &splits)?;
            Ok((ds, p))
        })
        .collect::<Result<_>>()?;
    let summaries = prepared
        .par_iter()
        .enumerate()
        .map(|(i, (ds, p))| summarize_dataset(i + 1, ds, p))
        .collect::<Result<Vec<_>>>()?;

    let coords: Vec<(usize, ModelFamily, usize)> = (1..=config.n_datasets)
        .flat_map(|d| {
            config
                .families
                .iter()
                .flat_map(move |&f| (1..=config.replicates).map(move |r| (d, f, r)))
        })
        .collect();
    let cells = coords
        .into_par_iter()
        .map(|(d, family, replicate)| {
            let (ds, p) = &prepared[d - 1];
            let seed = cell_seed(config.master_seed, d, family, replicate);
            let outcome =
                run_cell(p, &ds.beta, family, &config.train, seed).map_err(|e| e.to_string());
            if let Err(msg) = &outcome {
                log::warn!(
                    "cell (dataset {d}, {}, replicate {replicate}) failed: {msg}",
                    family.as_str()
                );
            }
            CellResult {
                dataset: d,
                family,
                replicate,
                outcome,
            }
        })
        .collect();

    Ok(RunReport {
        config: config.clone(),
        datasets: summaries,
        cells,
    })
}

/// IBS of a survival-curve predictor on arbitrary data, using that data's own grid.
pub fn ibs_on(data: &SurvivalData, curves: &[SurvivalCurve]) -> Result<f64> {
    integrated_brier(
        &data.times,
        &data.events,
        curves,
        &ibs_grid(&data.times, &data.events),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n_subjects: 900,
            n_datasets: 2,
            replicates: 2,
            master_seed: 3,
            train: TrainConfig {
                epochs: 3,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_row_count() {
        let report = run_experiment(&small_config()).unwrap();
        assert_eq!(report.cells.len(), 2 * 2 * 2);
        assert_eq!(report.datasets.len(), 2);
        assert!(report.cells.iter().all(|c| c.outcome.is_ok()));
    }

    #[test]
    fn adding_a_family_keeps_existing_cells() {
        let mut only_linear = small_config();
        only_linear.families = vec![ModelFamily::Linear];
        let a = run_experiment(&only_linear).unwrap();
        let b = run_experiment(&small_config()).unwrap();
        let b_linear: Vec<&CellResult> = b
            .cells
            .iter()
            .filter(|c| c.family == ModelFamily::Linear)
            .collect();
        assert_eq!(a.cells.iter().collect::<Vec<_>>(), b_linear);
    }

    #[test]
    fn minimal_run_has_one_row() {
        let cfg = ExperimentConfig {
            n_datasets: 1,
            replicates: 1,
            families: vec![ModelFamily::Linear],
            ..small_config()
        };
        assert_eq!(run_experiment(&cfg).unwrap().cells.len(), 1);
    }

    #[test]
    fn seed_streams_are_distinct() {
        let a = cell_seed(1, 1, ModelFamily::Linear, 1);
        assert_ne!(a, cell_seed(1, 1, ModelFamily::Network, 1));
        assert_ne!(a, cell_seed(1, 2, ModelFamily::Linear, 1));
        assert_ne!(a, cell_seed(1, 1, ModelFamily::Linear, 2));
        assert_ne!(dataset_seed(1, 1), dataset_seed(2, 1));
    }
}
