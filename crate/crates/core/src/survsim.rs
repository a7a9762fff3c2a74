//! Simulated survival data on a discrete time grid `1..=t_max`.
//!
//! A ground-truth baseline is drawn as a monotone piecewise-linear failure CDF
//! through random knots. Each subject's survivor function is the baseline
//! raised to `exp(x·β)`; event times come from inverting it at a uniform
//! draw. A fixed fraction of subjects is then right-censored at random,
//! independently of the covariates.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::data::CovariateTable;
use crate::error::{Result, SurvError};
use crate::numeric::{derive_seed, fmt_f64, rng_from_seed};
use crate::riskset::log_risk_denominators;

pub const DEFAULT_T_MAX: u32 = 100;
pub const DEFAULT_NUM_KNOTS: usize = 8;
pub const DEFAULT_F_MAX: f64 = 0.95;
pub const DEFAULT_BETA: f64 = 0.035;
pub const DEFAULT_CENSOR_FRACTION: f64 = 0.15;

/// Ground-truth discrete baseline. Index `t - 1` holds the value at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBaseline {
    t_max: u32,
    failure_cdf: Vec<f64>,
    survivor: Vec<f64>,
    hazard: Vec<f64>,
}

impl StepBaseline {
    /// Builds the baseline from `F(1..=t_max)`; `F(0) = 0` is implied.
    pub fn from_cdf(failure_cdf: Vec<f64>) -> Result<Self> {
        if failure_cdf.is_empty() {
            return Err(SurvError::Parameter(
                "baseline needs at least one time step".into(),
            ));
        }
        let mut prev = 0.0;
        for (i, &f) in failure_cdf.iter().enumerate() {
            if !(f >= prev && f <= 1.0) {
                return Err(SurvError::Parameter(format!(
                    "failure CDF must be nondecreasing in [0, 1]; F({}) = {f}",
                    i + 1
                )));
            }
            prev = f;
        }
        let survivor: Vec<f64> = failure_cdf.iter().map(|f| 1.0 - f).collect();
        let mut hazard = Vec::with_capacity(failure_cdf.len());
        let (mut f_prev, mut s_prev) = (0.0, 1.0);
        for (&f, &s) in failure_cdf.iter().zip(&survivor) {
            hazard.push(if s_prev > 0.0 {
                (f - f_prev) / s_prev
            } else {
                0.0
            });
            f_prev = f;
            s_prev = s;
        }
        Ok(Self {
            t_max: failure_cdf.len() as u32,
            failure_cdf,
            survivor,
            hazard,
        })
    }

    /// Piecewise-linear CDF through `(0, 0)`, the given `(time, F)` knots, and `(t_max, f_end)`.
    pub fn from_knots(t_max: u32, knots: &[(f64, f64)], f_end: f64) -> Result<Self> {
        if t_max == 0 {
            return Err(SurvError::Parameter("t_max must be positive".into()));
        }
        let mut points = Vec::with_capacity(knots.len() + 2);
        points.push((0.0, 0.0));
        points.extend_from_slice(knots);
        points.push((t_max as f64, f_end));
        if points
            .windows(2)
            .any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1)
        {
            return Err(SurvError::Parameter(
                "knots must be sorted in time and value".into(),
            ));
        }
        let mut seg = 0;
        let cdf = (1..=t_max)
            .map(|t| {
                let t = t as f64;
                while seg + 2 < points.len() && points[seg + 1].0 < t {
                    seg += 1;
                }
                let (t0, f0) = points[seg];
                let (t1, f1) = points[seg + 1];
                if t1 > t0 {
                    (f0 + (f1 - f0) * (t - t0) / (t1 - t0)).min(f1)
                } else {
                    f1
                }
            })
            .collect();
        Self::from_cdf(cdf)
    }

    pub fn t_max(&self) -> u32 {
        self.t_max
    }

    pub fn failure_cdf(&self) -> &[f64] {
        &self.failure_cdf
    }

    pub fn survivor(&self) -> &[f64] {
        &self.survivor
    }

    pub fn hazard(&self) -> &[f64] {
        &self.hazard
    }

    /// `S0(t)` with `S0(0) = 1` and `S0(t) = S0(t_max)` past the grid.
    pub fn survivor_at(&self, t: u32) -> f64 {
        match t {
            0 => 1.0,
            t => self.survivor[(t.min(self.t_max) - 1) as usize],
        }
    }

    /// Delimited text with columns `t,F,S,h`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,F,S,h\n");
        for i in 0..self.failure_cdf.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                fmt_f64(self.failure_cdf[i]),
                fmt_f64(self.survivor[i]),
                fmt_f64(self.hazard[i])
            );
        }
        out
    }
}

/// Draws a random baseline: `num_knots` sorted uniform knot times in `[1, t_max]`
/// paired with sorted uniform failure probabilities in `[0, f_max]`, anchored at
/// `F(0) = 0` and `F(t_max) = f_max`.
pub fn generate_baseline(
    t_max: u32,
    num_knots: usize,
    f_max: f64,
    seed: u64,
) -> Result<StepBaseline> {
    if !(f_max > 0.0 && f_max <= 1.0) {
        return Err(SurvError::Parameter(format!(
            "f_max must lie in (0, 1], got {f_max}"
        )));
    }
    if num_knots < 2 {
        return Err(SurvError::Parameter("num_knots must be at least 2".into()));
    }
    if (t_max as usize) < num_knots {
        return Err(SurvError::Parameter(format!(
            "t_max ({t_max}) must be at least num_knots ({num_knots})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut times: Vec<f64> = (0..num_knots)
        .map(|_| rng.random_range(1.0..=t_max as f64))
        .collect();
    let mut probs: Vec<f64> = (0..num_knots)
        .map(|_| rng.random_range(0.0..=f_max))
        .collect();
    times.sort_by(f64::total_cmp);
    probs.sort_by(f64::total_cmp);
    let knots: Vec<(f64, f64)> = times.into_iter().zip(probs).collect();
    StepBaseline::from_knots(t_max, &knots, f_max)
}

/// One observation on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub time: u32,
    pub event: bool,
    pub covariates: Vec<f64>,
}

/// `S_i(t) = S0(t)^{exp(lp)}` on `1..=t_max`.
pub fn individual_survivor(baseline: &StepBaseline, linear_predictor: f64) -> Vec<f64> {
    let r = linear_predictor.exp();
    baseline.survivor().iter().map(|s| s.powf(r)).collect()
}

/// Smallest `t` with `S(t) <= u`; `(t_max, false)` when the curve never drops that low.
pub fn invert_survivor(survivor: &[f64], u: f64) -> (u32, bool) {
    let pos = survivor.partition_point(|&s| s > u);
    if pos < survivor.len() {
        (pos as u32 + 1, true)
    } else {
        (survivor.len() as u32, false)
    }
}

/// Latent `(time, event)` per covariate row under proportional hazards.
pub fn simulate_durations(
    baseline: &StepBaseline,
    covariates: &CovariateTable,
    beta: &[f64],
    seed: u64,
) -> Result<Vec<(u32, bool)>> {
    if covariates.n_cols() != beta.len() {
        return Err(SurvError::Shape(format!(
            "covariate width {} does not match beta length {}",
            covariates.n_cols(),
            beta.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    covariates
        .values()
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let lp: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let r = lp.exp();
            if !r.is_finite() {
                return Err(SurvError::Overflow { row: i });
            }
            let u: f64 = rng.random();
            Ok(invert_survivor(&individual_survivor(baseline, lp), u))
        })
        .collect()
}

/// Indices flagged for random censoring: `round(fraction * n)` drawn without replacement, sorted.
pub fn censoring_selection(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(SurvError::Parameter(format!(
            "censor fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = rng_from_seed(derive_seed(&[seed, 0]));
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Right-censors the records chosen by [`censoring_selection`]; their time is
/// redrawn uniformly on `1..=time` and their event flag cleared.
pub fn apply_censoring(
    records: &[SurvivalRecord],
    fraction: f64,
    seed: u64,
) -> Result<Vec<SurvivalRecord>> {
    let selected = censoring_selection(records.len(), fraction, seed)?;
    let mut rng = rng_from_seed(derive_seed(&[seed, 1]));
    let mut out = records.to_vec();
    for i in selected {
        let rec = &mut out[i];
        rec.time = rng.random_range(1..=rec.time.max(1));
        rec.event = false;
    }
    Ok(out)
}

/// Per-event `l_i = g_i − log Σ_{j ∈ R_i} exp(g_j)`, in record order.
pub fn partial_loglik_from_risk(times: &[u32], events: &[bool], g: &[f64]) -> Vec<f64> {
    let log_den = log_risk_denominators(times, g);
    events
        .iter()
        .enumerate()
        .filter(|(_, &e)| e)
        .map(|(i, _)| g[i] - log_den[i])
        .collect()
}

/// Per-event partial log-likelihood at the true coefficients. Empty (with a
/// logged warning) when there are no events.
pub fn true_partial_loglik(records: &[SurvivalRecord], beta: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = records
        .iter()
        .position(|r| r.covariates.len() != beta.len())
    {
        return Err(SurvError::Shape(format!(
            "record {i} has {} covariates, beta has {}",
            records[i].covariates.len(),
            beta.len()
        )));
    }
    if !records.iter().any(|r| r.event) {
        log::warn!("partial log-likelihood requested for data with no events");
        return Ok(Vec::new());
    }
    let times: Vec<u32> = records.iter().map(|r| r.time).collect();
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    let g: Vec<f64> = records.iter().map(|r| dot(&r.covariates, beta)).collect();
    Ok(partial_loglik_from_risk(&times, &events, &g))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column-oriented view of records used for fitting and evaluation.
#[derive(Debug, Clone)]
pub struct SurvivalData {
    pub covariates: CovariateTable,
    pub times: Vec<u32>,
    pub events: Vec<bool>,
}

impl SurvivalData {
    pub fn new(covariates: CovariateTable, times: Vec<u32>, events: Vec<bool>) -> Result<Self> {
        if covariates.n_rows() != times.len() || times.len() != events.len() {
            return Err(SurvError::Shape(format!(
                "covariates/times/events lengths differ: {}/{}/{}",
                covariates.n_rows(),
                times.len(),
                events.len()
            )));
        }
        Ok(Self {
            covariates,
            times,
            events,
        })
    }

    pub fn from_records(records: &[SurvivalRecord], column_names: &[String]) -> Result<Self> {
        let width = column_names.len();
        if let Some(i) = records.iter().position(|r| r.covariates.len() != width) {
            return Err(SurvError::Shape(format!(
                "record {i} does not have {width} covariates"
            )));
        }
        let flat: Vec<f64> = records
            .iter()
            .flat_map(|r| r.covariates.iter().copied())
            .collect();
        let values = ndarray::Array2::from_shape_vec((records.len(), width), flat)
            .map_err(|e| SurvError::Shape(e.to_string()))?;
        Self::new(
            CovariateTable::new(values, column_names.to_vec())?,
            records.iter().map(|r| r.time).collect(),
            records.iter().map(|r| r.event).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            covariates: self.covariates.select_rows(indices),
            times: indices.iter().map(|&i| self.times[i]).collect(),
            events: indices.iter().map(|&i| self.events[i]).collect(),
        }
    }

    pub fn with_covariates(&self, covariates: CovariateTable) -> Result<Self> {
        Self::new(covariates, self.times.clone(), self.events.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub t_max: u32,
    pub num_knots: usize,
    pub f_max: f64,
    pub censor_fraction: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            num_knots: DEFAULT_NUM_KNOTS,
            f_max: DEFAULT_F_MAX,
            censor_fraction: DEFAULT_CENSOR_FRACTION,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub records: Vec<SurvivalRecord>,
    pub baseline: StepBaseline,
    pub beta: Vec<f64>,
    pub seed: u64,
    pub column_names: Vec<String>,
    /// Rows chosen for random censoring (sorted).
    pub flagged: Vec<usize>,
}

impl SimulatedDataset {
    pub fn times(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.records.iter().filter(|r| !r.event).count() as f64 / self.records.len() as f64
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.flagged.len() as f64 / self.records.len() as f64
    }

    /// Records censored only by the end of the grid.
    pub fn administratively_censored(&self) -> usize {
        let flagged: std::collections::HashSet<usize> = self.flagged.iter().copied().collect();
        self.records
            .iter()
            .enumerate()
            .filter(|(i, r)| !r.event && !flagged.contains(i))
            .count()
    }

    /// Delimited text with columns `time,event,<covariates>`.
    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records, &self.column_names)
    }
}

/// Baseline, latent durations and censoring, each from its own seed stream.
pub fn simulate_dataset(
    config: &SimulationConfig,
    covariates: &CovariateTable,
    beta: &[f64],
    seed: u64,
) -> Result<SimulatedDataset> {
    let baseline = generate_baseline(
        config.t_max,
        config.num_knots,
        config.f_max,
        derive_seed(&[seed, 1]),
    )?;
    let latent = simulate_durations(&baseline, covariates, beta, derive_seed(&[seed, 2]))?;
    let uncensored: Vec<SurvivalRecord> = latent
        .into_iter()
        .enumerate()
        .map(|(i, (time, event))| SurvivalRecord {
            time,
            event,
            covariates: covariates.row(i),
        })
        .collect();
    let censor_seed = derive_seed(&[seed, 3]);
    let flagged = censoring_selection(uncensored.len(), config.censor_fraction, censor_seed)?;
    let records = apply_censoring(&uncensored, config.censor_fraction, censor_seed)?;
    Ok(SimulatedDataset {
        records,
        baseline,
        beta: beta.to_vec(),
        seed,
        column_names: covariates.column_names().to_vec(),
        flagged,
    })
}

pub fn records_to_csv(records: &[SurvivalRecord], column_names: &[String]) -> String {
    let mut out = String::from("time,event");
    for name in column_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{}", r.time, u8::from(r.event));
        for v in &r.covariates {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Reads a `time,event,<covariates>` file; returns the records and covariate names.
pub fn read_records(path: impl AsRef<Path>) -> Result<(Vec<SurvivalRecord>, Vec<String>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| SurvError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| SurvError::Schema(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 3 || &headers[0] != "time" || &headers[1] != "event" {
        return Err(SurvError::Schema(format!(
            "{}: expected header 'time,event,<covariates>'",
            path.display()
        )));
    }
    let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| SurvError::Data {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell_err = |column: &str, cell: &str| SurvError::Data {
            row,
            column: column.to_string(),
            message: format!("cannot parse '{cell}'"),
        };
        let time: u32 = rec[0].parse().map_err(|_| cell_err("time", &rec[0]))?;
        let event = match &rec[1] {
            "1" => true,
            "0" => false,
            other => return Err(cell_err("event", other)),
        };
        let covariates = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let cell = rec.get(j + 2).unwrap_or("");
                cell.parse::<f64>().map_err(|_| cell_err(name, cell))
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(SurvivalRecord {
            time,
            event,
            covariates,
        });
    }
    Ok((records, names))
}
