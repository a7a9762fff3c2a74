//! Breslow baseline hazard and per-subject survival curves
//! `S(t | x) = exp(−H0(t) · exp(g(x)))`.

use std::fmt::Write as _;

use crate::data::CovariateTable;
use crate::error::{Result, SurvError};
use crate::numeric::fmt_f64;
use crate::riskmodel::TrainedModel;
use crate::riskset::summarize_by_time;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineHazard {
    pub event_times: Vec<u32>,
    pub cum_hazard: Vec<f64>,
}

impl BaselineHazard {
    /// Right-continuous step lookup; zero before the first event time.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&e| e as f64 <= t);
        if k == 0 {
            0.0
        } else {
            self.cum_hazard[k - 1]
        }
    }
}

/// `ΔH0(t) = d(t) / Σ_{j: t_j >= t} exp(g_j)` at each distinct event time.
pub fn breslow_baseline(times: &[u32], events: &[bool], g: &[f64]) -> Result<BaselineHazard> {
    if times.len() != events.len() || times.len() != g.len() {
        return Err(SurvError::Shape(
            "times, events and g must have equal length".into(),
        ));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(SurvError::Numeric("risk scores must be finite".into()));
    }
    if !events.iter().any(|&e| e) {
        return Err(SurvError::Estimation(
            "baseline hazard needs at least one event".into(),
        ));
    }
    let mut event_times = Vec::new();
    let mut cum_hazard = Vec::new();
    let mut running = 0.0;
    for s in summarize_by_time(times, events, g) {
        if s.events == 0 {
            continue;
        }
        running += s.events as f64 * (-s.log_denominator).exp();
        event_times.push(s.time);
        cum_hazard.push(running);
    }
    Ok(BaselineHazard {
        event_times,
        cum_hazard,
    })
}

/// Step survival curve on `0` plus a set of grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<u32>,
    pub probs: Vec<f64>,
}

impl SurvivalCurve {
    /// Value at `t`, holding the last grid value to the right.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s as f64 <= t);
        if k == 0 {
            1.0
        } else {
            self.probs[k - 1]
        }
    }
}

pub fn survival_curve(baseline: &BaselineHazard, g_x: f64) -> Result<SurvivalCurve> {
    if !g_x.is_finite() {
        return Err(SurvError::Numeric(format!(
            "risk score {g_x} is not finite"
        )));
    }
    let relative = g_x.exp();
    if !relative.is_finite() {
        return Err(SurvError::Numeric(format!("exp({g_x}) overflows")));
    }
    let mut times = Vec::with_capacity(baseline.event_times.len() + 1);
    let mut probs = Vec::with_capacity(baseline.event_times.len() + 1);
    times.push(0);
    probs.push(1.0);
    for (&t, &h) in baseline.event_times.iter().zip(&baseline.cum_hazard) {
        times.push(t);
        probs.push((-h * relative).exp());
    }
    Ok(SurvivalCurve { times, probs })
}

/// Applies the model's recorded standardization, then evaluates `g`.
pub fn predict_risk(model: &TrainedModel, covariates: &CovariateTable) -> Result<Vec<f64>> {
    match &model.standardization {
        Some(scales) => {
            let scaled = covariates.apply_standardization(scales)?;
            model.model.forward(scaled.values().view())
        }
        None => model.model.forward(covariates.values().view()),
    }
}

/// Concatenated curves with columns `subject,time,prob`.
pub fn curves_to_csv(curves: &[SurvivalCurve]) -> String {
    let mut out = String::from("subject,time,prob\n");
    for (i, c) in curves.iter().enumerate() {
        for (t, p) in c.times.iter().zip(&c.probs) {
            let _ = writeln!(out, "{i},{t},{}", fmt_f64(*p));
        }
    }
    out
}
