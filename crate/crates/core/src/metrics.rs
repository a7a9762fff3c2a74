//! Evaluation metrics for right-censored predictions: Kaplan–Meier, Harrell's
//! concordance index, and the IPCW Brier score with its time integral.

use crate::error::{Result, SurvError};
use crate::survpredict::SurvivalCurve;

/// Product-limit curve; values hold from each time up to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    pub times: Vec<u32>,
    pub survival: Vec<f64>,
}

impl KmCurve {
    /// `S(t)`, right-continuous, 1 before the first drop.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s as f64 <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// `S(t⁻)`: the value strictly before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| (s as f64) < t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// The same step function as a prediction curve anchored at `(0, 1)`.
    pub fn to_survival_curve(&self) -> SurvivalCurve {
        let mut times = vec![0];
        let mut probs = vec![1.0];
        times.extend_from_slice(&self.times);
        probs.extend_from_slice(&self.survival);
        SurvivalCurve { times, probs }
    }
}

/// `S(t) = Π_{t_k <= t} (1 − d_k / n_k)` over the distinct event times.
/// Pass inverted flags to estimate the censoring distribution.
///
/// Between censorings the product telescopes to `remaining / n_start`, so it
/// is evaluated that way; without censoring the result is the empirical
/// survival fraction exactly.
pub fn kaplan_meier(times: &[u32], events: &[bool]) -> KmCurve {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by_key(|&i| times[i]);
    let mut at_risk = times.len();
    let (mut run_surv, mut run_start) = (1.0, times.len());
    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
    };
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let (mut deaths, mut leaving) = (0usize, 0usize);
        while i < order.len() && times[order[i]] == t {
            deaths += usize::from(events[order[i]]);
            leaving += 1;
            i += 1;
        }
        let surv = run_surv * (at_risk - deaths) as f64 / run_start as f64;
        if deaths > 0 {
            curve.times.push(t);
            curve.survival.push(surv);
        }
        at_risk -= leaving;
        if leaving > deaths {
            run_surv = surv;
            run_start = at_risk;
        }
    }
    curve
}

/// Harrell's C and the number of comparable pairs. A pair `(i, j)` is
/// comparable when `t_i < t_j` and `i` had the event; it is concordant when
/// `risk_i > risk_j`, and tied risks earn half credit.
pub fn concordance(times: &[u32], events: &[bool], risk: &[f64]) -> Result<(f64, usize)> {
    if times.len() != events.len() || times.len() != risk.len() {
        return Err(SurvError::Shape(
            "times, events and risk must have equal length".into(),
        ));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by_key(|&i| times[i]);
    let mut credit = 0.0;
    let mut pairs = 0usize;
    // records after the run of ties at t_i are exactly the ones with t_j > t_i
    let mut later_start = 0;
    for (pos, &i) in order.iter().enumerate() {
        if !events[i] {
            continue;
        }
        if later_start <= pos {
            later_start = pos;
            while later_start < order.len() && times[order[later_start]] == times[i] {
                later_start += 1;
            }
        }
        for &j in &order[later_start..] {
            pairs += 1;
            if risk[i] > risk[j] {
                credit += 1.0;
            } else if risk[i] == risk[j] {
                credit += 0.5;
            }
        }
    }
    if pairs == 0 {
        return Err(SurvError::Evaluation("no comparable pairs".into()));
    }
    Ok((credit / pairs as f64, pairs))
}

pub fn concordance_index(times: &[u32], events: &[bool], risk: &[f64]) -> Result<f64> {
    concordance(times, events, risk).map(|(c, _)| c)
}

/// IPCW Brier score at time `t`:
/// `(1/n) Σ [Ŝ_i(t)² 1{t_i <= t, event} / G(t_i⁻) + (1 − Ŝ_i(t))² 1{t_i > t} / G(t)]`.
pub fn brier_score(
    t: f64,
    times: &[u32],
    events: &[bool],
    curves: &[SurvivalCurve],
    censoring: &KmCurve,
) -> Result<f64> {
    if times.len() != events.len() || times.len() != curves.len() {
        return Err(SurvError::Shape(
            "times, events and curves must have equal length".into(),
        ));
    }
    if times.is_empty() {
        return Err(SurvError::Evaluation("Brier score of an empty set".into()));
    }
    let g_t = censoring.at(t);
    if g_t.is_nan() || g_t <= 0.0 {
        return Err(SurvError::Evaluation(format!(
            "censoring survival is zero at t = {t}; truncate the evaluation grid"
        )));
    }
    let mut total = 0.0;
    for ((&ti, &ei), curve) in times.iter().zip(events).zip(curves) {
        let s = curve.at(t);
        let ti = ti as f64;
        if ti <= t {
            if ei {
                total += s * s / censoring.left_limit(ti);
            }
        } else {
            total += (1.0 - s) * (1.0 - s) / g_t;
        }
    }
    Ok(total / times.len() as f64)
}

/// Distinct event times, cut at the last time where the censoring survival is positive.
pub fn ibs_grid(times: &[u32], events: &[bool]) -> Vec<f64> {
    let censoring = censoring_curve(times, events);
    let mut grid: Vec<u32> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .filter(|&t| censoring.at(t as f64) > 0.0)
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid.into_iter().map(f64::from).collect()
}

pub fn censoring_curve(times: &[u32], events: &[bool]) -> KmCurve {
    let inverted: Vec<bool> = events.iter().map(|e| !e).collect();
    kaplan_meier(times, &inverted)
}

/// Brier score at every grid time.
pub fn brier_curve(
    times: &[u32],
    events: &[bool],
    curves: &[SurvivalCurve],
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let censoring = censoring_curve(times, events);
    grid.iter()
        .map(|&t| brier_score(t, times, events, curves, &censoring).map(|b| (t, b)))
        .collect()
}

/// Trapezoidal integral of `(t, score)` pairs divided by the time span.
pub fn integrate_brier(scores: &[(f64, f64)]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(SurvError::Parameter(
            "integration grid needs at least two points".into(),
        ));
    }
    let (t0, t1) = (scores[0].0, scores[scores.len() - 1].0);
    if t1.is_nan() || t0.is_nan() || t1 <= t0 || scores.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(SurvError::Parameter(
            "integration grid must be increasing".into(),
        ));
    }
    let area: f64 = scores
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    Ok(area / (t1 - t0))
}

pub fn integrated_brier(
    times: &[u32],
    events: &[bool],
    curves: &[SurvivalCurve],
    grid: &[f64],
) -> Result<f64> {
    integrate_brier(&brier_curve(times, events, curves, grid)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub c_index: f64,
    pub brier: Vec<(f64, f64)>,
    pub ibs: f64,
    pub n_comparable_pairs: usize,
}

/// C-index from `risk` and IBS from `curves` on the default grid of this data.
pub fn evaluate(
    times: &[u32],
    events: &[bool],
    risk: &[f64],
    curves: &[SurvivalCurve],
) -> Result<MetricsReport> {
    let (c_index, n_comparable_pairs) = concordance(times, events, risk)?;
    let grid = ibs_grid(times, events);
    let brier = brier_curve(times, events, curves, &grid)?;
    let ibs = integrate_brier(&brier)?;
    Ok(MetricsReport {
        c_index,
        brier,
        ibs,
        n_comparable_pairs,
    })
}
