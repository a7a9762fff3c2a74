//! Risk-set sums over right-censored data.
//!
//! The risk set of record `i` is every record `j` with `t_j >= t_i`, so tied
//! times share one risk set. All sums are accumulated in log space with a
//! running `log_add_exp`, which keeps them finite for any finite scores.

use crate::numeric::log_add_exp;

/// Record indices sorted by decreasing time, grouped into runs of equal time.
pub(crate) fn groups_by_decreasing_time(times: &[u32]) -> Vec<(u32, Vec<usize>)> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].cmp(&times[a]).then(a.cmp(&b)));
    let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some((t, members)) if *t == times[idx] => members.push(idx),
            _ => groups.push((times[idx], vec![idx])),
        }
    }
    groups
}

/// `log Σ_{j: t_j >= t_i} exp(g_j)` for every record `i`.
pub fn log_risk_denominators(times: &[u32], g: &[f64]) -> Vec<f64> {
    debug_assert_eq!(times.len(), g.len());
    let mut out = vec![f64::NEG_INFINITY; times.len()];
    let mut acc = f64::NEG_INFINITY;
    for (_, members) in groups_by_decreasing_time(times) {
        for &j in &members {
            acc = log_add_exp(acc, g[j]);
        }
        for &j in &members {
            out[j] = acc;
        }
    }
    out
}

/// Per-time risk-set summary: distinct times ascending, with event counts and
/// the log denominator shared by everyone at that time.
pub(crate) struct TimeSummary {
    pub time: u32,
    pub events: usize,
    pub log_denominator: f64,
}

pub(crate) fn summarize_by_time(times: &[u32], events: &[bool], g: &[f64]) -> Vec<TimeSummary> {
    let mut acc = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for (time, members) in groups_by_decreasing_time(times) {
        for &j in &members {
            acc = log_add_exp(acc, g[j]);
        }
        let d = members.iter().filter(|&&j| events[j]).count();
        out.push(TimeSummary {
            time,
            events: d,
            log_denominator: acc,
        });
    }
    out.reverse();
    out
}
