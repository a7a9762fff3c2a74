//! Negative Cox partial log-likelihood with Breslow ties, averaged over events:
//!
//! `loss = (1/n_events) Σ_{i: event} log Σ_{j: t_j >= t_i} exp(g_j − g_i)`

use crate::error::{Result, SurvError};
use crate::numeric::log_add_exp;
use crate::riskset::summarize_by_time;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxLoss {
    pub value: f64,
    pub n_events: usize,
}

impl CoxLoss {
    /// True when the batch held no events and contributes nothing.
    pub fn skipped(&self) -> bool {
        self.n_events == 0
    }
}

fn check_inputs(g: &[f64], times: &[u32], events: &[bool]) -> Result<()> {
    if g.len() != times.len() || g.len() != events.len() {
        return Err(SurvError::Shape(format!(
            "g/times/events lengths differ: {}/{}/{}",
            g.len(),
            times.len(),
            events.len()
        )));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(SurvError::Numeric(format!(
            "risk score {i} is not finite ({})",
            g[i]
        )));
    }
    Ok(())
}

pub fn cox_loss(g: &[f64], times: &[u32], events: &[bool]) -> Result<CoxLoss> {
    cox_loss_and_grad(g, times, events).map(|(loss, _)| loss)
}

pub fn cox_loss_grad(g: &[f64], times: &[u32], events: &[bool]) -> Result<Vec<f64>> {
    cox_loss_and_grad(g, times, events).map(|(_, grad)| grad)
}

/// Loss and `∂loss/∂g` from a single pair of sweeps over the distinct times.
///
/// With `L(t)` the log risk-set sum at time `t` and `d(t)` the events there,
/// the gradient for record `k` is
/// `(exp(g_k + C(t_k)) − D_k) / n_events` where
/// `C(t) = log Σ_{s <= t} d(s) exp(−L(s))`.
pub fn cox_loss_and_grad(g: &[f64], times: &[u32], events: &[bool]) -> Result<(CoxLoss, Vec<f64>)> {
    check_inputs(g, times, events)?;
    let n_events = events.iter().filter(|&&e| e).count();
    if n_events == 0 {
        return Ok((
            CoxLoss {
                value: 0.0,
                n_events,
            },
            vec![0.0; g.len()],
        ));
    }
    let summary = summarize_by_time(times, events, g);

    let mut total = 0.0;
    for (i, _) in events.iter().enumerate().filter(|(_, &e)| e) {
        let log_den = summary[summary.partition_point(|s| s.time < times[i])].log_denominator;
        total += log_den - g[i];
    }

    let mut cum = f64::NEG_INFINITY;
    let cumulative: Vec<f64> = summary
        .iter()
        .map(|s| {
            if s.events > 0 {
                cum = log_add_exp(cum, (s.events as f64).ln() - s.log_denominator);
            }
            cum
        })
        .collect();

    let scale = 1.0 / n_events as f64;
    let grad = g
        .iter()
        .zip(times)
        .zip(events)
        .map(|((&gk, &tk), &dk)| {
            let c = cumulative[summary.partition_point(|s| s.time < tk)];
            let hazard_share = if c == f64::NEG_INFINITY {
                0.0
            } else {
                (gk + c).exp()
            };
            scale * (hazard_share - f64::from(u8::from(dk)))
        })
        .collect();

    Ok((
        CoxLoss {
            value: total * scale,
            n_events,
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_risk_counting_identity() {
        let l = cox_loss(&[0.0, 0.0, 0.0], &[1, 2, 3], &[true, true, true]).unwrap();
        assert!((l.value - 6f64.ln() / 3.0).abs() < 1e-15);
        assert!((l.value - 0.5973).abs() < 1e-4);
        assert_eq!(l.n_events, 3);
    }

    #[test]
    fn singleton_risk_set_is_zero() {
        let l = cox_loss(&[2.3], &[5], &[true]).unwrap();
        assert_eq!(l.value, 0.0);
    }

    #[test]
    fn two_record_scalar_case() {
        let l = cox_loss(&[1.0, 0.0], &[1, 2], &[true, false]).unwrap();
        let expected = (1.0 + (-1f64).exp()).ln();
        assert!((l.value - expected).abs() < 1e-15);
        assert!((l.value - 0.31326).abs() < 1e-5);
    }

    #[test]
    fn no_events_is_skipped() {
        let (l, grad) = cox_loss_and_grad(&[0.1, 0.2], &[1, 2], &[false, false]).unwrap();
        assert!(l.skipped());
        assert_eq!(l.value, 0.0);
        assert_eq!(grad, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_hand_expansion() {
        let grad = cox_loss_grad(&[0.0, 0.0, 0.0], &[1, 2, 3], &[true, true, true]).unwrap();
        let expected = [-2.0 / 9.0, -1.0 / 18.0, 5.0 / 18.0];
        for (a, b) in grad.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            cox_loss(&[f64::NAN, 0.0], &[1, 2], &[true, true]),
            Err(SurvError::Numeric(_))
        ));
        assert!(matches!(
            cox_loss(&[0.0], &[1, 2], &[true, true]),
            Err(SurvError::Shape(_))
        ));
    }

    #[test]
    fn huge_scores_stay_finite() {
        let (l, grad) =
            cox_loss_and_grad(&[700.0, -700.0, 300.0], &[1, 1, 2], &[true, true, false]).unwrap();
        assert!(l.value.is_finite());
        assert!(grad.iter().all(|v| v.is_finite()));
    }

    proptest::proptest! {
        #[test]
        fn shift_invariance(
            g in proptest::collection::vec(-5.0f64..5.0, 1..40),
            shift in -50.0f64..50.0,
            seed in 0u32..1000,
        ) {
            let n = g.len();
            let times: Vec<u32> = (0..n).map(|i| (i as u32 * 7 + seed) % 9 + 1).collect();
            let events: Vec<bool> = (0..n).map(|i| !(i as u32 + seed).is_multiple_of(3)).collect();
            let shifted: Vec<f64> = g.iter().map(|v| v + shift).collect();
            let a = cox_loss(&g, &times, &events).unwrap().value;
            let b = cox_loss(&shifted, &times, &events).unwrap().value;
            proptest::prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn gradient_sums_to_zero(
            g in proptest::collection::vec(-5.0f64..5.0, 1..40),
            seed in 0u32..1000,
        ) {
            let n = g.len();
            let times: Vec<u32> = (0..n).map(|i| (i as u32 * 5 + seed) % 7 + 1).collect();
            let events: Vec<bool> = (0..n).map(|i| !(i as u32 + seed).is_multiple_of(4)).collect();
            let grad = cox_loss_grad(&g, &times, &events).unwrap();
            proptest::prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
