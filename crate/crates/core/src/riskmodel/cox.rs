//! Standard Cox regression on the full partial likelihood (Breslow ties),
//! solved by Newton–Raphson with step halving.

use nalgebra::{DMatrix, DVector};

use super::LinearRisk;
use crate::error::{Result, SurvError};
use crate::riskset::groups_by_decreasing_time;
use crate::survsim::SurvivalData;

struct Derivatives {
    loglik: f64,
    score: DVector<f64>,
    information: DMatrix<f64>,
}

fn derivatives(data: &SurvivalData, beta: &DVector<f64>) -> Derivatives {
    let x = data.covariates.values();
    let p = beta.len();
    let lp: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
        .collect();
    let shift = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut loglik = 0.0;
    let mut score = DVector::zeros(p);
    let mut information = DMatrix::zeros(p, p);
    for (_, members) in groups_by_decreasing_time(&data.times) {
        for &j in &members {
            let w = (lp[j] - shift).exp();
            let xj = DVector::from_iterator(p, x.row(j).iter().copied());
            s0 += w;
            s1.axpy(w, &xj, 1.0);
            s2 += w * &xj * xj.transpose();
        }
        let mean = &s1 / s0;
        let cov = &s2 / s0 - &mean * mean.transpose();
        for &i in members.iter().filter(|&&i| data.events[i]) {
            let xi = DVector::from_iterator(p, x.row(i).iter().copied());
            loglik += lp[i] - shift - s0.ln();
            score += xi - &mean;
            information += &cov;
        }
    }
    Derivatives {
        loglik,
        score,
        information,
    }
}

/// Maximum partial-likelihood coefficients on the given (unstandardized) covariates.
pub fn fit_cox_newton(data: &SurvivalData, max_iter: usize, tol: f64) -> Result<LinearRisk> {
    if data.n_events() == 0 {
        return Err(SurvError::Estimation(
            "Cox fit needs at least one event".into(),
        ));
    }
    let p = data.covariates.n_cols();
    let mut beta = DVector::zeros(p);
    let mut current = derivatives(data, &beta);
    for _ in 0..max_iter {
        let step = current
            .information
            .clone()
            .cholesky()
            .ok_or_else(|| {
                SurvError::Estimation("information matrix is not positive definite".into())
            })?
            .solve(&current.score);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = &beta + scale * &step;
            let next = derivatives(data, &candidate);
            if next.loglik.is_finite() && next.loglik >= current.loglik - 1e-12 {
                accepted = Some((candidate, next));
                break;
            }
            scale *= 0.5;
        }
        let Some((candidate, next)) = accepted else {
            break;
        };
        let gain = next.loglik - current.loglik;
        beta = candidate;
        current = next;
        if gain.abs() <= tol * (1.0 + current.loglik.abs()) {
            break;
        }
    }
    LinearRisk::new(beta.iter().copied().collect())
        .map_err(|_| SurvError::Estimation("Cox fit produced non-finite coefficients".into()))
}
