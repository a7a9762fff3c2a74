//! Risk functions `g(x)`, the Cox training loss and the training loop.

mod cox;
mod loss;
mod network;
mod train;

pub use cox::fit_cox_newton;
pub use loss::{cox_loss, cox_loss_and_grad, cox_loss_grad, CoxLoss};
pub use network::{DenseLayer, ForwardCache, MlpRisk};
pub use train::{fit, fit_with_monitor, EpochRecord, TrainConfig, TrainedModel};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

/// `g(x) = x·β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRisk {
    pub beta_hat: Vec<f64>,
}

impl LinearRisk {
    pub fn new(beta_hat: Vec<f64>) -> Result<Self> {
        if beta_hat.is_empty() || beta_hat.iter().any(|b| !b.is_finite()) {
            return Err(SurvError::Parameter(
                "coefficients must be finite and non-empty".into(),
            ));
        }
        Ok(Self { beta_hat })
    }

    pub fn zeros(n_inputs: usize) -> Self {
        Self {
            beta_hat: vec![0.0; n_inputs],
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        check_width(x.ncols(), self.beta_hat.len())?;
        Ok(x.rows()
            .into_iter()
            .map(|row| row.iter().zip(&self.beta_hat).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `∂loss/∂β = Xᵀ · upstream`.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: &[f64]) -> Result<Vec<f64>> {
        check_width(x.ncols(), self.beta_hat.len())?;
        if upstream.len() != x.nrows() {
            return Err(SurvError::Shape(format!(
                "{} upstream values for {} rows",
                upstream.len(),
                x.nrows()
            )));
        }
        let mut grad = vec![0.0; self.beta_hat.len()];
        for (row, &u) in x.rows().into_iter().zip(upstream) {
            for (gj, xj) in grad.iter_mut().zip(row) {
                *gj += u * xj;
            }
        }
        Ok(grad)
    }
}

pub(crate) fn check_width(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(SurvError::Shape(format!(
            "covariate width {got} does not match model input width {expected}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Linear,
    Network,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Linear => "linear",
            ModelFamily::Network => "network",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(ModelFamily::Linear),
            "network" => Ok(ModelFamily::Network),
            other => Err(SurvError::Parameter(format!(
                "unknown model family '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "architecture", rename_all = "lowercase")]
pub enum RiskModel {
    Linear(LinearRisk),
    Network(MlpRisk),
}

impl RiskModel {
    /// Zero-initialised linear model or a He-initialised `in → 32 → 32 → 1` network.
    pub fn init(family: ModelFamily, n_inputs: usize, seed: u64) -> Result<Self> {
        match family {
            ModelFamily::Linear => Ok(RiskModel::Linear(LinearRisk::zeros(n_inputs))),
            ModelFamily::Network => Ok(RiskModel::Network(MlpRisk::he_init(
                &[n_inputs, 32, 32, 1],
                seed,
            )?)),
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            RiskModel::Linear(_) => ModelFamily::Linear,
            RiskModel::Network(_) => ModelFamily::Network,
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            RiskModel::Linear(m) => m.beta_hat.len(),
            RiskModel::Network(m) => m.layer_sizes()[0],
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            RiskModel::Linear(m) => m.forward(x),
            RiskModel::Network(m) => m.forward(x),
        }
    }

    /// Gradient of the loss with respect to the flattened parameters.
    pub fn backward(&self, x: ArrayView2<f64>, upstream: &[f64]) -> Result<Vec<f64>> {
        match self {
            RiskModel::Linear(m) => m.backward(x, upstream),
            RiskModel::Network(m) => {
                let (_, cache) = m.forward_with_cache(x)?;
                let grads = m.backward(&cache, upstream)?;
                Ok(MlpRisk::flatten(&grads))
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            RiskModel::Linear(m) => m.beta_hat.clone(),
            RiskModel::Network(m) => MlpRisk::flatten(m.layers()),
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        match self {
            RiskModel::Linear(m) => {
                check_width(params.len(), m.beta_hat.len())?;
                m.beta_hat.copy_from_slice(params);
                Ok(())
            }
            RiskModel::Network(m) => m.set_flat(params),
        }
    }
}
