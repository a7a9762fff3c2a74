use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{cox_loss, cox_loss_and_grad, RiskModel};
use crate::data::ColumnScale;
use crate::error::{Result, SurvError};
use crate::metrics::concordance_index;
use crate::numeric::{derive_seed, fmt_f64, rng_from_seed};
use crate::survsim::SurvivalData;

/// SGD with momentum and L2 weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 15,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // zero is accepted so a run can be checked for a null update
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(SurvError::Parameter(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(SurvError::Parameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(SurvError::Parameter(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(SurvError::Parameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(SurvError::Parameter("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's non-empty batches.
    pub train_loss: f64,
    /// Full-batch loss on the validation split.
    pub val_loss: f64,
    /// NaN when the validation split has no comparable pairs.
    pub val_c_index: f64,
    pub val_ibs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: RiskModel,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub standardization: Option<Vec<ColumnScale>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    best_epoch: usize,
    standardization: Option<Vec<ColumnScale>>,
    model: RiskModel,
}

const MODEL_FORMAT: &str = "survkit-model-v1";

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            best_epoch: self.best_epoch,
            standardization: self.standardization.clone(),
            model: self.model.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| SurvError::Schema(e.to_string()))
    }

    /// Reads a model file; the history is not stored there and comes back empty.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| SurvError::Schema(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(SurvError::Schema(format!(
                "unsupported model format '{}'",
                file.format
            )));
        }
        if let RiskModel::Network(net) = &file.model {
            net.validate()?;
        }
        Ok(Self {
            model: file.model,
            history: Vec::new(),
            best_epoch: file.best_epoch,
            standardization: file.standardization,
        })
    }

    /// Delimited `epoch,train_loss,val_loss,val_c_index,val_ibs`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_c_index,val_ibs\n");
        for r in &self.history {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                fmt_f64(r.train_loss),
                fmt_f64(r.val_loss),
                fmt_f64(r.val_c_index),
                r.val_ibs.map(fmt_f64).unwrap_or_default()
            );
        }
        out
    }
}

pub fn fit(
    model: RiskModel,
    train: &SurvivalData,
    validation: &SurvivalData,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    fit_with_monitor(model, train, validation, config, |_| Ok(None))
}

/// Mini-batch training with batch-local risk sets. After every epoch the
/// validation loss is computed on the full validation split, and `monitor`
/// may add a validation IBS; the parameters with the lowest validation loss
/// are returned.
pub fn fit_with_monitor<F>(
    mut model: RiskModel,
    train: &SurvivalData,
    validation: &SurvivalData,
    config: &TrainConfig,
    mut monitor: F,
) -> Result<TrainedModel>
where
    F: FnMut(&RiskModel) -> Result<Option<f64>>,
{
    config.validate()?;
    if train.n_events() == 0 {
        return Err(SurvError::Training(
            "training split contains no events".into(),
        ));
    }
    if validation.n_events() == 0 {
        return Err(SurvError::Training(
            "validation split contains no events".into(),
        ));
    }
    for (name, split) in [("training", train), ("validation", validation)] {
        if split.covariates.n_cols() != model.n_inputs() {
            return Err(SurvError::Shape(format!(
                "{name} covariate width {} does not match model input width {}",
                split.covariates.n_cols(),
                model.n_inputs()
            )));
        }
    }

    let mut rng = rng_from_seed(derive_seed(&[config.seed, 0x5348_5546]));
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut n_batches) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let x = train.covariates.values().select(ndarray::Axis(0), batch);
            let times: Vec<u32> = batch.iter().map(|&i| train.times[i]).collect();
            let events: Vec<bool> = batch.iter().map(|&i| train.events[i]).collect();
            let g = model.forward(x.view())?;
            let (loss, upstream) = cox_loss_and_grad(&g, &times, &events)?;
            if loss.skipped() {
                continue;
            }
            let grad = model.backward(x.view(), &upstream)?;
            for ((p, v), gr) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v + (gr + config.weight_decay * *p);
                *p -= config.learning_rate * *v;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(SurvError::Training(format!(
                    "parameters diverged in epoch {epoch}"
                )));
            }
            model.set_params(&params)?;
            loss_sum += loss.value;
            n_batches += 1;
        }

        let g_val = model.forward(validation.covariates.values().view())?;
        let val_loss = cox_loss(&g_val, &validation.times, &validation.events)?.value;
        let val_c_index =
            concordance_index(&validation.times, &validation.events, &g_val).unwrap_or(f64::NAN);
        let val_ibs = monitor(&model)?;
        history.push(EpochRecord {
            epoch,
            train_loss: if n_batches > 0 {
                loss_sum / n_batches as f64
            } else {
                f64::NAN
            },
            val_loss,
            val_c_index,
            val_ibs,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    model.set_params(&best_params)?;
    Ok(TrainedModel {
        model,
        history,
        best_epoch,
        standardization: train
            .covariates
            .standardization()
            .map(<[ColumnScale]>::to_vec),
    })
}
