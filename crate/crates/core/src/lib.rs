//! Simulated time-to-event data, Cox-style risk models, Breslow survival
//! prediction and discrimination/calibration metrics.
//!
//! Modules:
//! - [`data`]: covariate loading, standardization and train/validation/test splits
//! - [`survsim`]: step-function baseline hazards and proportional-hazards durations
//! - [`riskmodel`]: linear and MLP risk functions trained on the Cox partial likelihood
//! - [`survpredict`]: Breslow baseline cumulative hazard and per-subject survival curves
//! - [`metrics`]: Kaplan–Meier, Harrell's C-index and IPCW Brier / integrated Brier scores
//! - [`harness`]: the experiment grid and the `survkit` command line

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numeric;
pub mod riskmodel;
pub mod riskset;
pub mod survpredict;
pub mod survsim;

pub use error::{Result, SurvError};
