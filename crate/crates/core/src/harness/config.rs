use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{reference_proportions, DEFAULT_EF_BOUNDS, DEFAULT_EF_MEAN, DEFAULT_EF_SD};
use crate::error::{Result, SurvError};
use crate::riskmodel::{ModelFamily, TrainConfig};
use crate::survsim::{
    SimulationConfig, DEFAULT_BETA, DEFAULT_CENSOR_FRACTION, DEFAULT_F_MAX, DEFAULT_NUM_KNOTS,
    DEFAULT_T_MAX,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_subjects: usize,
    pub split_proportions: [f64; 3],
    pub n_datasets: usize,
    pub replicates: usize,
    pub families: Vec<ModelFamily>,
    pub beta_true: f64,
    pub censor_fraction: f64,
    pub t_max: u32,
    pub num_knots: usize,
    pub f_max: f64,
    pub ef_mean: f64,
    pub ef_sd: f64,
    pub ef_lo: f64,
    pub ef_hi: f64,
    /// `seed` here is ignored; every cell derives its own.
    pub train: TrainConfig,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_subjects: 10030,
            split_proportions: reference_proportions(),
            n_datasets: 10,
            replicates: 3,
            families: vec![ModelFamily::Linear, ModelFamily::Network],
            beta_true: DEFAULT_BETA,
            censor_fraction: DEFAULT_CENSOR_FRACTION,
            t_max: DEFAULT_T_MAX,
            num_knots: DEFAULT_NUM_KNOTS,
            f_max: DEFAULT_F_MAX,
            ef_mean: DEFAULT_EF_MEAN,
            ef_sd: DEFAULT_EF_SD,
            ef_lo: DEFAULT_EF_BOUNDS.0,
            ef_hi: DEFAULT_EF_BOUNDS.1,
            train: TrainConfig::default(),
            master_seed: 0,
            output_dir: PathBuf::from("survkit-run"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_datasets == 0 {
            return Err(SurvError::Parameter("n_datasets must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(SurvError::Parameter("replicates must be at least 1".into()));
        }
        if self.families.is_empty() {
            return Err(SurvError::Parameter(
                "at least one model family is required".into(),
            ));
        }
        if self.n_subjects < 3 {
            return Err(SurvError::Parameter("n_subjects must be at least 3".into()));
        }
        if !self.beta_true.is_finite() {
            return Err(SurvError::Parameter("beta must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.censor_fraction) {
            return Err(SurvError::Parameter(
                "censor_fraction must lie in [0, 1]".into(),
            ));
        }
        self.train.validate()
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            t_max: self.t_max,
            num_knots: self.num_knots,
            f_max: self.f_max,
            censor_fraction: self.censor_fraction,
        }
    }

    /// Flat `key=value` text listing every field.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let families: Vec<&str> = self.families.iter().map(|f| f.as_str()).collect();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("n_subjects", self.n_subjects.to_string());
        kv("split_train", self.split_proportions[0].to_string());
        kv("split_validation", self.split_proportions[1].to_string());
        kv("split_test", self.split_proportions[2].to_string());
        kv("n_datasets", self.n_datasets.to_string());
        kv("replicates", self.replicates.to_string());
        kv("families", families.join(","));
        kv("beta", self.beta_true.to_string());
        kv("censor_fraction", self.censor_fraction.to_string());
        kv("t_max", self.t_max.to_string());
        kv("num_knots", self.num_knots.to_string());
        kv("f_max", self.f_max.to_string());
        kv("ef_mean", self.ef_mean.to_string());
        kv("ef_sd", self.ef_sd.to_string());
        kv("ef_lo", self.ef_lo.to_string());
        kv("ef_hi", self.ef_hi.to_string());
        kv("learning_rate", self.train.learning_rate.to_string());
        kv("momentum", self.train.momentum.to_string());
        kv("weight_decay", self.train.weight_decay.to_string());
        kv("epochs", self.train.epochs.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        out
    }

    /// Parses `key=value` lines over the defaults; `#` starts a comment line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SurvError::Parameter(format!("config line {}: expected key=value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| SurvError::Parameter(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SurvError::io(path, e))?;
        Self::from_text(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("invalid value '{value}' for {key}"))
        }
        match key {
            "n_subjects" => self.n_subjects = num(key, value)?,
            "split_train" => self.split_proportions[0] = num(key, value)?,
            "split_validation" => self.split_proportions[1] = num(key, value)?,
            "split_test" => self.split_proportions[2] = num(key, value)?,
            "n_datasets" => self.n_datasets = num(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "families" => {
                self.families = value
                    .split(',')
                    .map(|f| ModelFamily::parse(f.trim()).map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "beta" => self.beta_true = num(key, value)?,
            "censor_fraction" => self.censor_fraction = num(key, value)?,
            "t_max" => self.t_max = num(key, value)?,
            "num_knots" => self.num_knots = num(key, value)?,
            "f_max" => self.f_max = num(key, value)?,
            "ef_mean" => self.ef_mean = num(key, value)?,
            "ef_sd" => self.ef_sd = num(key, value)?,
            "ef_lo" => self.ef_lo = num(key, value)?,
            "ef_hi" => self.ef_hi = num(key, value)?,
            "learning_rate" => self.train.learning_rate = num(key, value)?,
            "momentum" => self.train.momentum = num(key, value)?,
            "weight_decay" => self.train.weight_decay = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "master_seed" => self.master_seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }
}
