//! Report files written by a run.
//!
//! | file                   | contents                                                       |
//! |------------------------|----------------------------------------------------------------|
//! | `summary.txt`          | flat `key=value` summary (schema `survkit-run-v1`)             |
//! | `metrics.csv`          | one row per (dataset, family, replicate) cell                  |
//! | `datasets.csv`         | per-dataset censoring and reference metrics                    |
//! | `scatter.csv`          | per-event true vs predicted partial log-likelihood             |
//! | `training_curves.csv`  | per-epoch losses and validation metrics                        |
//! | `brier.csv`            | Brier score at each evaluation time                            |
//! | `config.txt`           | the configuration that produced the run                        |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{CellResult, RunReport};
use crate::error::{Result, SurvError};
use crate::numeric::{fmt_f64, quantile};
use crate::riskmodel::ModelFamily;

pub const SUMMARY_SCHEMA: &str = "survkit-run-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyAggregate {
    pub family: ModelFamily,
    pub n_ok: usize,
    pub n_failed: usize,
    pub c_index_median: f64,
    pub c_index_q25: f64,
    pub c_index_q75: f64,
    pub ibs_median: f64,
    pub ibs_q25: f64,
    pub ibs_q75: f64,
}

impl RunReport {
    /// Median and quartiles of test C-index and IBS per family.
    pub fn aggregates(&self) -> Vec<FamilyAggregate> {
        self.config
            .families
            .iter()
            .map(|&family| {
                let ok: Vec<_> = self.successful(family).map(|(_, m)| m).collect();
                let c: Vec<f64> = ok.iter().map(|m| m.metrics.c_index).collect();
                let ibs: Vec<f64> = ok.iter().map(|m| m.metrics.ibs).collect();
                FamilyAggregate {
                    family,
                    n_ok: ok.len(),
                    n_failed: self
                        .cells
                        .iter()
                        .filter(|x| x.family == family && x.outcome.is_err())
                        .count(),
                    c_index_median: quantile(&c, 0.5),
                    c_index_q25: quantile(&c, 0.25),
                    c_index_q75: quantile(&c, 0.75),
                    ibs_median: quantile(&ibs, 0.5),
                    ibs_q25: quantile(&ibs, 0.25),
                    ibs_q75: quantile(&ibs, 0.75),
                }
            })
            .collect()
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: String, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("schema".into(), SUMMARY_SCHEMA.into());
        kv("master_seed".into(), self.config.master_seed.to_string());
        kv("n_datasets".into(), self.config.n_datasets.to_string());
        kv("replicates".into(), self.config.replicates.to_string());
        let families: Vec<&str> = self.config.families.iter().map(|f| f.as_str()).collect();
        kv("families".into(), families.join(","));
        kv("n_rows".into(), self.cells.len().to_string());
        kv(
            "n_failed".into(),
            self.cells
                .iter()
                .filter(|c| c.outcome.is_err())
                .count()
                .to_string(),
        );
        for a in self.aggregates() {
            let p = format!("aggregate.{}", a.family.as_str());
            kv(format!("{p}.n_ok"), a.n_ok.to_string());
            kv(format!("{p}.n_failed"), a.n_failed.to_string());
            kv(format!("{p}.c_index.median"), fmt_f64(a.c_index_median));
            kv(format!("{p}.c_index.q25"), fmt_f64(a.c_index_q25));
            kv(format!("{p}.c_index.q75"), fmt_f64(a.c_index_q75));
            kv(
                format!("{p}.c_index.iqr"),
                fmt_f64(a.c_index_q75 - a.c_index_q25),
            );
            kv(format!("{p}.ibs.median"), fmt_f64(a.ibs_median));
            kv(format!("{p}.ibs.q25"), fmt_f64(a.ibs_q25));
            kv(format!("{p}.ibs.q75"), fmt_f64(a.ibs_q75));
            kv(format!("{p}.ibs.iqr"), fmt_f64(a.ibs_q75 - a.ibs_q25));
        }
        for d in &self.datasets {
            let p = format!("dataset.{}", d.index);
            kv(
                format!("{p}.flagged_censored"),
                d.flagged_censored.to_string(),
            );
            kv(format!("{p}.flagged_fraction"), fmt_f64(d.flagged_fraction));
            kv(
                format!("{p}.administrative_censored"),
                d.administrative_censored.to_string(),
            );
            kv(
                format!("{p}.overall_censored_fraction"),
                fmt_f64(d.overall_censored_fraction),
            );
            kv(format!("{p}.oracle_c_index"), fmt_f64(d.oracle_c_index));
            kv(
                format!("{p}.baseline_cox_c_index"),
                fmt_f64(d.baseline_cox_c_index),
            );
            kv(
                format!("{p}.baseline_cox_beta"),
                fmt_f64(d.baseline_cox_beta),
            );
            kv(format!("{p}.km_ibs"), fmt_f64(d.km_ibs));
            kv(format!("{p}.oracle_ibs"), fmt_f64(d.oracle_ibs));
        }
        out
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "dataset,family,replicate,c_index,ibs,n_comparable_pairs,best_epoch,beta_hat,ll_correlation,error\n",
        );
        for c in &self.cells {
            let _ = write!(out, "{},{},{},", c.dataset, c.family.as_str(), c.replicate);
            match &c.outcome {
                Ok(m) => {
                    let beta = m
                        .beta_hat
                        .as_ref()
                        .map(|b| b.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";"))
                        .unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},",
                        fmt_f64(m.metrics.c_index),
                        fmt_f64(m.metrics.ibs),
                        m.metrics.n_comparable_pairs,
                        m.best_epoch,
                        beta,
                        fmt_f64(m.ll_correlation)
                    );
                }
                Err(msg) => {
                    let _ = writeln!(out, ",,,,,,\"{}\"", msg.replace('"', "'"));
                }
            }
        }
        out
    }

    pub fn datasets_csv(&self) -> String {
        let mut out = String::from(
            "dataset,seed,n_subjects,flagged_censored,flagged_fraction,administrative_censored,\
             overall_censored_fraction,n_test_events,oracle_c_index,oracle_ibs,km_ibs,\
             baseline_cox_beta,baseline_cox_c_index\n",
        );
        for d in &self.datasets {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                d.index,
                d.seed,
                d.n_subjects,
                d.flagged_censored,
                fmt_f64(d.flagged_fraction),
                d.administrative_censored,
                fmt_f64(d.overall_censored_fraction),
                d.n_test_events,
                fmt_f64(d.oracle_c_index),
                fmt_f64(d.oracle_ibs),
                fmt_f64(d.km_ibs),
                fmt_f64(d.baseline_cox_beta),
                fmt_f64(d.baseline_cox_c_index)
            );
        }
        out
    }

    fn per_cell_csv(&self, header: &str, mut rows: impl FnMut(&CellResult, &mut String)) -> String {
        let mut out = String::from(header);
        for c in &self.cells {
            rows(c, &mut out);
        }
        out
    }

    pub fn scatter_csv(&self) -> String {
        self.per_cell_csv("true_ll,pred_ll,dataset,family,replicate\n", |c, out| {
            if let Ok(m) = &c.outcome {
                for (t, p) in &m.scatter {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        fmt_f64(*t),
                        fmt_f64(*p),
                        c.dataset,
                        c.family.as_str(),
                        c.replicate
                    );
                }
            }
        })
    }

    pub fn training_curves_csv(&self) -> String {
        self.per_cell_csv(
            "dataset,family,replicate,epoch,train_loss,val_loss,val_c_index,val_ibs\n",
            |c, out| {
                if let Ok(m) = &c.outcome {
                    for r in &m.history {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},{},{}",
                            c.dataset,
                            c.family.as_str(),
                            c.replicate,
                            r.epoch,
                            fmt_f64(r.train_loss),
                            fmt_f64(r.val_loss),
                            fmt_f64(r.val_c_index),
                            r.val_ibs.map(fmt_f64).unwrap_or_default()
                        );
                    }
                }
            },
        )
    }

    pub fn brier_csv(&self) -> String {
        self.per_cell_csv("dataset,family,replicate,time,brier\n", |c, out| {
            if let Ok(m) = &c.outcome {
                for (t, b) in &m.metrics.brier {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        c.dataset,
                        c.family.as_str(),
                        c.replicate,
                        t,
                        fmt_f64(*b)
                    );
                }
            }
        })
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| SurvError::io(&path, e))?;
    Ok(path)
}

/// Writes every report file into `dir` (created if missing) and returns their paths.
pub fn emit_reports(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SurvError::io(dir, e))?;
    [
        ("summary.txt", report.summary_text()),
        ("metrics.csv", report.metrics_csv()),
        ("datasets.csv", report.datasets_csv()),
        ("scatter.csv", report.scatter_csv()),
        ("training_curves.csv", report.training_curves_csv()),
        ("brier.csv", report.brier_csv()),
        ("config.txt", report.config.to_text()),
    ]
    .iter()
    .map(|(name, contents)| write_file(dir, name, contents))
    .collect()
}
