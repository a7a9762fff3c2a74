//! Covariate tables: synthetic ejection-fraction draws, delimited-file loading,
//! train/validation/test splitting and per-column standardization.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::numeric::rng_from_seed;

/// Reference split sizes of the source echocardiography cohort.
pub const REFERENCE_SPLIT_COUNTS: [usize; 3] = [7465, 1288, 1277];

pub const DEFAULT_EF_MEAN: f64 = 55.77;
pub const DEFAULT_EF_SD: f64 = 12.40;
pub const DEFAULT_EF_BOUNDS: (f64, f64) = (5.0, 90.0);

/// Mean and population standard deviation recorded when a column is standardized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    values: Array2<f64>,
    column_names: Vec<String>,
    standardization: Option<Vec<ColumnScale>>,
}

impl CovariateTable {
    pub fn new(values: Array2<f64>, column_names: Vec<String>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(SurvError::Shape(
                "covariate rows must have at least one column".into(),
            ));
        }
        if values.ncols() != column_names.len() {
            return Err(SurvError::Shape(format!(
                "{} columns but {} names",
                values.ncols(),
                column_names.len()
            )));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, col) = (idx / values.ncols(), idx % values.ncols());
            return Err(SurvError::Data {
                row: row + 1,
                column: column_names[col].clone(),
                message: "non-finite value".into(),
            });
        }
        Ok(Self {
            values,
            column_names,
            standardization: None,
        })
    }

    /// One-column table.
    pub fn from_column(name: &str, column: Vec<f64>) -> Result<Self> {
        let n = column.len();
        let values =
            Array2::from_shape_vec((n, 1), column).map_err(|e| SurvError::Shape(e.to_string()))?;
        Self::new(values, vec![name.to_string()])
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn standardization(&self) -> Option<&[ColumnScale]> {
        self.standardization.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), indices),
            column_names: self.column_names.clone(),
            standardization: self.standardization.clone(),
        }
    }

    /// Fits per-column (mean, population sd) and returns the standardized table.
    pub fn standardize(&self) -> Result<Self> {
        if self.n_rows() == 0 {
            return Err(SurvError::Parameter(
                "cannot standardize an empty table".into(),
            ));
        }
        let n = self.n_rows() as f64;
        let mut scales = Vec::with_capacity(self.n_cols());
        for (j, col) in self.values.columns().into_iter().enumerate() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd.is_nan() || sd <= 0.0 {
                return Err(SurvError::Parameter(format!(
                    "column '{}' has zero variance",
                    self.column_names[j]
                )));
            }
            scales.push(ColumnScale { mean, sd });
        }
        self.apply_standardization(&scales)
    }

    /// Applies previously recorded scales, e.g. training statistics to a test split.
    pub fn apply_standardization(&self, scales: &[ColumnScale]) -> Result<Self> {
        if scales.len() != self.n_cols() {
            return Err(SurvError::Shape(format!(
                "{} scales for {} columns",
                scales.len(),
                self.n_cols()
            )));
        }
        if let Some(bad) = scales.iter().position(|s| s.sd.is_nan() || s.sd <= 0.0) {
            return Err(SurvError::Parameter(format!(
                "recorded sd for column '{}' is not positive",
                self.column_names[bad]
            )));
        }
        let mut values = self.values.clone();
        for (mut col, s) in values.columns_mut().into_iter().zip(scales) {
            col.mapv_inplace(|v| (v - s.mean) / s.sd);
        }
        Ok(Self {
            values,
            column_names: self.column_names.clone(),
            standardization: Some(scales.to_vec()),
        })
    }

    /// Undoes the recorded standardization.
    pub fn unstandardize(&self) -> Result<Self> {
        let scales = self
            .standardization
            .as_ref()
            .ok_or_else(|| SurvError::Parameter("table carries no standardization".into()))?;
        let mut values = self.values.clone();
        for (mut col, s) in values.columns_mut().into_iter().zip(scales) {
            col.mapv_inplace(|v| v * s.sd + s.mean);
        }
        Ok(Self {
            values,
            column_names: self.column_names.clone(),
            standardization: None,
        })
    }
}

/// Draws `n` ejection-fraction values from a normal truncated to `[lo, hi]` by rejection.
pub fn synthesize_ef(
    n: usize,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<CovariateTable> {
    if n == 0 {
        return Err(SurvError::Parameter("n must be positive".into()));
    }
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(SurvError::Parameter(format!(
            "invalid bounds: lo={lo} >= hi={hi}"
        )));
    }
    if !(lo < mean && mean < hi) {
        return Err(SurvError::Parameter(format!(
            "mean {mean} outside ({lo}, {hi})"
        )));
    }
    if !sd.is_finite() || sd <= 0.0 {
        return Err(SurvError::Parameter(format!(
            "sd must be positive, got {sd}"
        )));
    }
    let normal = Normal::new(mean, sd).map_err(|e| SurvError::Parameter(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let column = (0..n)
        .map(|_| loop {
            let v = normal.sample(&mut rng);
            if (lo..=hi).contains(&v) {
                break v;
            }
        })
        .collect();
    CovariateTable::from_column("EF", column)
}

/// Reads the named columns, in file order, from a delimited file with a one-line header.
pub fn load_covariates(
    path: impl AsRef<Path>,
    columns: &[&str],
    delimiter: u8,
) -> Result<CovariateTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| SurvError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| SurvError::Schema(format!("{}: {e}", path.display())))?
        .clone();
    let positions = columns
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| {
                SurvError::Schema(format!("column '{name}' not found in {}", path.display()))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut flat = Vec::new();
    let mut n_rows = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| SurvError::Data {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        for (&pos, name) in positions.iter().zip(columns) {
            let cell = record.get(pos).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| SurvError::Data {
                row,
                column: name.to_string(),
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            if !value.is_finite() {
                return Err(SurvError::Data {
                    row,
                    column: name.to_string(),
                    message: "non-finite value".into(),
                });
            }
            flat.push(value);
        }
        n_rows += 1;
    }
    let values = Array2::from_shape_vec((n_rows, columns.len()), flat)
        .map_err(|e| SurvError::Shape(e.to_string()))?;
    CovariateTable::new(values, columns.iter().map(|s| s.to_string()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub labels: Vec<Split>,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.labels.iter().filter(|&&l| l == split).count()
    }
}

/// Split proportions matching the reference cohort counts.
pub fn reference_proportions() -> [f64; 3] {
    let total: usize = REFERENCE_SPLIT_COUNTS.iter().sum();
    REFERENCE_SPLIT_COUNTS.map(|c| c as f64 / total as f64)
}

/// Random permutation of `0..n` cut at cumulative-proportion boundaries.
pub fn make_splits(n: usize, proportions: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if proportions.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(SurvError::Parameter(
            "split proportions must be nonnegative".into(),
        ));
    }
    let total: f64 = proportions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SurvError::Parameter(format!(
            "split proportions sum to {total}, not 1"
        )));
    }
    if n == 0 || (proportions.iter().all(|&p| p > 0.0) && n < 3) {
        return Err(SurvError::Parameter(format!(
            "too few rows ({n}) for the requested splits"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    order.shuffle(&mut rng);

    let first = ((proportions[0] * n as f64).round() as usize).min(n);
    let second = (((proportions[0] + proportions[1]) * n as f64).round() as usize).clamp(first, n);
    let mut labels = vec![Split::Train; n];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = if pos < first {
            Split::Train
        } else if pos < second {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(SplitAssignment { labels, seed })
}
