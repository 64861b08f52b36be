use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Columns whose sample standard deviation falls below this are dropped.
pub const MIN_STD: f64 = 1e-12;

/// Per-column centering and scaling with the sample (n−1) standard deviation.
/// `means` and `std_devs` are aligned with `kept_columns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_dim: usize,
    pub kept_columns: Vec<usize>,
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

pub fn fit_standardize(data: &Dataset) -> Result<Standardizer> {
    let m = data.len();
    if m < 2 {
        return Err(Error::degenerate(format!(
            "standardization needs at least 2 rows, got {m}"
        )));
    }
    let mut kept_columns = Vec::new();
    let mut means = Vec::new();
    let mut std_devs = Vec::new();
    for j in 0..data.n_features() {
        let col = data.column(j);
        let mean = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let sd = var.sqrt();
        if sd >= MIN_STD {
            kept_columns.push(j);
            means.push(mean);
            std_devs.push(sd);
        }
    }
    Ok(Standardizer {
        input_dim: data.n_features(),
        kept_columns,
        means,
        std_devs,
    })
}

impl Standardizer {
    pub fn dropped_columns(&self) -> Vec<usize> {
        (0..self.input_dim)
            .filter(|j| !self.kept_columns.contains(j))
            .collect()
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim {
            return Err(Error::shape(format!(
                "row has {} features, standardizer expects {}",
                row.len(),
                self.input_dim
            )));
        }
        Ok(self
            .kept_columns
            .iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(&j, (mean, sd))| (row[j] - mean) / sd)
            .collect())
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let rows = data
            .features()
            .iter()
            .map(|r| self.apply_row(r))
            .collect::<Result<Vec<_>>>()?;
        let names = self
            .kept_columns
            .iter()
            .map(|&j| data.feature_names()[j].clone())
            .collect();
        data.with_features(names, rows)
    }
}
