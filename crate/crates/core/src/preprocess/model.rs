use serde::{Deserialize, Serialize};

use super::{fit_pca, fit_standardize, prune_correlated, remove_outliers, Dataset, Pca, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Number of principal components; `None` keeps every surviving column.
    pub pca_components: Option<usize>,
    pub correlation_threshold: f64,
    pub outlier_z: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            pca_components: None,
            correlation_threshold: 0.95,
            outlier_z: 5.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "correlation_threshold {} must lie in (0, 1]",
                self.correlation_threshold
            )));
        }
        if !(self.outlier_z > 0.0) {
            return Err(Error::Config(format!("outlier_z {} must be positive", self.outlier_z)));
        }
        if self.pca_components == Some(0) {
            return Err(Error::Config("pca_components must be >= 1".into()));
        }
        Ok(())
    }
}

/// The fitted chain, applied in order at inference time. Outlier removal is a
/// fit-time filter only and has no inference-time counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessModel {
    pub input_names: Vec<String>,
    pub standardize: Standardizer,
    pub restandardize: Standardizer,
    /// Columns (indices into the re-standardized output) surviving pruning.
    pub pruned_kept: Vec<usize>,
    pub pca: Pca,
    pub config: PreprocessConfig,
}

/// Result of fitting: the model, the transformed fit data, and the original
/// row indices that survived outlier removal.
#[derive(Debug, Clone)]
pub struct FittedPreprocess {
    pub model: PreprocessModel,
    pub data: Dataset,
    pub kept_rows: Vec<usize>,
    pub removed_rows: Vec<usize>,
    pub pruned_columns: Vec<String>,
}

pub fn fit_preprocess(data: &Dataset, cfg: &PreprocessConfig) -> Result<FittedPreprocess> {
    fit_preprocess_capped(data, cfg, usize::MAX)
}

/// Like [`fit_preprocess`], but when `pca_components` is unset keeps at most
/// `default_cap` components instead of every surviving column.
pub fn fit_preprocess_capped(data: &Dataset, cfg: &PreprocessConfig, default_cap: usize) -> Result<FittedPreprocess> {
    cfg.validate()?;
    let standardize = fit_standardize(data)?;
    let z = standardize.apply(data)?;
    let (filtered, removed_rows) = remove_outliers(&z, cfg.outlier_z)?;
    let kept_rows: Vec<usize> = (0..data.len()).filter(|i| !removed_rows.contains(i)).collect();
    let restandardize = fit_standardize(&filtered)?;
    let z2 = restandardize.apply(&filtered)?;
    if z2.n_features() == 0 {
        return Err(Error::degenerate("every feature column is constant"));
    }
    let (pruned, dropped) = prune_correlated(&z2, cfg.correlation_threshold)?;
    let pruned_kept: Vec<usize> = (0..z2.n_features()).filter(|j| !dropped.contains(j)).collect();
    let k = cfg
        .pca_components
        .unwrap_or_else(|| pruned.n_features().min(default_cap.max(1)));
    let pca = fit_pca(&pruned, k)?;
    let out = pca.apply(&pruned)?;
    Ok(FittedPreprocess {
        pruned_columns: dropped.iter().map(|&j| z2.feature_names()[j].clone()).collect(),
        model: PreprocessModel {
            input_names: data.feature_names().to_vec(),
            standardize,
            restandardize,
            pruned_kept,
            pca,
            config: cfg.clone(),
        },
        data: out,
        kept_rows,
        removed_rows,
    })
}

impl PreprocessModel {
    pub fn output_dim(&self) -> usize {
        self.pca.n_components()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let a = self.standardize.apply_row(row)?;
        let b = self.restandardize.apply_row(&a)?;
        let c: Vec<f64> = self.pruned_kept.iter().map(|&j| b[j]).collect();
        self.pca.project_row(&c)
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.feature_names() != self.input_names.as_slice() {
            return Err(Error::shape(format!(
                "input columns {:?} do not match the fitted columns {:?}",
                data.feature_names(),
                self.input_names
            )));
        }
        let rows = data
            .features()
            .iter()
            .map(|r| self.transform_row(r))
            .collect::<Result<Vec<_>>>()?;
        let names = (1..=self.output_dim()).map(|c| format!("pc{c}")).collect();
        data.with_features(names, rows)
    }
}
