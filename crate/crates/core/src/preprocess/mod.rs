//! Dataset ingestion and classical preprocessing.
//!
//! The fitted chain is: standardize → outlier removal → re-standardize →
//! correlation pruning → PCA. See [`fit_preprocess`].

mod dataset;
mod filters;
mod model;
mod pca;
mod split;
mod standardize;

pub use dataset::{load_csv, load_unlabeled_csv, write_csv, Dataset};
pub use filters::{pearson, prune_correlated, remove_outliers};
pub use model::{fit_preprocess, fit_preprocess_capped, FittedPreprocess, PreprocessConfig, PreprocessModel};
pub use pca::{fit_pca, symmetric_eigen, Pca, JACOBI_TOLERANCE};
pub use split::{split_indices, train_test_split};
pub use standardize::{fit_standardize, Standardizer, MIN_STD};
