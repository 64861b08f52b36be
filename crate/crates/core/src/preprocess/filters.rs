use super::Dataset;
use crate::error::{Error, Result};

/// Pearson correlation; 0 when either column has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Greedy scan in column order: a column is dropped when its |r| against any
/// earlier kept column reaches `threshold`. Returns the reduced dataset and
/// the dropped column indices.
pub fn prune_correlated(data: &Dataset, threshold: f64) -> Result<(Dataset, Vec<usize>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "correlation threshold {threshold} must lie in (0, 1]"
        )));
    }
    let columns: Vec<Vec<f64>> = (0..data.n_features()).map(|j| data.column(j)).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..columns.len() {
        // tolerance so an exact duplicate still reaches threshold 1.0
        let redundant = kept
            .iter()
            .any(|&k| pearson(&columns[k], &columns[j]).abs() >= threshold - 1e-12);
        if redundant {
            dropped.push(j);
        } else {
            kept.push(j);
        }
    }
    Ok((data.select_columns(&kept), dropped))
}

/// Removes rows with any |value| above `z_cap` (data is assumed standardized).
pub fn remove_outliers(data: &Dataset, z_cap: f64) -> Result<(Dataset, Vec<usize>)> {
    if !(z_cap > 0.0) {
        return Err(Error::invalid(format!("outlier cap {z_cap} must be positive")));
    }
    let (keep, removed): (Vec<usize>, Vec<usize>) = (0..data.len())
        .partition(|&i| data.row(i).iter().all(|v| v.abs() <= z_cap));
    if keep.is_empty() {
        return Err(Error::degenerate(format!(
            "outlier removal at |z| > {z_cap} would remove every row"
        )));
    }
    Ok((data.select_rows(&keep), removed))
}
