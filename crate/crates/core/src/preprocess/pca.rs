use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Cyclic Jacobi stops once the off-diagonal Frobenius norm drops below this.
pub const JACOBI_TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order and the matching eigenvectors
/// (as `vectors[c]` = c-th eigenvector). Each eigenvector is signed so its
/// largest-magnitude component is positive (first such index on ties).
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::shape("eigen-decomposition needs a non-empty square matrix"));
    }
    for i in 0..n {
        for j in 0..i {
            if (matrix[i][j] - matrix[j][i]).abs() > 1e-9 * (1.0 + matrix[i][j].abs()) {
                return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let off_norm = |a: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for (i, row) in a.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if i != j {
                    s += x * x;
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) >= JACOBI_TOLERANCE {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&c| {
            let mut col: Vec<f64> = v.iter().map(|row| row[c]).collect();
            let mut best = 0;
            for (i, x) in col.iter().enumerate() {
                if x.abs() > col[best].abs() {
                    best = i;
                }
            }
            if col[best] < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    Ok((values, vectors))
}

/// Fitted principal-component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub means: Vec<f64>,
    /// `components[c]` is the c-th unit-length principal direction.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

/// Fits PCA on the sample covariance of `data`, keeping `k` components.
pub fn fit_pca(data: &Dataset, k: usize) -> Result<Pca> {
    let d = data.n_features();
    if k == 0 || k > d {
        return Err(Error::shape(format!("cannot keep {k} components of {d} features")));
    }
    let m = data.len();
    if m < 2 {
        return Err(Error::degenerate("PCA needs at least 2 rows"));
    }
    let means: Vec<f64> = (0..d)
        .map(|j| data.features().iter().map(|r| r[j]).sum::<f64>() / m as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for row in data.features() {
        for i in 0..d {
            let di = row[i] - means[i];
            for j in i..d {
                cov[i][j] += di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (m - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let (values, vectors) = symmetric_eigen(&cov)?;
    Ok(Pca {
        means,
        components: vectors.into_iter().take(k).collect(),
        explained_variance: values.into_iter().take(k).collect(),
    })
}

impl Pca {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.means.len() {
            return Err(Error::shape(format!(
                "row has {} features, PCA expects {}",
                row.len(),
                self.means.len()
            )));
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(row.iter().zip(&self.means)).map(|(w, (x, m))| w * (x - m)).sum())
            .collect())
    }

    /// Maps component scores back to centered input coordinates.
    pub fn reconstruct_centered(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.means.len()];
        for (c, s) in self.components.iter().zip(scores) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += s * w;
            }
        }
        out
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let rows = data
            .features()
            .iter()
            .map(|r| self.project_row(r))
            .collect::<Result<Vec<_>>>()?;
        let names = (1..=self.n_components()).map(|c| format!("pc{c}")).collect();
        data.with_features(names, rows)
    }
}
