//! Quantum kernel `K(x_i, x_j) = |⟨0|U_φ†(x_i) U_φ(x_j)|0⟩|²` and a soft-margin
//! SVM trained on the precomputed Gram matrix with SMO.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{feature_map_circuit, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::statevector::run_from_zero;

/// Tolerance for the symmetry, diagonal and range checks on Gram matrices.
pub const KERNEL_TOLERANCE: f64 = 1e-10;

/// Curvature floor for pair updates along flat directions.
const TAU: f64 = 1e-12;

/// Runs `U_φ(x_j)` then `U_φ(x_i)†` from `|0…0⟩` and returns the probability
/// of measuring all zeros.
pub fn kernel_entry(x_i: &[f64], x_j: &[f64], spec: &FeatureMapSpec) -> Result<f64> {
    let mut circuit = feature_map_circuit(x_j, spec)?;
    circuit.append(&feature_map_circuit(x_i, spec)?.inverse())?;
    let state = run_from_zero(&circuit)?;
    Ok(state.amplitudes()[0].norm_sqr())
}

/// Symmetric Gram matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl KernelMatrix {
    /// Wraps a row-major `size × size` matrix after checking the invariants.
    pub fn from_entries(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size == 0 || entries.len() != size * size {
            return Err(Error::shape(format!(
                "{} entries do not form a non-empty {size}×{size} matrix",
                entries.len()
            )));
        }
        let k = KernelMatrix { size, entries };
        k.validate()?;
        Ok(k)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    /// Symmetry, unit diagonal and entry range.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.size {
            let d = self.get(i, i);
            if (d - 1.0).abs() > KERNEL_TOLERANCE {
                return Err(Error::Numerical(format!("diagonal entry ({i}, {i}) = {d}")));
            }
            for j in 0..self.size {
                let v = self.get(i, j);
                if !(-KERNEL_TOLERANCE..=1.0 + KERNEL_TOLERANCE).contains(&v) {
                    return Err(Error::Numerical(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
                }
                if (v - self.get(j, i)).abs() > KERNEL_TOLERANCE {
                    return Err(Error::Numerical(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    /// Writes the matrix as headerless row-major CSV at full precision.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.size {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Gram matrix over `rows`: upper triangle evaluated in parallel, then mirrored.
pub fn kernel_matrix(rows: &[Vec<f64>], spec: &FeatureMapSpec) -> Result<KernelMatrix> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::degenerate("kernel matrix of an empty dataset"));
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| kernel_entry(&rows[i], &rows[j], spec))
        .collect::<Result<Vec<f64>>>()?;
    let mut entries = vec![0.0; m * m];
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[i * m + j] = v;
        entries[j * m + i] = v;
    }
    KernelMatrix::from_entries(m, entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_passes: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            tolerance: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl SmoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C = {} must be positive", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("SMO tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::Config("SMO max_passes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoStatus {
    Converged,
    /// Stopped at `max_passes` before the KKT gap closed; the model is usable
    /// but may be suboptimal.
    MaxPassesReached,
}

/// Trained kernel SVM. `dual_coeffs[k] = α_k · y_k` for support vector `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    pub feature_map: FeatureMapSpec,
    pub smo: SmoConfig,
    pub status: SmoStatus,
}

impl SvmModel {
    /// `Σ_k coef_k · K(sv_k, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let mut f = self.bias;
        for (coef, sv) in self.dual_coeffs.iter().zip(&self.support_vectors) {
            f += coef * kernel_entry(sv, x, &self.feature_map)?;
        }
        Ok(f)
    }

    /// Label 1 iff the decision value is `>= 0`.
    pub fn predict_label(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.decision(x)? >= 0.0))
    }

    /// Logistic squashing `1 / (1 + e^{-f})` with unit scale.
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(logistic(self.decision(x)?))
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_map.validate()?;
        self.smo.validate()?;
        let k = self.dual_coeffs.len();
        if self.support_indices.len() != k || self.support_vectors.len() != k {
            return Err(Error::shape("support vector arrays have different lengths"));
        }
        if !self.bias.is_finite() || self.dual_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("SVM coefficients must be finite"));
        }
        Ok(())
    }
}

pub fn logistic(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

/// Solver output with diagnostics.
#[derive(Debug, Clone)]
pub struct SmoOutcome {
    /// `α_i` for every training point.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub status: SmoStatus,
    pub iterations: usize,
    /// Dual objective `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij` after each pair update,
    /// starting from the initial value 0.
    pub objective_history: Vec<f64>,
}

/// Dual objective from the gradient `G = Qα − e`: `Σα − ½αᵀQα = ½ Σ α_t (1 − G_t)`.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>()
}

/// Solves `max Σα − ½ αᵀQα` s.t. `0 ≤ α ≤ C`, `Σ α_i y_i = 0` where
/// `Q_ij = y_i y_j K_ij`, picking the maximal-violating pair each iteration.
/// `labels` are ±1.
pub fn smo_solve(k: &KernelMatrix, labels: &[i8], cfg: &SmoConfig) -> Result<SmoOutcome> {
    cfg.validate()?;
    let m = k.size();
    if labels.len() != m {
        return Err(Error::shape(format!("{} labels for a {m}×{m} kernel", labels.len())));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::invalid("SVM labels must be +1 or -1"));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::invalid("SVM training needs both classes"));
    }
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let c = cfg.c;
    let mut alpha = vec![0.0; m];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; m];
    let mut history = vec![0.0];
    let mut status = SmoStatus::MaxPassesReached;
    let mut iterations = 0;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    while iterations < cfg.max_passes {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..m {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < cfg.tolerance {
            status = SmoStatus::Converged;
            break;
        }
        iterations += 1;

        let (qii, qjj, qij) = (k.get(i, i), k.get(j, j), y[i] * y[j] * k.get(i, j));
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        if y[i] != y[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_ai = alpha[i] - old_ai;
        let d_aj = alpha[j] - old_aj;
        for t in 0..m {
            grad[t] += y[t] * (y[i] * k.get(t, i) * d_ai + y[j] * k.get(t, j) * d_aj);
        }
        history.push(dual_objective(&alpha, &grad));
    }

    // b = −ρ, ρ averaged over free vectors, else the midpoint of the feasible range
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for t in 0..m {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            n_free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            upper = upper.min(yg);
        } else {
            lower = lower.max(yg);
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else if upper.is_finite() && lower.is_finite() {
        (upper + lower) / 2.0
    } else if upper.is_finite() {
        upper
    } else {
        lower
    };

    Ok(SmoOutcome {
        alphas: alpha,
        bias: -rho,
        status,
        iterations,
        objective_history: history,
    })
}

/// Trains the kernel SVM on a precomputed Gram matrix over `rows`.
pub fn train_qsvm(
    k: &KernelMatrix,
    rows: &[Vec<f64>],
    labels: &[i8],
    spec: FeatureMapSpec,
    cfg: &SmoConfig,
) -> Result<(SvmModel, SmoOutcome)> {
    if rows.len() != k.size() {
        return Err(Error::shape(format!(
            "{} training rows for a {}×{} kernel",
            rows.len(),
            k.size(),
            k.size()
        )));
    }
    let outcome = smo_solve(k, labels, cfg)?;
    let support_indices: Vec<usize> = (0..rows.len()).filter(|&t| outcome.alphas[t] > 0.0).collect();
    let model = SvmModel {
        dual_coeffs: support_indices
            .iter()
            .map(|&t| outcome.alphas[t] * f64::from(labels[t]))
            .collect(),
        bias: outcome.bias,
        support_vectors: support_indices.iter().map(|&t| rows[t].clone()).collect(),
        support_indices,
        feature_map: spec,
        smo: *cfg,
        status: outcome.status,
    };
    Ok((model, outcome))
}

/// Maps 0/1 labels to ∓1.
pub fn signed_labels(labels: &[u8]) -> Vec<i8> {
    labels.iter().map(|&y| if y == 1 { 1 } else { -1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::apply_feature_map;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(m: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..m).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn self_kernel_is_one_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = FeatureMapSpec::new(3);
        for _ in 0..10 {
            let rows = random_rows(2, 3, &mut rng);
            assert_abs_diff_eq!(kernel_entry(&rows[0], &rows[0], &spec).unwrap(), 1.0, epsilon = 1e-10);
            let a = kernel_entry(&rows[0], &rows[1], &spec).unwrap();
            let b = kernel_entry(&rows[1], &rows[0], &spec).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn kernel_equals_state_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = FeatureMapSpec::new(4);
        for _ in 0..20 {
            let rows = random_rows(2, 4, &mut rng);
            let a = apply_feature_map(&rows[0], &spec).unwrap();
            let b = apply_feature_map(&rows[1], &spec).unwrap();
            let oracle = a.inner_product(&b).unwrap().norm_sqr();
            assert_abs_diff_eq!(kernel_entry(&rows[0], &rows[1], &spec).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn scaled_inputs_still_valid() {
        let spec = FeatureMapSpec::new(2);
        let v = kernel_entry(&[30.0, -12.0], &[0.1, 7.0], &spec).unwrap();
        assert!((0.0..=1.0 + 1e-10).contains(&v));
    }

    #[test]
    fn gram_matrix_shapes() {
        let spec = FeatureMapSpec::new(2);
        let k = kernel_matrix(&[vec![0.3, 0.1]], &spec).unwrap();
        assert_eq!(k.size(), 1);
        assert_abs_diff_eq!(k.get(0, 0), 1.0, epsilon = 1e-10);

        let rows = vec![vec![0.3, 0.1], vec![-1.0, 0.4], vec![0.3, 0.1]];
        let k = kernel_matrix(&rows, &spec).unwrap();
        assert_abs_diff_eq!(k.get(0, 2), 1.0, epsilon = 1e-10);
        assert!(kernel_matrix(&[], &spec).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(KernelMatrix::from_entries(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(KernelMatrix::from_entries(2, vec![1.0, 0.5, 0.5, 0.9]).is_err());
        assert!(KernelMatrix::from_entries(2, vec![1.0, 1.5, 1.5, 1.0]).is_err());
        assert!(KernelMatrix::from_entries(2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn two_point_closed_form() {
        // dual: max 2α − α² with α₁ = α₂ = α → α = 1, b = 0, f(x_i) = y_i
        let k = KernelMatrix::from_entries(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let cfg = SmoConfig {
            c: 10.0,
            ..Default::default()
        };
        let out = smo_solve(&k, &[1, -1], &cfg).unwrap();
        assert_eq!(out.status, SmoStatus::Converged);
        assert_abs_diff_eq!(out.alphas[0], out.alphas[1], epsilon = 1e-12);
        assert_abs_diff_eq!(out.alphas[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.bias, 0.0, epsilon = 1e-9);
        let f0 = out.alphas[0] * k.get(0, 0) - out.alphas[1] * k.get(0, 1) + out.bias;
        let f1 = out.alphas[0] * k.get(1, 0) - out.alphas[1] * k.get(1, 1) + out.bias;
        assert!(f0 > 0.0 && f1 < 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let k = KernelMatrix::from_entries(2, vec![1.0, 0.2, 0.2, 1.0]).unwrap();
        assert!(matches!(smo_solve(&k, &[1, 1], &SmoConfig::default()), Err(Error::InvalidInput(_))));
        assert!(smo_solve(&k, &[1], &SmoConfig::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_status() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = random_rows(10, 2, &mut rng);
        let spec = FeatureMapSpec::new(2);
        let k = kernel_matrix(&rows, &spec).unwrap();
        let labels: Vec<i8> = (0..10).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let cfg = SmoConfig {
            c: 100.0,
            tolerance: 1e-3,
            max_passes: 1,
        };
        let (model, out) = train_qsvm(&k, &rows, &labels, spec, &cfg).unwrap();
        assert_eq!(out.status, SmoStatus::MaxPassesReached);
        assert_eq!(out.iterations, 1);
        assert!(model.validate().is_ok());
    }

    #[test]
    fn empty_support_decision_is_bias() {
        let model = SvmModel {
            dual_coeffs: vec![],
            bias: -0.25,
            support_indices: vec![],
            support_vectors: vec![],
            feature_map: FeatureMapSpec::new(2),
            smo: SmoConfig::default(),
            status: SmoStatus::Converged,
        };
        assert_eq!(model.decision(&[0.4, 1.0]).unwrap(), -0.25);
        assert_eq!(model.predict_label(&[0.4, 1.0]).unwrap(), 0);
        let zero_bias = SvmModel { bias: 0.0, ..model };
        assert_eq!(zero_bias.predict_label(&[0.4, 1.0]).unwrap(), 1);
        assert_eq!(zero_bias.probability(&[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn solution_is_feasible_and_objective_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = FeatureMapSpec::new(3);
        let rows = random_rows(12, 3, &mut rng);
        let labels: Vec<i8> = rows.iter().map(|r| if r[0] + r[1] > 0.0 { 1 } else { -1 }).collect();
        let k = kernel_matrix(&rows, &spec).unwrap();
        let cfg = SmoConfig {
            c: 2.0,
            ..Default::default()
        };
        let out = smo_solve(&k, &labels, &cfg).unwrap();
        let balance: f64 = out.alphas.iter().zip(&labels).map(|(a, &y)| a * f64::from(y)).sum();
        assert!(balance.abs() < 1e-6);
        assert!(out.alphas.iter().all(|&a| (0.0..=cfg.c).contains(&a)));
        for w in out.objective_history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        // direct evaluation of the final objective
        let mut quad = 0.0;
        for i in 0..12 {
            for j in 0..12 {
                quad += out.alphas[i] * out.alphas[j] * f64::from(labels[i] * labels[j]) * k.get(i, j);
            }
        }
        let direct = out.alphas.iter().sum::<f64>() - 0.5 * quad;
        assert_abs_diff_eq!(*out.objective_history.last().unwrap(), direct, epsilon = 1e-9);
    }
}
