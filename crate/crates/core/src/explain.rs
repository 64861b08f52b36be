//! Feature attribution for the quantum classifiers.
//!
//! * [`grad_attribution`] differentiates the malicious probability with
//!   respect to each input angle using the parameter-shift rule on the
//!   encoding rotations, then applies a positive-gradient × input weighting.
//! * [`score_attribution`] is gradient-free occlusion: the confidence drop
//!   when one feature is replaced by a baseline value.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::check_features;
use crate::error::{Error, Result};
use crate::qkernel::SvmModel;
use crate::statevector::run_from_zero;
use crate::vqc::{Encoding, VqcModel};

/// Anything that maps a feature vector to `p(malicious)`.
pub trait ProbabilisticClassifier: Sync {
    fn probability(&self, x: &[f64]) -> Result<f64>;
}

impl ProbabilisticClassifier for VqcModel {
    fn probability(&self, x: &[f64]) -> Result<f64> {
        VqcModel::probability(self, x)
    }
}

impl ProbabilisticClassifier for SvmModel {
    fn probability(&self, x: &[f64]) -> Result<f64> {
        SvmModel::probability(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AttributionMethod {
    Grad,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub method: AttributionMethod,
    pub feature_indices: Vec<usize>,
    /// Signed scores: `∂p/∂x_j` for GRAD, confidence deltas for SCORE.
    pub scores: Vec<f64>,
    /// GRAD: `max(score_j, 0) · x_j`. SCORE: same as `scores`.
    pub weighted_scores: Vec<f64>,
    pub base_probability: f64,
}

/// Parameter-shift derivative of `p(malicious)` with respect to each input
/// feature. A feature repeated across feature-map blocks contributes one
/// shifted pair per occurrence.
pub fn grad_attribution(model: &VqcModel, x: &[f64]) -> Result<AttributionReport> {
    let spec = match &model.encoding {
        Encoding::Angle(spec) => *spec,
        Encoding::Amplitude => {
            return Err(Error::Unsupported(
                "gradient attribution needs angle-encoded inputs; use the SCORE method for \
                 amplitude-encoded models"
                    .into(),
            ))
        }
    };
    check_features(x)?;
    let circuit = model.full_circuit(x)?;
    let prob = |c: &crate::statevector::Circuit| -> Result<f64> {
        let e = run_from_zero(c)?.expectation(&model.readout)?;
        Ok((1.0 + e) / 2.0)
    };
    let base_probability = prob(&circuit)?.clamp(0.0, 1.0);
    let scores = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let mut total = 0.0;
            for pos in spec.gate_positions(j) {
                let plus = prob(&circuit.with_shifted_gate(pos, FRAC_PI_2))?;
                let minus = prob(&circuit.with_shifted_gate(pos, -FRAC_PI_2))?;
                total += 0.5 * (plus - minus);
            }
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;
    let weighted_scores = scores.iter().zip(x).map(|(s, v)| s.max(0.0) * v).collect();
    Ok(AttributionReport {
        method: AttributionMethod::Grad,
        feature_indices: (0..x.len()).collect(),
        scores,
        weighted_scores,
        base_probability,
    })
}

/// Occlusion attribution: `p(x) − p(x with x_j := baseline_j)`. The default
/// baseline is all zeros (the mean of standardized data).
pub fn score_attribution(
    model: &dyn ProbabilisticClassifier,
    x: &[f64],
    baseline: Option<&[f64]>,
) -> Result<AttributionReport> {
    check_features(x)?;
    let zeros = vec![0.0; x.len()];
    let baseline = baseline.unwrap_or(&zeros);
    if baseline.len() != x.len() {
        return Err(Error::shape(format!(
            "baseline has {} values, input has {}",
            baseline.len(),
            x.len()
        )));
    }
    let base_probability = model.probability(x)?;
    let scores = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let mut occluded = x.to_vec();
            occluded[j] = baseline[j];
            Ok(base_probability - model.probability(&occluded)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AttributionReport {
        method: AttributionMethod::Score,
        feature_indices: (0..x.len()).collect(),
        weighted_scores: scores.clone(),
        scores,
        base_probability,
    })
}

/// Features ordered by `|score|` descending, ties by ascending index.
pub fn rank_features(report: &AttributionReport, top_k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = report
        .feature_indices
        .iter()
        .copied()
        .zip(report.scores.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    ranked.truncate(top_k);
    ranked
}

fn feature_name(names: &[String], j: usize) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("f{j}"))
}

/// CSV with columns `feature_name,raw_score,weighted_score,rank` in input order.
pub fn write_report_csv(report: &AttributionReport, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let ranked = rank_features(report, report.scores.len());
    let mut rank = vec![0; report.scores.len()];
    for (r, (j, _)) in ranked.iter().enumerate() {
        if let Some(pos) = report.feature_indices.iter().position(|i| i == j) {
            rank[pos] = r + 1;
        }
    }
    let mut out = String::from("feature_name,raw_score,weighted_score,rank\n");
    for (pos, &j) in report.feature_indices.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            feature_name(names, j),
            report.scores[pos],
            report.weighted_scores[pos],
            rank[pos]
        )
        .expect("write to String");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Human-readable ranking of the top features.
pub fn summary(report: &AttributionReport, names: &[String], top_k: usize) -> String {
    let method = match report.method {
        AttributionMethod::Grad => "GRAD (parameter-shift input gradients)",
        AttributionMethod::Score => "SCORE (occlusion)",
    };
    let mut s = format!(
        "method: {method}\np(malicious) = {:.6}\n{:>4}  {:<24} {:>14} {:>14}\n",
        report.base_probability, "rank", "feature", "raw", "weighted"
    );
    for (r, (j, score)) in rank_features(report, top_k).into_iter().enumerate() {
        let pos = report.feature_indices.iter().position(|&i| i == j).unwrap_or(j);
        writeln!(
            s,
            "{:>4}  {:<24} {:>14.6e} {:>14.6e}",
            r + 1,
            feature_name(names, j),
            score,
            report.weighted_scores[pos]
        )
        .expect("write to String");
    }
    s
}
