//! Binary classification metrics and the statistical validation suite.
//!
//! Ratios with a zero denominator are `None` and print as `undefined`; they
//! are never reported as 0. Infinite t statistics serialize as the strings
//! `"inf"` / `"-inf"`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub const MIN_BOOTSTRAP_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_binary(name: &str, v: &[u8]) -> Result<()> {
    match v.iter().position(|&x| x > 1) {
        Some(i) => Err(Error::invalid(format!(
            "{name}[{i}] = {} is not a binary label",
            v[i]
        ))),
        None => Ok(()),
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("sequence lengths differ: {a} vs {b}")));
    }
    Ok(())
}

/// Label 1 (malicious) is the positive class.
pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    check_lengths(preds.len(), labels.len())?;
    check_binary("preds", preds)?;
    check_binary("labels", labels)?;
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("cannot compute metrics of an empty confusion matrix"));
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(MetricsReport {
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        fpr: ratio(cm.fp, cm.fp + cm.tn),
        fnr: ratio(cm.fn_, cm.fn_ + cm.tp),
        confusion: *cm,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance (n − 1 denominator).
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Sample standard deviation over mean; `None` when the mean is zero or
/// fewer than two values are given.
pub fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    (m != 0.0).then(|| variance(values).sqrt() / m.abs())
}

/// Linear interpolation between order statistics at rank `q · (n − 1)`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapReport {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub coeff_variation: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
}

/// Accuracy means of `iterations` resamples. Resample `b` draws its indices
/// from `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, so the result is
/// independent of thread scheduling.
pub fn bootstrap_means(per_sample_correct: &[u8], iterations: usize, seed: u64) -> Vec<f64> {
    let n = per_sample_correct.len();
    (0..iterations)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let hits: usize = (0..n).map(|_| per_sample_correct[rng.gen_range(0..n)] as usize).sum();
            hits as f64 / n as f64
        })
        .collect()
}

/// 95% percentile bootstrap interval of the accuracy.
pub fn bootstrap_ci(per_sample_correct: &[u8], iterations: usize, seed: u64) -> Result<BootstrapReport> {
    if per_sample_correct.is_empty() {
        return Err(Error::invalid("bootstrap needs at least one sample"));
    }
    if iterations < MIN_BOOTSTRAP_ITERATIONS {
        return Err(Error::invalid(format!(
            "bootstrap iterations must be at least {MIN_BOOTSTRAP_ITERATIONS}, got {iterations}"
        )));
    }
    check_binary("per_sample_correct", per_sample_correct)?;
    let mut means = bootstrap_means(per_sample_correct, iterations, seed);
    let coeff_variation = coefficient_of_variation(&means);
    means.sort_by(f64::total_cmp);
    let hits: usize = per_sample_correct.iter().map(|&c| c as usize).sum();
    Ok(BootstrapReport {
        mean: hits as f64 / per_sample_correct.len() as f64,
        ci_low: percentile(&means, 0.025),
        ci_high: percentile(&means, 0.975),
        coeff_variation,
        iterations,
        seed,
    })
}

/// `(mean(a) − mean(b)) / s_pooled` with the pooled sample standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("Cohen's d needs at least two values per group"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    Ok((pooled > 0.0).then(|| (mean(a) - mean(b)) / pooled))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    #[serde(serialize_with = "extended_f64")]
    pub t_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: usize,
}

fn extended_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Two-sided paired t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    check_lengths(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diff.len();
    let df = n - 1;
    let m = mean(&diff);
    let sd = variance(&diff).sqrt();
    let (t_statistic, p_value) = if sd == 0.0 {
        if m == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(m), 0.0)
        }
    } else {
        let t = m / (sd / (n as f64).sqrt());
        (t, student_t_two_sided(t, df as f64))
    };
    Ok(TTest {
        t_statistic,
        p_value,
        degrees_of_freedom: df,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `nu` degrees of freedom.
pub fn student_t_two_sided(t: f64, nu: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = nu / (nu + t * t);
    regularized_incomplete_beta(x, nu / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 terms).
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` via the modified Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Agreement between two binary label sequences beyond chance.
pub fn cohens_kappa(p1: &[u8], p2: &[u8]) -> Result<Option<f64>> {
    check_lengths(p1.len(), p2.len())?;
    check_binary("p1", p1)?;
    check_binary("p2", p2)?;
    if p1.is_empty() {
        return Err(Error::invalid("Cohen's kappa needs at least one pair"));
    }
    let n = p1.len() as f64;
    let agree = p1.iter().zip(p2).filter(|(a, b)| a == b).count() as f64;
    let ones1 = p1.iter().filter(|&&v| v == 1).count() as f64 / n;
    let ones2 = p2.iter().filter(|&&v| v == 1).count() as f64 / n;
    let p_o = agree / n;
    let p_e = ones1 * ones2 + (1.0 - ones1) * (1.0 - ones2);
    Ok((p_e < 1.0).then(|| (p_o - p_e) / (1.0 - p_e)))
}

/// Paired comparison of two classifiers on the same labelled samples:
/// t-test and effect size on per-sample correctness, kappa on the labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub t_test: TTest,
    pub cohens_d: Option<f64>,
    pub kappa: Option<f64>,
    pub accuracy_delta: f64,
}

pub fn compare(preds: &[u8], baseline: &[u8], labels: &[u8]) -> Result<Comparison> {
    check_lengths(preds.len(), labels.len())?;
    check_lengths(baseline.len(), labels.len())?;
    check_binary("preds", preds)?;
    check_binary("baseline", baseline)?;
    check_binary("labels", labels)?;
    let correct = |p: &[u8]| -> Vec<f64> {
        p.iter().zip(labels).map(|(a, b)| f64::from(u8::from(a == b))).collect()
    };
    let (a, b) = (correct(preds), correct(baseline));
    Ok(Comparison {
        t_test: paired_t_test(&a, &b)?,
        cohens_d: cohens_d(&a, &b)?,
        kappa: cohens_kappa(preds, baseline)?,
        accuracy_delta: mean(&a) - mean(&b),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub n_samples: usize,
    pub metrics: MetricsReport,
    pub bootstrap: BootstrapReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
}

pub fn evaluate(
    preds: &[u8],
    labels: &[u8],
    baseline: Option<&[u8]>,
    iterations: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let cm = confusion(preds, labels)?;
    let metrics = metrics(&cm)?;
    let correct: Vec<u8> = preds.iter().zip(labels).map(|(a, b)| u8::from(a == b)).collect();
    let bootstrap = bootstrap_ci(&correct, iterations, seed)?;
    let comparison = baseline.map(|b| compare(preds, b, labels)).transpose()?;
    Ok(EvaluationReport {
        n_samples: preds.len(),
        metrics,
        bootstrap,
        comparison,
    })
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width two-column table.
    pub fn to_table(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
        }
        fn num(v: f64) -> String {
            if v.is_finite() {
                format!("{v:.4}")
            } else if v > 0.0 {
                "+inf".into()
            } else {
                "-inf".into()
            }
        }
        let m = &self.metrics;
        let c = &m.confusion;
        let b = &self.bootstrap;
        let mut rows: Vec<(String, String)> = vec![
            ("samples".into(), self.n_samples.to_string()),
            ("accuracy".into(), cell(Some(m.accuracy))),
            ("precision".into(), cell(m.precision)),
            ("recall".into(), cell(m.recall)),
            ("f1".into(), cell(m.f1)),
            ("fpr".into(), cell(m.fpr)),
            ("fnr".into(), cell(m.fnr)),
            ("tp / fp / tn / fn".into(), format!("{} / {} / {} / {}", c.tp, c.fp, c.tn, c.fn_)),
            (
                format!("accuracy 95% CI ({} resamples)", b.iterations),
                format!("[{:.4}, {:.4}]", b.ci_low, b.ci_high),
            ),
            ("bootstrap CV".into(), cell(b.coeff_variation)),
        ];
        if let Some(cmp) = &self.comparison {
            rows.push(("accuracy delta vs baseline".into(), num(cmp.accuracy_delta)));
            rows.push(("paired t".into(), num(cmp.t_test.t_statistic)));
            rows.push(("p-value".into(), format!("{:.6}", cmp.t_test.p_value)));
            rows.push(("Cohen's d".into(), cell(cmp.cohens_d)));
            rows.push(("Cohen's kappa".into(), cell(cmp.kappa)));
        }
        let mut out = String::new();
        for (k, v) in rows {
            writeln!(out, "{k:<34} {v:>20}").expect("write to String");
        }
        out
    }
}
