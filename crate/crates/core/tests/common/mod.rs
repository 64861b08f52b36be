#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use qmalware_core::pipeline::PipelineConfig;
use qmalware_core::preprocess::{fit_preprocess_capped, Dataset};
use qmalware_core::vqc::{TrainConfig, VqcArch, VqcModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Samples whose teacher probability lies within this distance of 0.5 are
/// rejected, so the labels have a margin the student can recover.
pub const TEACHER_MARGIN: f64 = 0.1;

/// 4-qubit, 2-layer teacher and `n` margin-filtered samples from U[-1.5, 1.5]⁴
/// labelled by it.
pub fn teacher_student_data(teacher_seed: u64, n: usize) -> (VqcModel, Dataset) {
    let teacher = VqcModel::random(VqcArch::angle(4, 2), teacher_seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100 + teacher_seed);
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let r: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
        if (teacher.probability(&r).unwrap() - 0.5).abs() >= TEACHER_MARGIN {
            rows.push(r);
        }
    }
    let labels = rows.iter().map(|r| teacher.forward(r).unwrap().label).collect();
    (teacher, Dataset::from_rows(rows, labels).unwrap())
}

pub fn student_config() -> TrainConfig {
    TrainConfig {
        epochs: 100,
        learning_rate: 0.05,
        seed: 7,
        ..TrainConfig::default()
    }
}

pub fn accuracy(model: &VqcModel, data: &Dataset) -> f64 {
    let hits = (0..data.len())
        .filter(|&i| model.forward(data.row(i)).unwrap().label == data.labels()[i])
        .count();
    hits as f64 / data.len() as f64
}

/// Pipeline config for the synthetic end-to-end run: 4 qubits, 2 layers.
pub fn synthetic_pipeline_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.seed = 11;
    cfg.circuit.n_qubits = 4;
    cfg.circuit.n_layers = 2;
    cfg.training.epochs = 100;
    cfg.training.learning_rate = 0.05;
    cfg.evaluation.test_fraction = 0.25;
    cfg.evaluation.bootstrap_iterations = 500;
    cfg
}

/// Raw 5-column memory-feature-like CSV whose labels come from a teacher VQC
/// applied to the preprocessed coordinates. Column `dup` is an affine copy of
/// `a` and is removed by correlation pruning.
pub fn write_synthetic_csv(path: &Path, cfg: &PipelineConfig, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = 40.0 + 12.0 * s[0];
            let b = 3.0 * (s[0] + 0.5 * s[1]);
            let c = 0.2 * (s[0] - s[1] + 0.4 * s[2]) + 7.0;
            let d = 150.0 * (0.3 * s[1] + 0.2 * s[2] + 0.1 * s[3]);
            vec![a, b, c, d, 2.0 * a + 1.0]
        })
        .collect();
    let raw = Dataset::new(
        ["a", "b", "c", "d", "dup"].iter().map(|s| s.to_string()).collect(),
        rows.clone(),
        vec![0; n],
    )
    .unwrap();
    let fitted = fit_preprocess_capped(&raw, &cfg.preprocess, cfg.circuit.max_features()).unwrap();
    let teacher = VqcModel::random(cfg.circuit.vqc_arch(), 4).unwrap();
    let mut out = String::from("a,b,c,d,dup,Class\n");
    for (row, z) in rows.iter().zip(fitted.data.features()) {
        let p = teacher.probability(z).unwrap();
        if (p - 0.5).abs() < TEACHER_MARGIN {
            continue;
        }
        let label = if p >= 0.5 { "Malware" } else { "Benign" };
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{label}", cells.join(",")).unwrap();
    }
    std::fs::write(path, out).unwrap();
}
