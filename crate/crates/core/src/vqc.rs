//! Variational quantum classifier.
//!
//! A sample `x` is encoded (angle feature map or amplitude encoding), the
//! trainable ansatz `U(ϑ)` is applied, and `⟨Z⟩` on the readout qubit is
//! mapped to `p(malicious) = (1 + ⟨Z⟩) / 2`. Each ansatz layer applies
//! `RX, RY, RZ` to every qubit (three fresh parameters per qubit per layer)
//! followed by the entangling layer. Gradients use the parameter-shift rule
//! with shifts of ±π/2.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{amplitude_encode_into, feature_map_circuit, push_entangler, Entanglement, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::preprocess::Dataset;
use crate::statevector::{Circuit, Gate, Observable, QuantumState, MAX_QUBITS};

/// Upper bound on encoding blocks plus ansatz layers.
pub const MAX_DEPTH_BLOCKS: usize = 12;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the loss.
pub const BCE_CLAMP: f64 = 1e-9;

/// How features enter the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoding {
    Angle(FeatureMapSpec),
    Amplitude,
}

impl Encoding {
    fn depth_blocks(&self) -> usize {
        match self {
            Encoding::Angle(spec) => spec.repetitions,
            Encoding::Amplitude => 1,
        }
    }

    /// Largest feature count the encoding accepts on `n_qubits` qubits.
    pub fn max_features(&self, n_qubits: usize) -> usize {
        match self {
            Encoding::Angle(_) => n_qubits,
            Encoding::Amplitude => 1usize << n_qubits,
        }
    }
}

/// Architecture of a VQC without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqcArch {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub encoding: Encoding,
    #[serde(default)]
    pub entanglement: Entanglement,
}

impl VqcArch {
    /// Angle-encoded architecture with the default feature-map repetitions.
    pub fn angle(n_qubits: usize, n_layers: usize) -> Self {
        VqcArch {
            n_qubits,
            n_layers,
            encoding: Encoding::Angle(FeatureMapSpec::new(n_qubits)),
            entanglement: Entanglement::Ring,
        }
    }

    pub fn n_params(&self) -> usize {
        3 * self.n_qubits * self.n_layers
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::CapExceeded {
                requested: self.n_qubits,
                max: MAX_QUBITS,
            });
        }
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be >= 1".into()));
        }
        if let Encoding::Angle(spec) = &self.encoding {
            spec.validate()?;
            if spec.n_qubits != self.n_qubits {
                return Err(Error::Config(format!(
                    "feature map has {} qubits but the model has {}",
                    spec.n_qubits, self.n_qubits
                )));
            }
        }
        let depth = self.n_layers + self.encoding.depth_blocks();
        if depth > MAX_DEPTH_BLOCKS {
            return Err(Error::Config(format!(
                "circuit depth {depth} (ansatz layers + encoding blocks) exceeds the cap of {MAX_DEPTH_BLOCKS}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Gd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 0.01,
            batch_size: None,
            optimizer: Optimizer::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Probability of the malicious class and the thresholded label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability_malicious: f64,
    pub label: u8,
}

impl Prediction {
    /// Label 1 iff `p >= 0.5`.
    pub fn from_probability(p: f64) -> Self {
        Prediction {
            probability_malicious: p,
            label: u8::from(p >= 0.5),
        }
    }
}

/// A VQC with concrete parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub encoding: Encoding,
    #[serde(default)]
    pub entanglement: Entanglement,
    pub readout: Observable,
    pub params: Vec<f64>,
    pub seed: u64,
    /// Training settings that produced `params`, if trained.
    #[serde(default)]
    pub training: Option<TrainConfig>,
}

impl VqcModel {
    pub fn new(arch: VqcArch, params: Vec<f64>) -> Result<Self> {
        let model = VqcModel {
            n_qubits: arch.n_qubits,
            n_layers: arch.n_layers,
            encoding: arch.encoding,
            entanglement: arch.entanglement,
            readout: Observable::PauliZ { qubit: 0 },
            params,
            seed: 0,
            training: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Parameters drawn uniformly from `[-π, π]`.
    pub fn random(arch: VqcArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = init_params(arch.n_params(), &mut rng);
        let mut model = VqcModel::new(arch, params)?;
        model.seed = seed;
        Ok(model)
    }

    pub fn arch(&self) -> VqcArch {
        VqcArch {
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
            encoding: self.encoding,
            entanglement: self.entanglement,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let arch = self.arch();
        arch.validate()?;
        if self.params.len() != arch.n_params() {
            return Err(Error::shape(format!(
                "expected {} parameters (3 · {} qubits · {} layers), got {}",
                arch.n_params(),
                self.n_qubits,
                self.n_layers,
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        if self.readout.qubit() >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: self.readout.qubit(),
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    fn ring_len(&self) -> usize {
        match self.entanglement {
            Entanglement::Ring if self.n_qubits >= 2 => self.n_qubits,
            _ => 0,
        }
    }

    /// Gate index inside [`VqcModel::ansatz_circuit`] of each parameter.
    pub fn param_gate_positions(&self) -> Vec<usize> {
        let per_layer = 3 * self.n_qubits;
        let block = per_layer + self.ring_len();
        (0..self.params.len())
            .map(|i| (i / per_layer) * block + i % per_layer)
            .collect()
    }

    /// `U(ϑ)` as a circuit.
    pub fn ansatz_circuit(&self) -> Result<Circuit> {
        self.validate()?;
        let mut c = Circuit::new(self.n_qubits)?;
        for layer in self.params.chunks(3 * self.n_qubits) {
            for (target, p) in layer.chunks(3).enumerate() {
                c.push(Gate::Rx { target, angle: p[0] })?;
                c.push(Gate::Ry { target, angle: p[1] })?;
                c.push(Gate::Rz { target, angle: p[2] })?;
            }
            push_entangler(&mut c, self.n_qubits, self.entanglement)?;
        }
        Ok(c)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let max = self.encoding.max_features(self.n_qubits);
        if x.len() > max {
            return Err(Error::shape(format!(
                "{} features exceed the {max} the model accepts",
                x.len()
            )));
        }
        Ok(())
    }

    /// The encoded input state before the ansatz.
    pub fn encode(&self, x: &[f64]) -> Result<QuantumState> {
        self.check_input(x)?;
        match &self.encoding {
            Encoding::Angle(spec) => {
                let mut s = QuantumState::zero(self.n_qubits)?;
                s.run(&feature_map_circuit(x, spec)?)?;
                Ok(s)
            }
            Encoding::Amplitude => amplitude_encode_into(x, self.n_qubits),
        }
    }

    /// Encoding plus ansatz as a single circuit (angle encoding only). The
    /// feature-map gates come first, so their indices match
    /// [`FeatureMapSpec::gate_positions`].
    pub fn full_circuit(&self, x: &[f64]) -> Result<Circuit> {
        self.check_input(x)?;
        match &self.encoding {
            Encoding::Angle(spec) => {
                let mut c = feature_map_circuit(x, spec)?;
                c.append(&self.ansatz_circuit()?)?;
                Ok(c)
            }
            Encoding::Amplitude => Err(Error::Unsupported(
                "amplitude-encoded models have no gate-level input circuit".into(),
            )),
        }
    }

    /// `⟨O⟩` of the readout observable.
    pub fn expectation(&self, x: &[f64]) -> Result<f64> {
        let mut s = self.encode(x)?;
        s.run(&self.ansatz_circuit()?)?;
        s.expectation(&self.readout)
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(expectation_to_probability(self.expectation(x)?))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Prediction> {
        Ok(Prediction::from_probability(self.probability(x)?))
    }

    /// `∂⟨O⟩/∂ϑ_i` for every parameter by the parameter-shift rule.
    pub fn param_shift_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let encoded = self.encode(x)?;
        let ansatz = self.ansatz_circuit()?;
        let positions = self.param_gate_positions();
        positions
            .par_iter()
            .map(|&pos| {
                let eval = |delta: f64| -> Result<f64> {
                    let mut s = encoded.clone();
                    s.run(&ansatz.with_shifted_gate(pos, delta))?;
                    s.expectation(&self.readout)
                };
                Ok(0.5 * (eval(FRAC_PI_2)? - eval(-FRAC_PI_2)?))
            })
            .collect()
    }
}

pub fn expectation_to_probability(e: f64) -> f64 {
    ((1.0 + e) / 2.0).clamp(0.0, 1.0)
}

fn init_params(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-PI..=PI)).collect()
}

fn bce(p: f64, y: u8) -> f64 {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean binary cross-entropy over the dataset.
pub fn bce_loss(model: &VqcModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::degenerate("loss of an empty dataset"));
    }
    let losses = data
        .features()
        .par_iter()
        .zip(data.labels().par_iter())
        .map(|(x, &y)| Ok(bce(model.probability(x)?, y)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Loss and `∂loss/∂ϑ` for one sample, via `∂loss/∂p · ½ · ∂⟨Z⟩/∂ϑ`.
fn sample_gradient(model: &VqcModel, x: &[f64], y: u8) -> Result<(f64, Vec<f64>)> {
    let p = model.probability(x)?;
    let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let dloss_dp = if y == 1 { -1.0 / pc } else { 1.0 / (1.0 - pc) };
    let grad = model
        .param_shift_grad(x)?
        .into_iter()
        .map(|g| dloss_dp * 0.5 * g)
        .collect();
    Ok((bce(p, y), grad))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: VqcModel,
    /// Full-dataset loss after each epoch.
    pub loss_history: Vec<f64>,
}

/// Trains a VQC by minibatch (or full-batch) descent on the BCE loss.
/// Deterministic for a given `cfg.seed`.
pub fn train_vqc(data: &Dataset, arch: VqcArch, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    arch.validate()?;
    if data.is_empty() {
        return Err(Error::degenerate("training set is empty"));
    }
    let max = arch.encoding.max_features(arch.n_qubits);
    if data.n_features() > max {
        return Err(Error::shape(format!(
            "{} features exceed the {max} the architecture accepts",
            data.n_features()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = VqcModel::new(arch, init_params(arch.n_params(), &mut rng))?;
    model.seed = cfg.seed;
    model.training = Some(cfg.clone());

    let n_params = model.params.len();
    let mut first_moment = vec![0.0; n_params];
    let mut second_moment = vec![0.0; n_params];
    let mut step = 0i32;
    let batch = cfg.batch_size.unwrap_or(data.len()).min(data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        if batch < data.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let per_sample = chunk
                .par_iter()
                .map(|&i| sample_gradient(&model, data.row(i), data.labels()[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut grad = vec![0.0; n_params];
            for (_, g) in &per_sample {
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += v;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);

            step += 1;
            match cfg.optimizer {
                Optimizer::Gd => {
                    for (p, g) in model.params.iter_mut().zip(&grad) {
                        *p -= cfg.learning_rate * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, epsilon } => {
                    let bc1 = 1.0 - beta1.powi(step);
                    let bc2 = 1.0 - beta2.powi(step);
                    for i in 0..n_params {
                        let g = grad[i];
                        first_moment[i] = beta1 * first_moment[i] + (1.0 - beta1) * g;
                        second_moment[i] = beta2 * second_moment[i] + (1.0 - beta2) * g * g;
                        let m_hat = first_moment[i] / bc1;
                        let v_hat = second_moment[i] / bc2;
                        model.params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        loss_history.push(bce_loss(&model, data)?);
    }
    Ok(TrainOutcome { model, loss_history })
}
