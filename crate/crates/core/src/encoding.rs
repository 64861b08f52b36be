//! Classical-to-quantum data encodings.
//!
//! Two encodings are provided: amplitude encoding, which writes a normalized
//! feature vector directly into the amplitudes of a register, and the angle
//! feature map `|φ(x)⟩ = U_φ(x)|0…0⟩`, which feeds each feature to an `RY`
//! rotation followed by a circular CNOT ring, repeated a configurable number
//! of times. Feature values are used as radians without rescaling, so values
//! with `|x| > π` alias.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{run_from_zero, Circuit, Gate, QuantumState, MAX_QUBITS};

/// Vectors whose L2 norm is at or below this cannot be amplitude-encoded.
pub const MIN_ENCODABLE_NORM: f64 = 1e-12;

/// Entangling layout used after each rotation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entanglement {
    /// CNOT(q0→q1), CNOT(q1→q2), …, CNOT(q_{n-1}→q0).
    #[default]
    Ring,
    /// No entangling gates. Only useful for building models with provably
    /// disconnected qubits.
    None,
}

/// Appends the entangling layer for `n_qubits` qubits to `circuit`.
pub(crate) fn push_entangler(
    circuit: &mut Circuit,
    n_qubits: usize,
    entanglement: Entanglement,
) -> Result<()> {
    if entanglement == Entanglement::None || n_qubits < 2 {
        return Ok(());
    }
    for control in 0..n_qubits {
        circuit.push(Gate::Cnot {
            control,
            target: (control + 1) % n_qubits,
        })?;
    }
    Ok(())
}

/// Shape of the angle-encoding feature map `U_φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub n_qubits: usize,
    pub repetitions: usize,
    #[serde(default)]
    pub entanglement: Entanglement,
}

impl FeatureMapSpec {
    pub const DEFAULT_REPETITIONS: usize = 2;

    pub fn new(n_qubits: usize) -> Self {
        FeatureMapSpec {
            n_qubits,
            repetitions: Self::DEFAULT_REPETITIONS,
            entanglement: Entanglement::Ring,
        }
    }

    pub fn with_repetitions(mut self, repetitions: usize) -> Self {
        self.repetitions = repetitions;
        self
    }

    pub fn with_entanglement(mut self, entanglement: Entanglement) -> Self {
        self.entanglement = entanglement;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::CapExceeded {
                requested: self.n_qubits,
                max: MAX_QUBITS,
            });
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("feature map repetitions must be >= 1"));
        }
        Ok(())
    }

    /// Positions (gate indices within the feature-map circuit) of the `RY`
    /// gates that carry feature `j`, one per repetition.
    pub fn gate_positions(&self, feature: usize) -> Vec<usize> {
        let block = self.n_qubits + self.ring_len();
        (0..self.repetitions).map(|r| r * block + feature).collect()
    }

    fn ring_len(&self) -> usize {
        match self.entanglement {
            Entanglement::Ring if self.n_qubits >= 2 => self.n_qubits,
            _ => 0,
        }
    }
}

/// Rejects empty input and non-finite entries.
pub fn check_features(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::invalid("feature vector is empty"));
    }
    if let Some(j) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("feature {j} is not finite ({})", x[j])));
    }
    Ok(())
}

/// Amplitude encoding: zero-pads `x` to the next power of two (at least 2)
/// and divides by its L2 norm.
pub fn amplitude_encode(x: &[f64]) -> Result<QuantumState> {
    check_features(x)?;
    let dim = x.len().next_power_of_two().max(2);
    amplitude_encode_padded(x, dim)
}

/// Amplitude encoding into a register of exactly `n_qubits` qubits.
pub fn amplitude_encode_into(x: &[f64], n_qubits: usize) -> Result<QuantumState> {
    check_features(x)?;
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::CapExceeded {
            requested: n_qubits,
            max: MAX_QUBITS,
        });
    }
    let dim = 1usize << n_qubits;
    if x.len() > dim {
        return Err(Error::shape(format!(
            "{} features do not fit in {dim} amplitudes",
            x.len()
        )));
    }
    amplitude_encode_padded(x, dim)
}

fn amplitude_encode_padded(x: &[f64], dim: usize) -> Result<QuantumState> {
    if dim > 1usize << MAX_QUBITS {
        return Err(Error::CapExceeded {
            requested: dim.trailing_zeros() as usize,
            max: MAX_QUBITS,
        });
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= MIN_ENCODABLE_NORM {
        return Err(Error::degenerate(format!(
            "feature vector norm {norm:e} is too small to normalize"
        )));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for (a, v) in amps.iter_mut().zip(x) {
        *a = Complex64::new(v / norm, 0.0);
    }
    QuantumState::from_amplitudes(amps)
}

/// Builds `U_φ(x)`: per repetition, `RY(x_j)` on qubit `j` followed by the
/// entangling layer. Missing features (when `x` is shorter than the register)
/// get angle 0.
pub fn feature_map_circuit(x: &[f64], spec: &FeatureMapSpec) -> Result<Circuit> {
    spec.validate()?;
    check_features(x)?;
    if x.len() > spec.n_qubits {
        return Err(Error::shape(format!(
            "{} features exceed the {}-qubit feature map",
            x.len(),
            spec.n_qubits
        )));
    }
    let mut circuit = Circuit::new(spec.n_qubits)?;
    for _ in 0..spec.repetitions {
        for target in 0..spec.n_qubits {
            let angle = x.get(target).copied().unwrap_or(0.0);
            circuit.push(Gate::Ry { target, angle })?;
        }
        push_entangler(&mut circuit, spec.n_qubits, spec.entanglement)?;
    }
    Ok(circuit)
}

/// `|φ(x)⟩ = U_φ(x)|0…0⟩`.
pub fn apply_feature_map(x: &[f64], spec: &FeatureMapSpec) -> Result<QuantumState> {
    run_from_zero(&feature_map_circuit(x, spec)?)
}
