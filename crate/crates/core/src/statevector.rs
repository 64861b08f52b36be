//! Exact dense state-vector simulation.
//!
//! Qubit 0 is the least-significant bit of the basis index, so the
//! two-qubit amplitude order is `|00⟩, |01⟩, |10⟩, |11⟩` where the right-most
//! character is qubit 0. Rotations follow the half-angle convention
//! `R_a(θ) = exp(-i θ σ_a / 2)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator will allocate (2^20 amplitudes, 16 MiB).
pub const MAX_QUBITS: usize = 20;

/// Tolerance used when validating externally supplied amplitudes.
const NORM_TOLERANCE: f64 = 1e-10;

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::CapExceeded {
            requested: n_qubits,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

/// A single gate of a [`Circuit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Gate {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    H { target: usize },
    Cnot { control: usize, target: usize },
    /// Multiplies the `|11⟩` component of (control, target) by `e^{i·angle}`.
    Cphase { control: usize, target: usize, angle: f64 },
    Swap { a: usize, b: usize },
}

impl Gate {
    /// Qubits touched by the gate.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Rx { target, .. } | Gate::Ry { target, .. } | Gate::Rz { target, .. } => {
                (target, None)
            }
            Gate::H { target } => (target, None),
            Gate::Cnot { control, target } | Gate::Cphase { control, target, .. } => {
                (target, Some(control))
            }
            Gate::Swap { a, b } => (a, Some(b)),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. }
            | Gate::Ry { angle, .. }
            | Gate::Rz { angle, .. }
            | Gate::Cphase { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Returns a copy with the rotation angle offset by `delta`. Gates without
    /// an angle are returned unchanged.
    pub fn shifted(self, delta: f64) -> Gate {
        match self {
            Gate::Rx { target, angle } => Gate::Rx { target, angle: angle + delta },
            Gate::Ry { target, angle } => Gate::Ry { target, angle: angle + delta },
            Gate::Rz { target, angle } => Gate::Rz { target, angle: angle + delta },
            Gate::Cphase { control, target, angle } => Gate::Cphase {
                control,
                target,
                angle: angle + delta,
            },
            g => g,
        }
    }

    pub fn inverse(self) -> Gate {
        match self {
            Gate::Rx { target, angle } => Gate::Rx { target, angle: -angle },
            Gate::Ry { target, angle } => Gate::Ry { target, angle: -angle },
            Gate::Rz { target, angle } => Gate::Rz { target, angle: -angle },
            Gate::Cphase { control, target, angle } => Gate::Cphase {
                control,
                target,
                angle: -angle,
            },
            g @ (Gate::H { .. } | Gate::Cnot { .. } | Gate::Swap { .. }) => g,
        }
    }

    /// Checks index bounds and control/target distinctness against a register size.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let (first, second) = self.qubits();
        for q in std::iter::once(first).chain(second) {
            if q >= n_qubits {
                return Err(Error::QubitIndex { index: q, n_qubits });
            }
        }
        if second == Some(first) {
            return Err(Error::invalid(format!(
                "two-qubit gate uses qubit {first} as both operands"
            )));
        }
        if let Some(a) = self.angle() {
            if !a.is_finite() {
                return Err(Error::invalid("gate angle must be finite"));
            }
        }
        Ok(())
    }
}

/// Ordered gate sequence on a fixed register size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        Ok(Circuit {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends every gate of `other`; register sizes must agree.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::shape(format!(
                "cannot append a {}-qubit circuit to a {}-qubit circuit",
                other.n_qubits, self.n_qubits
            )));
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// The formal inverse: reversed order, each gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(|g| g.inverse()).collect(),
        }
    }

    /// Copy of the circuit with the angle of gate `index` offset by `delta`.
    pub fn with_shifted_gate(&self, index: usize, delta: f64) -> Circuit {
        let mut out = self.clone();
        out.gates[index] = out.gates[index].shifted(delta);
        out
    }
}

/// Measured observable. Only single-qubit Pauli-Z readout is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Observable {
    PauliZ { qubit: usize },
}

impl Observable {
    pub fn qubit(&self) -> usize {
        match *self {
            Observable::PauliZ { qubit } => qubit,
        }
    }
}

/// Unit-norm vector of `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        QuantumState::basis(n_qubits, 0)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::invalid(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { n_qubits, amplitudes })
    }

    /// Wraps caller-supplied amplitudes, which must already be unit norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::shape(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite"));
        }
        let state = QuantumState { n_qubits, amplitudes };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies one gate in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::Rx { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let m = [
                    [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                    [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
                ];
                self.apply_single(target, &m);
            }
            Gate::Ry { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let m = [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ];
                self.apply_single(target, &m);
            }
            Gate::Rz { target, angle } => {
                let lo = Complex64::from_polar(1.0, -angle / 2.0);
                let hi = Complex64::from_polar(1.0, angle / 2.0);
                let bit = 1usize << target;
                for (k, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if k & bit == 0 { lo } else { hi };
                }
            }
            Gate::H { target } => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                let m = [[h, h], [h, -h]];
                self.apply_single(target, &m);
            }
            Gate::Cnot { control, target } => {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                for k in 0..self.amplitudes.len() {
                    if k & cbit != 0 && k & tbit == 0 {
                        self.amplitudes.swap(k, k | tbit);
                    }
                }
            }
            Gate::Cphase { control, target, angle } => {
                let mask = (1usize << control) | (1usize << target);
                let phase = Complex64::from_polar(1.0, angle);
                for (k, a) in self.amplitudes.iter_mut().enumerate() {
                    if k & mask == mask {
                        *a *= phase;
                    }
                }
            }
            Gate::Swap { a, b } => {
                let abit = 1usize << a;
                let bbit = 1usize << b;
                for k in 0..self.amplitudes.len() {
                    if k & abit != 0 && k & bbit == 0 {
                        self.amplitudes.swap(k, (k & !abit) | bbit);
                    }
                }
            }
        }
    }

    fn apply_single(&mut self, target: usize, m: &[[Complex64; 2]; 2]) {
        let bit = 1usize << target;
        for k in 0..self.amplitudes.len() {
            if k & bit == 0 {
                let a0 = self.amplitudes[k];
                let a1 = self.amplitudes[k | bit];
                self.amplitudes[k] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[k | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    /// Applies every gate of `circuit` in order.
    pub fn run(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::shape(format!(
                "{}-qubit circuit applied to a {}-qubit state",
                circuit.n_qubits, self.n_qubits
            )));
        }
        // gates were validated on push
        for g in &circuit.gates {
            self.apply_unchecked(g);
        }
        Ok(())
    }

    /// `Σ_k ±|a_k|²`, sign `+` where the observed qubit is 0.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        let qubit = obs.qubit();
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        let bit = 1usize << qubit;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| if k & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩ = Σ_k conj(self_k)·other_k`.
    pub fn inner_product(&self, other: &QuantumState) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::shape(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// Runs `circuit` on `|0…0⟩`.
pub fn run_from_zero(circuit: &Circuit) -> Result<QuantumState> {
    let mut state = QuantumState::zero(circuit.n_qubits())?;
    state.run(circuit)?;
    Ok(state)
}

/// Quantum Fourier transform as a Hadamard / controlled-phase ladder followed
/// by bit-reversal swaps, so that `|x⟩ ↦ N^{-1/2} Σ_k e^{2πi kx/N} |k⟩`.
pub fn qft_circuit(n_qubits: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits)?;
    for target in (0..n_qubits).rev() {
        c.push(Gate::H { target })?;
        for control in (0..target).rev() {
            let angle = PI / (1u64 << (target - control)) as f64;
            c.push(Gate::Cphase { control, target, angle })?;
        }
    }
    for i in 0..n_qubits / 2 {
        c.push(Gate::Swap { a: i, b: n_qubits - 1 - i })?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> QuantumState {
        let mut amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        QuantumState::from_amplitudes(amps).unwrap()
    }

    fn random_gate(n: usize, rng: &mut ChaCha8Rng) -> Gate {
        let angle = rng.gen_range(-2.0 * PI..2.0 * PI);
        let q = rng.gen_range(0..n);
        let mut other = rng.gen_range(0..n);
        if n > 1 {
            while other == q {
                other = rng.gen_range(0..n);
            }
        }
        let kind = if n > 1 { rng.gen_range(0..7) } else { rng.gen_range(0..4) };
        match kind {
            0 => Gate::Rx { target: q, angle },
            1 => Gate::Ry { target: q, angle },
            2 => Gate::Rz { target: q, angle },
            3 => Gate::H { target: q },
            4 => Gate::Cnot { control: other, target: q },
            5 => Gate::Cphase { control: other, target: q, angle },
            _ => Gate::Swap { a: q, b: other },
        }
    }

    #[test]
    fn zero_state_and_cap() {
        assert_eq!(QuantumState::zero(1).unwrap().amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(QuantumState::zero(2).unwrap().probabilities(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(QuantumState::zero(21), Err(Error::CapExceeded { requested: 21, .. })));
        assert!(matches!(QuantumState::zero(0), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn ry_pi_flips() {
        let mut s = QuantumState::zero(1).unwrap();
        s.apply(&Gate::Ry { target: 0, angle: PI }).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cnot_truth_table() {
        // |10⟩ in ket order means qubit 1 = 1, qubit 0 = 0 -> index 2 ... but the
        // control here is qubit 0, so prepare qubit 0 = 1 (index 1).
        let mut s = QuantumState::basis(2, 0b01).unwrap();
        s.apply(&Gate::Cnot { control: 0, target: 1 }).unwrap();
        assert_eq!(s, QuantumState::basis(2, 0b11).unwrap());
        let mut s = QuantumState::basis(2, 0b10).unwrap();
        s.apply(&Gate::Cnot { control: 0, target: 1 }).unwrap();
        assert_eq!(s, QuantumState::basis(2, 0b10).unwrap());
    }

    #[test]
    fn rx_half_pi_matches_matrix_product() {
        // independent 2x2 product: RX(θ) = [[cos θ/2, -i sin θ/2], [-i sin θ/2, cos θ/2]]
        let theta: f64 = PI / 2.0;
        let m = [
            [c((theta / 2.0).cos(), 0.0), c(0.0, -(theta / 2.0).sin())],
            [c(0.0, -(theta / 2.0).sin()), c((theta / 2.0).cos(), 0.0)],
        ];
        let v = [c(1.0, 0.0), c(0.0, 0.0)];
        let expected = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
        let mut s = QuantumState::zero(1).unwrap();
        s.apply(&Gate::Rx { target: 0, angle: theta }).unwrap();
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!((a - e).norm(), 0.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.amplitudes()[1].im, -FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn invalid_indices_rejected() {
        let mut s = QuantumState::zero(2).unwrap();
        assert!(matches!(
            s.apply(&Gate::H { target: 2 }),
            Err(Error::QubitIndex { index: 2, n_qubits: 2 })
        ));
        assert!(s.apply(&Gate::Cnot { control: 1, target: 1 }).is_err());
        let mut circ = Circuit::new(2).unwrap();
        assert!(circ.push(Gate::Swap { a: 0, b: 5 }).is_err());
    }

    #[test]
    fn run_bell_and_empty() {
        let circ =
            Circuit::from_gates(2, vec![Gate::H { target: 0 }, Gate::Cnot { control: 0, target: 1 }])
                .unwrap();
        let s = run_from_zero(&circ).unwrap();
        let p = s.probabilities();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[3], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[3].re, FRAC_1_SQRT_2, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let orig = random_state(3, &mut rng);
        let mut s = orig.clone();
        s.run(&Circuit::new(3).unwrap()).unwrap();
        assert_eq!(s, orig);

        let mut s = QuantumState::zero(3).unwrap();
        assert!(matches!(s.run(&circ), Err(Error::Shape(_))));
    }

    #[test]
    fn circuit_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let depth = rng.gen_range(0..=30);
            let gates = (0..depth).map(|_| random_gate(n, &mut rng)).collect();
            let circ = Circuit::from_gates(n, gates).unwrap();
            let orig = random_state(n, &mut rng);
            let mut s = orig.clone();
            s.run(&circ).unwrap();
            s.run(&circ.inverse()).unwrap();
            for (a, b) in s.amplitudes().iter().zip(orig.amplitudes()) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn unitarity_each_gate_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..700 {
            let mut s = random_state(4, &mut rng);
            s.apply(&random_gate(4, &mut rng)).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    fn dft_oracle(n: usize) -> Vec<Vec<Complex64>> {
        let dim = 1usize << n;
        let scale = 1.0 / (dim as f64).sqrt();
        (0..dim)
            .map(|k| {
                (0..dim)
                    .map(|x| {
                        let theta = 2.0 * PI * ((k * x) % dim) as f64 / dim as f64;
                        Complex64::from_polar(scale, theta)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn qft_matches_dft_matrix() {
        for n in 1..=4 {
            let qft = qft_circuit(n).unwrap();
            let dft = dft_oracle(n);
            for x in 0..1usize << n {
                let mut s = QuantumState::basis(n, x).unwrap();
                s.run(&qft).unwrap();
                for (k, amp) in s.amplitudes().iter().enumerate() {
                    assert!((amp - dft[k][x]).norm() < 1e-10, "n={n} x={x} k={k}");
                }
            }
        }
    }

    #[test]
    fn qft_single_qubit_is_hadamard() {
        let q = qft_circuit(1).unwrap();
        let mut s = QuantumState::basis(1, 1).unwrap();
        s.run(&q).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].re, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert!(qft_circuit(21).is_err());
    }

    #[test]
    fn expectation_z_values() {
        let z0 = Observable::PauliZ { qubit: 0 };
        assert_eq!(QuantumState::zero(1).unwrap().expectation(&z0).unwrap(), 1.0);
        assert_eq!(QuantumState::basis(1, 1).unwrap().expectation(&z0).unwrap(), -1.0);
        for theta in [0.3f64, 1.1, 2.7] {
            // oracle: RY(θ)|0⟩ = (cos θ/2, sin θ/2) -> cos² − sin²
            let (s, c) = (theta / 2.0).sin_cos();
            let oracle = c * c - s * s;
            let mut st = QuantumState::zero(1).unwrap();
            st.apply(&Gate::Ry { target: 0, angle: theta }).unwrap();
            assert_abs_diff_eq!(st.expectation(&z0).unwrap(), oracle, epsilon = 1e-14);
            assert_abs_diff_eq!(oracle, theta.cos(), epsilon = 1e-14);
        }
        let s = QuantumState::zero(2).unwrap();
        assert!(s.expectation(&Observable::PauliZ { qubit: 2 }).is_err());
    }

    #[test]
    fn expectation_agrees_with_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_state(3, &mut rng);
            for q in 0..3 {
                let via_p: f64 = s
                    .probabilities()
                    .iter()
                    .enumerate()
                    .map(|(k, p)| if k >> q & 1 == 0 { *p } else { -p })
                    .sum();
                let e = s.expectation(&Observable::PauliZ { qubit: q }).unwrap();
                assert!((e - via_p).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn inner_products() {
        let zero = QuantumState::zero(1).unwrap();
        let one = QuantumState::basis(1, 1).unwrap();
        assert_eq!(zero.inner_product(&one).unwrap(), c(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(4, &mut rng);
        assert!((s.inner_product(&s).unwrap() - c(1.0, 0.0)).norm() < 1e-10);
        assert!(zero.inner_product(&s).is_err());
    }

    #[test]
    fn overlap_equals_inverse_circuit_zero_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let ca = Circuit::from_gates(n, (0..12).map(|_| random_gate(n, &mut rng)).collect())
                .unwrap();
            let cb = Circuit::from_gates(n, (0..12).map(|_| random_gate(n, &mut rng)).collect())
                .unwrap();
            let a = run_from_zero(&ca).unwrap();
            let mut b = run_from_zero(&cb).unwrap();
            let overlap = a.inner_product(&b).unwrap().norm_sqr();
            b.run(&ca.inverse()).unwrap();
            assert!((overlap - b.probabilities()[0]).abs() < 1e-10);
            assert!(overlap <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn from_amplitudes_validation() {
        assert!(QuantumState::from_amplitudes(vec![c(1.0, 0.0); 3]).is_err());
        assert!(QuantumState::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(QuantumState::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).is_ok());
    }

    #[test]
    fn deterministic() {
        let q = qft_circuit(5).unwrap();
        let a = run_from_zero(&q).unwrap();
        let b = run_from_zero(&q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gate_serde_tagging() {
        let g = Gate::Cphase { control: 0, target: 2, angle: 0.5 };
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("\"kind\":\"CPHASE\""));
        assert_eq!(serde_json::from_str::<Gate>(&s).unwrap(), g);
    }

    proptest::proptest! {
        #[test]
        fn norm_preserved_for_random_angles(seed in 0u64..10_000, angle in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = random_state(3, &mut rng);
            for g in [
                Gate::Rx { target: 0, angle },
                Gate::Ry { target: 1, angle },
                Gate::Rz { target: 2, angle },
                Gate::Cphase { control: 2, target: 0, angle },
            ] {
                s.apply(&g).unwrap();
                proptest::prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }
}
