//! Hybrid quantum-classical malware classification.
//!
//! An exact dense state-vector simulator backs two quantum classifiers: a
//! variational circuit trained with parameter-shift gradients ([`vqc`]) and a
//! support vector machine over the state-overlap kernel ([`qkernel`]). The
//! classical side covers feature preprocessing ([`preprocess`]), attribution
//! ([`explain`]), evaluation statistics ([`evalstats`]) and the end-to-end
//! experiment runner ([`pipeline`]).
//!
//! Conventions used throughout:
//!
//! * qubit 0 is the least-significant bit of a basis-state index;
//! * single-qubit rotations are `R_a(θ) = exp(-i θ σ_a / 2)`;
//! * label `1` means malicious, `0` benign, and probability ties at `0.5`
//!   resolve to malicious.

pub mod encoding;
pub mod error;
pub mod evalstats;
pub mod explain;
pub mod pipeline;
pub mod preprocess;
pub mod qkernel;
pub mod statevector;
pub mod vqc;

pub use error::{Error, Result};
