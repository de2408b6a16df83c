//! Exact statevector simulation of one system qubit coupled to up to two
//! ancilla (meter) or probe qubits, with reproducible shot sampling and the
//! estimators used to read weak values off postselected measurement records.
//!
//! The crate is `no_std` and only needs `alloc`. All floating-point
//! transcendental functions go through `libm`, so results are bit-identical
//! across platforms for a fixed seed.
//!
//! Module map:
//!
//! - [`qstate`]: amplitudes, meter preparation, CNOT / CNOT^x and the weak
//!   `σz ⊗ σx` coupling.
//! - [`sampling`]: Born-rule outcome tables, counter-based multinomial shot
//!   sampling and postselection.
//! - [`analysis`]: rescaled and postselected estimators, error bars, weak
//!   values and first-order probability expressions.
//! - [`experiments`]: end-to-end protocols producing [`experiments::ExperimentReport`]s.

#![no_std]
#![forbid(unsafe_code)]
// Range checks are written as negated comparisons on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod qstate;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use num_complex::Complex64;
