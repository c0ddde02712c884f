//! Optimal balance for a ramped fast-slow Hamiltonian toy model.
//!
//! The slow manifold series, the nudging iteration that approximates a
//! balanced state, a shooting solver for the same boundary value problem,
//! an exactly solvable oscillator and the rate diagnostics built on them.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvp;
pub mod diagnostics;
pub mod error;
pub mod integrate;
pub mod jet;
pub mod model;
pub mod nudging;
pub mod oracle;
mod quadrature;
pub mod ramp;
pub mod report;
pub mod series;
pub mod vecops;

pub use error::{Error, Result};
pub use model::{OscillatorSpec, PhaseState, PotentialSpec, SystemSpec};
pub use ramp::{RampKind, RampSpec};
