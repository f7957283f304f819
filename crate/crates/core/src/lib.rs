//! Numerical and exact tooling for polyharmonic problems
//! `(-Δ)^m u = f(u) + λ|u|^{p-1}u` with supercritical `f`.
//!
//! The crate is split along the lines of the analysis it supports:
//!
//! * [`exponents`] holds the exact-rational exponent calculus: the critical
//!   exponent, the integrability bootstrap chain, `γ`, `ν̲` and the
//!   nonexistence exponent `δ`.
//! * [`nonlinearity`] builds nonlinearities `f`, validates the small-amplitude
//!   hypotheses and produces the cut-off truncations `g_α`.
//! * [`operators`] discretizes `(-Δ)^m` under Dirichlet or Navier conditions.
//! * [`solver`] finds mountain-pass critical points and runs the existence
//!   pipeline.
//! * [`identity`] evaluates the Pucci–Serrin identity and the nonexistence
//!   sweep.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exponents;
pub mod identity;
pub mod nonlinearity;
pub mod operators;
pub mod quad;
pub mod report;
pub mod solver;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
