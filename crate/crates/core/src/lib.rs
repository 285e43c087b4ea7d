//! Control-pulse synthesis for unitary gates on bilinear quantum control
//! systems.
//!
//! The central algorithm is a Newton-Raphson root finder for the projected
//! matrix logarithm `P log(V† U_a(T))` of the gate error, globalised with a
//! trust region whose radius tracks the relative accuracy of the linear
//! model. A BFGS-GRAPE baseline minimising the squared geodesic error is
//! provided for comparison.
//!
//! Module map:
//!
//! * [`algebra`]: logarithm of unitaries, `dexp`/`dlog`, `su(N)` coordinates.
//! * [`model`]: control systems, pulse bases, spin-chain presets.
//! * [`propagation`]: piecewise-constant and Magnus-4 propagators.
//! * [`objective`]: residual, error metrics, Jacobian, ill-conditioning.
//! * [`trustregion`]: trust-region subproblem and radius control.
//! * [`solver`]: Newton-Raphson driver, initial-norm search, BFGS baseline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod propagation;
pub mod quadrature;
pub mod solver;
pub mod trustregion;

pub use error::{Error, Result};
pub use linalg::CMatrix;
