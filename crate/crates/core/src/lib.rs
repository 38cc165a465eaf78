//! Predictor-corrector proximal multiplier (PCPM) solvers for
//! `min f(x) + g(z)` subject to `Ax = z` or `Ax + Bz = b`, together with the
//! proximal augmented Lagrangian machinery that explains them: explicit
//! proximal matrices, step-size bounds, and a dense reference ALM that the
//! solvers can be checked against iterate by iterate.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod prox;
pub(crate) mod serde_arrays;
pub mod solvers;
pub mod stepsize;

pub use error::{Error, Result};
pub use problem::{residuals, BlockReformulation, Form, ProblemInstance, SaddlePointResidual};
pub use prox::ProxFunction;
pub use solvers::{Algorithm, IterateState, RunReport, SolverConfig, Stepper};
