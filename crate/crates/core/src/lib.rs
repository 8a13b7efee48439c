//! Gradient methods for symmetric positive definite linear systems `Ax = b`.
//!
//! The crate provides the classical steplengths (steepest descent, minimal
//! gradient, asymptotically optimal, Barzilai-Borwein, Yuan), the cyclic
//! alignment schedules built from them (SDA, SDC, AOA, MGA, MGC), Krylov
//! baselines (CG, restarted GMRES), generators for the benchmark problem
//! families and an analysis layer that checks the asymptotic behaviour of the
//! minimal gradient iteration against closed-form limits.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod problems;
pub mod solver;
pub mod steps;

pub use error::{Error, Result};
pub use linalg::{QuadForms, SparseMatrix, SpectralModel};
pub use problems::{Problem, RngSeed};
pub use solver::{run_gradient, IterationTrace, SolveConfig, Status};
pub use steps::{StepRule, StepState};
