//! A small dense conic solver for convex quadratic semidefinite programs.
//!
//! Problems combine a PSD quadratic objective, linear equalities and
//! inequalities, and complex-Hermitian PSD constraints (carried over the
//! reals through the standard `[[Re, -Im], [Im, Re]]` embedding). The
//! quadratic objective is reformulated as a second-order-cone epigraph, and
//! the resulting conic program is solved by a primal-dual interior-point
//! method on the homogeneous self-dual embedding, with a first-order
//! operator-splitting fallback.
//!
//! The solver is deterministic: identical problems and configurations
//! produce identical iterates.

mod admm;
mod cones;
mod config;
mod epigraph;
mod ipm;
mod linalg;
mod problem;
mod solution;
pub mod svec;

pub use config::{SolverConfig, SolverMethod};
pub use epigraph::{quadratic_epigraph, QuadraticFactor};
pub use problem::{ConicProblem, PsdBlock};
pub use solution::{ConicSolution, ResidualReport, SolveStatus};

/// Construction-time errors. Dimension inconsistencies are rejected when a
/// problem is built, never during a solve.
#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },
    #[error("objective matrix is not symmetric")]
    NotSymmetric,
    #[error("objective matrix is indefinite (min eigenvalue {min_eig:.3e})")]
    IndefiniteQuadratic { min_eig: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}
