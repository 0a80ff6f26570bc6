//! Solve results.

/// Outcome classification of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Primal solution feasible to tolerance, gap closed.
    Optimal,
    /// A primal-infeasibility certificate was found.
    Infeasible,
    /// A dual-infeasibility certificate was found (primal unbounded below).
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

/// Normalized residuals of the returned iterate.
#[derive(Clone, Copy, Debug, Default)]
pub struct ResidualReport {
    /// Primal feasibility residual, relative.
    pub primal: f64,
    /// Dual feasibility residual, relative.
    pub dual: f64,
    /// Absolute complementarity gap.
    pub gap: f64,
    /// Gap relative to the objective scale.
    pub rel_gap: f64,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Decision vector (the caller's variables; auxiliary epigraph
    /// variables are stripped).
    pub primal: Vec<f64>,
    /// Objective of the original problem evaluated at `primal`.
    pub objective: f64,
    pub residuals: ResidualReport,
    pub iterations: usize,
}
