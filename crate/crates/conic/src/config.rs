//! Solver configuration.

/// Which algorithm backs a [`crate::ConicProblem::solve`] call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    /// Interior-point first; fall back to the first-order method if the
    /// interior-point run is inconclusive.
    Auto,
    InteriorPoint,
    FirstOrder,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Absolute duality-gap tolerance.
    pub abs_tol: f64,
    /// Relative feasibility / gap tolerance.
    pub rel_tol: f64,
    /// Iteration cap for the interior-point path.
    pub max_iters_ipm: usize,
    /// Iteration cap for the first-order path.
    pub max_iters_admm: usize,
    /// Threshold on certificate residuals for declaring infeasibility.
    pub infeas_tol: f64,
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            max_iters_ipm: 200,
            max_iters_admm: 50_000,
            infeas_tol: 1e-8,
            method: SolverMethod::Auto,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), crate::ProblemError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.infeas_tol > 0.0) {
            return Err(crate::ProblemError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}
