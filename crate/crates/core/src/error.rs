use thiserror::Error;

/// Every failure the simulator can surface.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dry state: depth {depth:e} <= 0")]
    DryState { depth: f64 },

    #[error("critical flow: g h - q^2/h^2 = {margin:e} <= 0")]
    CriticalFlow { margin: f64 },

    #[error("supercritical inflow: reconstructed boundary state has g h - q^2/h^2 = {margin:e}")]
    SupercriticalInflow { margin: f64 },

    #[error("no wet root for the {what} invariant equation")]
    NoSolution { what: &'static str },

    #[error("Lopatinskii matrix is singular (|det| = {det:e})")]
    Singular { det: f64 },

    #[error("boundary condition is not dissipative: kernel minimum {kernel_min:e} <= 0")]
    NotDissipative { kernel_min: f64 },

    #[error("dimension mismatch: {what} has {got} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("CFL violation: max|lambda| dt / dx = {courant:e} exceeds {limit:e}")]
    CflViolation { courant: f64, limit: f64 },

    #[error("assumption violated at t = {t:e}, x = {x:e}: {reason}")]
    AssumptionViolated { t: f64, x: f64, reason: String },

    #[error("Picard iteration did not converge after {iterations} iterations ({reason}; ratios {ratios:?})")]
    NoConvergence {
        iterations: usize,
        ratios: Vec<f64>,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Failures of the physical assumptions along a trajectory, as opposed to bad input.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::DryState { .. }
                | Error::CriticalFlow { .. }
                | Error::SupercriticalInflow { .. }
                | Error::NoSolution { .. }
                | Error::CflViolation { .. }
                | Error::AssumptionViolated { .. }
        )
    }
}
