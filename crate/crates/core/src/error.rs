use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum CimError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A measured quadrature variance is too small to condition on.
    #[error("numerical degeneracy: measured variance {0:e} is not positive")]
    Degenerate(f64),

    /// An integration produced non-finite values.
    #[error("numerical divergence: {0}")]
    Divergence(String),

    /// The loss/outcoupling split cannot be realized.
    #[error("infeasible outcoupling: R_out = {0} must be < 1")]
    InfeasibleOutcoupling(f64),

    /// Input dimensions disagree.
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    /// A problem violated its structural invariants.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// Brute-force enumeration would exceed its budget.
    #[error("enumeration budget exceeded: n = {n} > {max}")]
    Budget { n: usize, max: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CimError>;
