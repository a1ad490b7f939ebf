use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which clause of the eventual-positivity characterisation failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerronClause {
    /// ρ(A) is not a positive eigenvalue.
    RhoNotPositiveEigenvalue,
    /// ρ(A) is not algebraically simple.
    NotSimple,
    /// The right eigenvector of ρ(A) cannot be scaled strictly positive.
    RightVectorNotPositive,
    /// The left eigenvector (eigenvector of Aᵀ) cannot be scaled strictly positive.
    LeftVectorNotPositive,
    /// ρ(A) does not strictly dominate every other eigenvalue in modulus.
    NotStrictlyDominant,
}

impl std::fmt::Display for PerronClause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PerronClause::RhoNotPositiveEigenvalue => {
                "spectral radius is not a positive eigenvalue"
            }
            PerronClause::NotSimple => "spectral radius is not a simple eigenvalue",
            PerronClause::RightVectorNotPositive => "right Perron vector is not strictly positive",
            PerronClause::LeftVectorNotPositive => "left Perron vector is not strictly positive",
            PerronClause::NotStrictlyDominant => {
                "spectral radius does not strictly dominate the other eigenvalues"
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entry ({row},{col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("adjacency matrix has nonzero diagonal entry at node {0}")]
    NonZeroDiagonal(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("eigen-decomposition did not converge")]
    EigenFailure,
    #[error("matrix is not eventually positive: {0}")]
    NotEventuallyPositive(PerronClause),
    #[error("forgetting factor {sigma} is below the spectral radius {rho}")]
    SigmaBelowRho { sigma: f64, rho: f64 },
    #[error("shift d = {d} is below the spectral radius {rho} of C")]
    ShiftBelowRho { d: f64, rho: f64 },
    #[error("forgetting factor of agent {agent} is {sigma}, must be positive")]
    NonPositiveSigma { agent: usize, sigma: f64 },

    #[error("gamma entry {index} is {value}, must be positive")]
    NonPositiveGamma { index: usize, value: f64 },
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("H(A) is not negative semidefinite (largest eigenvalue {0:e})")]
    NotNegativeSemidefinite(f64),
    #[error("matrix has a negative entry at ({row},{col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("sigma {sigma} must strictly exceed the spectral radius {rho}")]
    SigmaNotAboveRho { sigma: f64, rho: f64 },

    #[error("susceptibility of agent {agent} at x = {x} is {value}, outside [0,1]")]
    SusceptibilityOutOfRange { agent: usize, x: f64, value: f64 },
    #[error("state component {index} = {value} lies outside [-1,1]")]
    StateOutOfBox { index: usize, value: f64 },
    #[error("trajectory left the state box: {0}")]
    LeftBox(String),
    #[error("invalid integration option: {0}")]
    InvalidOptions(String),

    #[error("Lyapunov function undefined: component {component} = {value} outside its domain")]
    LyapunovDomain { component: usize, value: f64 },
    #[error("Lyapunov kind {0} requires missing parameter `{1}`")]
    LyapunovParams(&'static str, &'static str),

    #[error("prediction requires a valid stability certificate")]
    MissingCertificate,
    #[error("no theorem clause applies; cannot verify an unsupported prediction")]
    Unsupported,
}
