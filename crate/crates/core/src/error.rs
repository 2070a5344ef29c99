use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e} <= {threshold:e})")]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        threshold: f64,
    },
    #[error("matrix is not Hermitian (asymmetry {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("vector is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("invalid degrees of freedom: {0}")]
    InvalidDof(f64),
    #[error("negative non-centrality parameter: {0}")]
    NegativeNoncentrality(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("projection annihilated the surprise interference vector")]
    DegenerateQ,
    #[error("covariance pair does not satisfy the generalized eigenrelation")]
    NotGer,
    #[error("insufficient training samples: K = {k}, N = {n} ({reason})")]
    InsufficientSamples {
        k: usize,
        n: usize,
        reason: &'static str,
    },
    #[error("non-positive cumulant input: {0}")]
    NonPositiveCumulant(String),
    #[error("degenerate cumulants: k1*k3 - 2*k2^2 = {det:e}")]
    DegenerateCumulants { det: f64 },
    #[error("invalid fit: {0}")]
    InvalidFit(String),
    #[error("argument {0} outside the support (0, 1)")]
    OutOfSupport(f64),
    #[error("negative interference power: {0}")]
    NegativePower(f64),
    #[error("sample covariance matrix is singular")]
    SingularScm,
    #[error("too few samples: {got} < {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier used in CLI reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NoConvergence { .. } => "no_convergence",
            Error::NotUnitNorm { .. } => "not_unit_norm",
            Error::InvalidDof(_) => "invalid_dof",
            Error::NegativeNoncentrality(_) => "negative_noncentrality",
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::DegenerateQ => "degenerate_q",
            Error::NotGer => "not_ger",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::NonPositiveCumulant(_) => "non_positive_cumulant",
            Error::DegenerateCumulants { .. } => "degenerate_cumulants",
            Error::InvalidFit(_) => "invalid_fit",
            Error::OutOfSupport(_) => "out_of_support",
            Error::NegativePower(_) => "negative_power",
            Error::SingularScm => "singular_scm",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
