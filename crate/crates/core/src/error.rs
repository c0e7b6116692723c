use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vertex {0} is not part of the region")]
    NotInRegion(String),
    #[error("operator supports overlap")]
    OverlappingSupport,
    #[error("kept sites are not a subset of the operator support")]
    KeepNotSubset,
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("spectrum is not strictly positive (min eigenvalue {0:.3e})")]
    NonPositiveSpectrum(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("weights are not normalized (sum {0})")]
    NotNormalized(f64),
    #[error("region too large: {sites} sites of dimension {d} exceed the {path} cap")]
    RegionTooLarge {
        sites: usize,
        d: usize,
        path: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("transition rule is not unital (defect {0:.3e})")]
    NotUnital(f64),
    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {last_step:.3e})")]
    NoConvergence { iterations: usize, last_step: f64 },
    #[error("iterate lost positivity (min eigenvalue {0:.3e})")]
    LostPositivity(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("strategy not applicable: {0}")]
    StrategyInapplicable(String),
    #[error("boundary branch not found: {0}")]
    BranchNotFound(String),
    #[error("child index {0} is outside 1..={1}")]
    InvalidChildIndex(usize, usize),
    #[error("projections are not central for this rule (defect {0:.3e})")]
    NotCentral(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
