use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinlabError {
    #[error("ambient spaces differ")]
    SpaceMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("metric is not {0}")]
    BadMetric(&'static str),
    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("dimension cap exceeded: {0}")]
    TooLarge(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("kernel not localized: {0}")]
    NotLocalized(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("spectral collision: lambda = {lambda} within {margin} of eigenvalue {eigenvalue}")]
    SpectralCollision { lambda: f64, eigenvalue: f64, margin: f64 },
    #[error("gap condition violated: gap {gap} <= 2 delta = {two_delta}")]
    GapViolated { gap: f64, two_delta: f64 },
    #[error("mesh too coarse, refine: {0}")]
    RefineMesh(String),
    #[error("not an isomorphism: {0}")]
    NotIsomorphism(String),
    #[error("no regular value found after {0} attempts")]
    NoRegularValue(usize),
    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, SpinlabError>;
