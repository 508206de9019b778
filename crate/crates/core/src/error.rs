use thiserror::Error;

/// Errors raised by the numerical kernels and the bound pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive-definite (pivot {0})")]
    NotPositiveDefinite(usize),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("integrand returned a non-finite value at x = {0}")]
    NonFiniteSample(f64),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("moments up to order {needed} are required, only {available} available")]
    InsufficientOrder { needed: usize, available: usize },

    #[error("smallest Hankel eigenvalue {value:e} at q = {q} is below the precision guard; raise the precision")]
    PrecisionExhausted { q: usize, value: f64 },

    #[error("density is not in the Szego class (f <= 0 at x = {0})")]
    NotInClass(f64),

    #[error("object has finite support ({atoms} atoms); its Hankel matrix is singular")]
    FiniteSupport { atoms: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scaling constant w = {w} lies outside the admissible window ({lower}, {upper})")]
    OutsideWindow { w: f64, lower: f64, upper: f64 },

    #[error("zero denominator meets a nonzero numerator at eigenpair ({0}, {1})")]
    SingularPair(usize, usize),

    #[error("OTF variance is zero")]
    ZeroVariance,

    #[error("truncated intensity is negative at x = {0}; raise the truncation order or shrink delta")]
    NegativeIntensity(f64),

    #[error("table input: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;
