//! Error type shared by the whole crate.

use crate::spectral::Resonance;
use crate::C64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("nvars mismatch: {0} vs {1}")]
    NvarsMismatch(usize, usize),
    #[error("order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("linear part is singular")]
    SingularLinearPart,
    #[error("constant term must vanish (component {0})")]
    NonzeroConstantTerm(usize),
    #[error("matrix dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is singular")]
    SingularMatrix,

    #[error("spectrum must lie in the open left half-plane; found eigenvalue {0}")]
    NonNegativeSpectrum(C64),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("linear part differs from exp(2*pi*i*A) by {0:.3e}")]
    LinearPartMismatch(f64),
    #[error("zero divisor at x^{xdeg} y^{j:?} -> component {k}")]
    ZeroDivisor { xdeg: usize, j: Vec<usize>, k: usize },

    #[error("first component must be the identity in x")]
    XNotFixed,
    #[error("linear part does not commute with its diagonal (residual {0:.3e})")]
    NotNormalized(f64),
    #[error("linear part of the vector field is not nilpotent")]
    NonNilpotent,
    #[error("linear part of the map is not unipotent")]
    NonUnipotent,

    #[error("negative resonances obstruct realization ({} offending)", .0.len())]
    Obstructed(Vec<Resonance>),
    #[error("negative resonance carries a nonvanishing coefficient ({} offending)", .0.len())]
    NegativeResonancePresent(Vec<Resonance>),
    #[error("coefficient at x^R with non-integer R = {value} at y^{j:?} -> component {k}")]
    NonIntegerExponent { j: Vec<usize>, k: usize, value: C64 },

    #[error("step size underflow at t = {t:.6}")]
    StepUnderflow { t: f64 },
    #[error("non-finite coefficient at t = {t:.6}")]
    NonFiniteCoefficient { t: f64 },
    #[error("trajectory left the working domain at t = {t:.6} (|y| = {radius:.3e})")]
    LeftDomain { t: f64, radius: f64 },
    #[error("basepoint must avoid the slit (-inf, 0]")]
    OnSlit,
    #[error("not enough samples for a fit")]
    InsufficientSamples,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
