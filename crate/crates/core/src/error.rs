use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("expression is not exactly evaluable: {0}")]
    NotExact(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("body of even superfunction vanishes at sample point {0}")]
    ZeroBody(usize),
    #[error("superfunction is not even")]
    NotEven,
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("chart is not tautological (n = {n}, m = {m})")]
    NotTautological { m: usize, n: usize },
    #[error("complex dimension {0} is odd")]
    OddComplexDimension(usize),
    #[error("component {0} of Q is not linear in the odd generators")]
    NotLinearInTheta(String),
    #[error("sigma morphism is not injective (rank {rank} < {n}) at sample {sample}")]
    NotInjective { rank: usize, n: usize, sample: usize },
    #[error("zero at {0} is not isolated (singular linearization)")]
    NonIsolatedZero(String),
    #[error("fixed-point search did not converge: {0}")]
    NoConvergence(String),
    #[error("point is not a zero of the vector field (residual {0:e})")]
    NotAZero(f64),
    #[error("fiber block of the superdeterminant is singular")]
    SingularFiberBlock,
    #[error("form is not equivariantly closed (residual {0:e})")]
    NotClosed(f64),
    #[error("linearization at a fixed point is singular")]
    SingularLinearization,
    #[error("superfunction is not Q-closed (residual {0:e})")]
    NotQClosed(f64),
    #[error("operator fails the BRST conditions: {0}")]
    BrstInvalid(String),
    #[error("odd dimension {0}; the formula needs even m and n")]
    OddDimension(usize),
    #[error("vector field degenerates: {0}")]
    DegenerateField(String),
    #[error("Q(beta) is not invertible on the working domain")]
    NonInvertibleQBeta,
    #[error("superfunction must be homogeneous of grade {expected}")]
    WrongGrade { expected: u32 },
    #[error("sigma is not parallel (max covariant derivative {0:e})")]
    AssumptionViolated(f64),
    #[error("group element is not unitary: {0}")]
    NotUnitary(String),
    #[error("multiplier action is not linear in the multipliers")]
    NonlinearTtilde,
    #[error("supersymmetry count must be 1, 2 or 4, got {0}")]
    BadSusy(u32),
    #[error("data have a non-trivial stabilizer")]
    StabilizerNotTrivial,
    #[error("quadrature did not converge within depth {depth} (last change {change:e})")]
    QuadratureNoConvergence { depth: u32, change: f64 },
    #[error("metric is not symmetric at entry ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("metric is not positive definite at sample {0}")]
    NotPositiveDefinite(usize),
    #[error("metric is not invariant under the action (residual {0:e})")]
    NotInvariant(f64),
    #[error("scenario schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
