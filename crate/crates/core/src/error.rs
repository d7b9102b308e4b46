use thiserror::Error;

/// Everything that can go wrong across the crate. Refusals that correspond to
/// unmet mathematical hypotheses or exhausted work budgets are distinct
/// variants so callers (and the CLI exit codes) can tell them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spin vector has length {got}, instance has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("indices {0:?} must be pairwise distinct")]
    RepeatedIndex(Vec<usize>),

    #[error("coefficient for {0:?} given more than once")]
    DuplicateKey(Vec<usize>),

    #[error("spin entries must be +1 or -1, found {0}")]
    InvalidSpin(i8),

    #[error("coefficient {key:?} has imaginary part {imag:.3e}; this operation requires a real instance")]
    NonRealCoefficient { key: Vec<usize>, imag: f64 },

    #[error("delta = {value} outside the admissible range ({lo}, {hi})")]
    DeltaOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("epsilon = {0} outside (0, 1)")]
    EpsilonOutOfRange(f64),

    #[error("enumeration over {n} free spins exceeds the brute-force cap {cap}")]
    BruteForceCap { n: usize, cap: usize },

    #[error("derivative order k = {k} exceeds the cap {cap}")]
    OrderCap { k: usize, cap: usize },

    #[error("estimated work {estimated:.3e} exceeds the limit {limit:.3e} (edges = {edges}, k = {k})")]
    WorkLimit {
        estimated: f64,
        limit: f64,
        edges: usize,
        k: usize,
    },

    #[error("hypothesis violated at index {index}: {detail}")]
    HypothesisFailed { index: usize, detail: String },

    #[error("zero vector where a nonzero complex number is required")]
    ZeroVector,

    #[error("angle {angle:.6} between inputs exceeds theta = {theta:.6}")]
    AngleExceedsTheta { angle: f64, theta: f64 },

    #[error("theta = {value} outside [{lo}, {hi}) for this check")]
    ThetaOutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("series has zero constant term; logarithm undefined")]
    SingularSeries,

    #[error(
        "no disk map with radius > 1 into the strip (delta = {delta}) certified up to degree {max_degree}; \
         widen the strip (larger delta) or raise the degree limit"
    )]
    MapCertification { delta: f64, max_degree: usize },

    #[error(
        "derivative table of order {available} insufficient for epsilon = {epsilon}; \
         estimated requirement m ≈ {required}"
    )]
    InsufficientOrder {
        available: usize,
        required: usize,
        epsilon: f64,
    },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed instance file: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
