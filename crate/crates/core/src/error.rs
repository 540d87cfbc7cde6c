use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degrees of freedom must be positive and finite, got {0}")]
    InvalidDegreesOfFreedom(f64),

    #[error("probability must lie strictly inside (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("too few observations: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("singular design: the regressor is constant")]
    SingularDesign,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: cost for {technology} in {year} must be strictly positive, got {cost}")]
    NonPositiveCost {
        line: u64,
        technology: String,
        year: i32,
        cost: f64,
    },

    #[error("line {line}: duplicate observation for {technology} in {year}")]
    DuplicateYear { line: u64, technology: String, year: i32 },

    #[error("no data rows found")]
    EmptyInput,

    #[error("unknown technology `{0}`")]
    UnknownTechnology(String),

    #[error("estimation window m = {m} does not fit before origin index {origin} (series length {len})")]
    WindowOutOfRange { origin: usize, m: usize, len: usize },

    #[error("window m = {0} is too small: the (m-1)/(m-3) variance prefactor requires m > 3")]
    WindowTooSmall(usize),

    #[error("estimated volatility is zero; errors cannot be normalized")]
    DegenerateVolatility,

    #[error("theta = {0} outside the admissible range")]
    ThetaOutOfRange(f64),

    #[error("likelihood is not finite at theta = {theta}")]
    NonFiniteLikelihood { theta: f64 },

    #[error("no crossing: growth rate {fast} must exceed {slow}, both positive")]
    NoCrossing { fast: f64, slow: f64 },

    #[error("every technology carries a boundary theta estimate; nothing left to average")]
    AllBoundary,

    #[error("estimation windows differ: m = {0} vs m = {1}")]
    MismatchedWindow(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFiniteLikelihood { .. } | Error::DegenerateVolatility)
    }
}
