use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid index {index} out of range (grid has {len} points)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("time {0} is not a grid time")]
    NotGridTime(f64),

    #[error("paths are sampled on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("incompatible grid: {0}")]
    IncompatibleGrid(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("partition needs at least two points")]
    DegeneratePartition,

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("stopping-time partition level must be at least 1")]
    ZeroLevel,

    #[error("invalid level range {0}..{1}")]
    LevelRange(u32, u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value is not finite: {0}")]
    NonFinite(String),

    #[error("point outside function domain at t = {t}")]
    Domain { t: f64 },

    #[error("derivative check failed for {which}: analytic {analytic}, finite difference {numeric}")]
    Derivative {
        which: String,
        analytic: f64,
        numeric: f64,
    },

    #[error("quadratic variation unavailable: {0}")]
    QvUnavailable(String),

    #[error("jump of size -1 at t = {t}")]
    ZeroHit { t: f64 },

    #[error("solution blows up at t = {t}")]
    BlowUp { t: f64 },

    #[error("solver preconditions neither declared nor waived")]
    PreconditionsUndeclared,

    #[error("running maximum jumps at t = {t}")]
    DiscontinuousMaximum { t: f64 },

    #[error("floor margin y - w(y) = {margin} is not positive at y = {y}")]
    Margin { y: f64, margin: f64 },

    #[error("positivity violated at t = {t}")]
    Positivity { t: f64 },

    #[error("negative atom {weight} at t = {t}")]
    NegativeAtom { t: f64, weight: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
