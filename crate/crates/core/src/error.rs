use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("audio file contains no samples")]
    EmptyFile,
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("clip has {len} samples, shorter than one {window}-sample window")]
    ClipTooShort { len: usize, window: usize },
    #[error("filter band out of range: {0}")]
    BandOutOfRange(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("rank deficient: only {found} of {wanted} eigenvalues are nonzero")]
    RankDeficient { wanted: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("times are not strictly increasing at index {0}")]
    NonMonotonicTimes(usize),
    #[error("trajectory needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no grid node has enough independent velocity samples")]
    NoValidNodes,
    #[error("point {point:?} is outside the metric domain")]
    OutOfDomain { point: Vec<f64> },
    #[error("geodesic left the metric domain at parameter {s_exit} (position {position:?})")]
    LeftDomain { s_exit: f64, position: Vec<f64> },
    #[error("curvature scalar is only implemented for 2-D fields, got {0}-D")]
    UnsupportedDimension(usize),
    #[error("metric serialization: {0}")]
    Format(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("reference vectors are linearly dependent (condition number {condition:e})")]
    DependentVectors { condition: f64 },
    #[error("time {time} is outside the trajectory span [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("leg {leg} left the metric domain at parameter {s_exit}")]
    LeftDomain { leg: usize, s_exit: f64 },
    #[error("Newton iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("invalid chart: {0}")]
    Invalid(String),
    #[error("chart self-test failed: {0}")]
    SelfTestFailed(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("point {point:?} at index {index} lies outside the transform's box")]
    OutOfBox { index: usize, point: Vec<f64> },
    #[error("trajectories share no timestamps")]
    NoOverlap,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}
