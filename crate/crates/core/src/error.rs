use thiserror::Error;

/// Errors raised by the lattice, spectral and dynamics layers.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite {what} sample at site {site} (x = {coords:?})")]
    NonFiniteSample {
        what: &'static str,
        site: usize,
        coords: Vec<f64>,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("size mismatch: {left:?} vs {right:?}")]
    SizeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("eigensolver failed (LAPACK info = {info}) on a {size}x{size} matrix, hermitian defect {defect:.3e}")]
    Eigensolver { info: i32, size: usize, defect: f64 },

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("QR factorization failed: {0}")]
    Qr(String),

    #[error("threshold mu = {mu} lies within {tolerance:e} of eigenvalue #{index} = {eigenvalue}")]
    DegenerateThreshold {
        mu: f64,
        index: usize,
        eigenvalue: f64,
        tolerance: f64,
    },

    #[error("no spectral gap at level {level}: lambda_{level} = {lower}, lambda_{next} = {upper}; pick a different count", next = level + 1)]
    DegenerateLevel { level: usize, lower: f64, upper: f64 },

    #[error("level {requested} out of range 1..={available}")]
    LevelOutOfRange { requested: usize, available: usize },

    #[error("unsupported dimension {dim} for {operation}")]
    UnsupportedDimension { dim: usize, operation: &'static str },

    #[error("fit needs at least {required} usable points, got {got}")]
    InsufficientData { required: usize, got: usize },

    #[error("all sampled norms vanish; a log-log fit is undefined")]
    ZeroData,

    #[error("state corruption: {0}")]
    StateCorruption(String),

    #[error("invariant breach at t = {time}: {detail}")]
    InvariantBreach { time: f64, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("many-body dimension {dimension} exceeds the cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("orbitals leave the mode space (projection error {error:.3e})")]
    OrbitalProjection { error: f64 },
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
