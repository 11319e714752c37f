use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("inverse temperature must be positive, got beta = {0}")]
    NonPositiveBeta(f64),

    #[error("averages (e = {e}, r = {r}) are outside the physical region e > r^2/2")]
    OutsidePhysicalRegion { e: f64, r: f64 },

    #[error("current index {0} is not in 1..=5")]
    InvalidCurrentIndex(usize),

    #[error("site {site} is out of range for a chain of {len} sites")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("precision matrix is not positive definite for N = {0}")]
    IndefinitePrecision(usize),

    #[error("moment state is not admissible: {0}")]
    NotAdmissible(String),

    #[error("block width {block} does not divide N = {n}")]
    BlockWidth { block: usize, n: usize },

    #[error("fields left the physical region at grid point {index} (e - r^2/2 = {value})")]
    PhysicalRegionExit { index: usize, value: f64 },

    #[error("explicit scheme is unstable: dt = {dt} exceeds the limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("time mismatch: profile at t = {empirical}, reference at t = {reference}")]
    TimeMismatch { empirical: f64, reference: f64 },

    #[error("mode amplitude {amplitude} at t = {t} is below the noise floor {floor}")]
    BelowNoiseFloor { t: f64, amplitude: f64, floor: f64 },

    #[error("expected {expected:.3e} flip events, above the ceiling {ceiling:.3e}")]
    BudgetExceeded { expected: f64, ceiling: f64 },

    #[error("flip sequence is invalid: {0}")]
    InvalidFlipSequence(String),
}

pub type Result<T> = core::result::Result<T, Error>;
