use thiserror::Error;

/// Errors shared across the whole crate. Operations that can fail in a way a
/// caller is expected to branch on get their own variant; numerical
/// measurements that merely come out poor are reported in result structs
/// instead of raised here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("element does not belong to backend {expected}: {got}")]
    BackendMismatch { expected: String, got: String },

    #[error("generating set is not symmetric: inverse of generator #{index} is missing")]
    AsymmetricGenerators { index: usize },

    #[error("generating set is empty")]
    EmptyGenerators,

    #[error("generator #{index} is not invertible over the integers (det = {det})")]
    NonInvertibleGenerator { index: usize, det: String },

    #[error("integer overflow in {context}")]
    Overflow { context: &'static str },

    #[error("element budget exceeded: {count} elements at radius {radius} (cap {cap})")]
    ElementBudget { count: usize, radius: u32, cap: usize },

    #[error("step budget exceeded in {context}: {steps} steps (cap {cap})")]
    StepBudget { context: &'static str, steps: usize, cap: usize },

    #[error("radius {radius} exceeds the enumerated ball of radius {available}")]
    RadiusOutOfRange { radius: u32, available: u32 },

    #[error("element not found in ball: {context}")]
    NotInBall { context: String },

    #[error("translated window escapes the enumerated ball: {context}")]
    WindowEscapes { context: String },

    #[error("support of a convolution escapes the working ball")]
    SupportEscapes,

    #[error("ball cache mismatch: {0}")]
    CacheMismatch(String),

    #[error("malformed ball cache file: {0}")]
    CacheCorrupt(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("group is finite: ball stabilized at radius {radius} with {size} elements")]
    FiniteGroup { radius: u32, size: u64 },

    #[error("spectral projection is numerically degenerate (norm {norm:.3e} < 1e-12)")]
    DegenerateProjection { norm: f64 },

    #[error("pigeonhole failed in {context}: no admissible value within budget")]
    PigeonholeFailed { context: String },

    #[error("covering verification failed: {context}")]
    CoveringFailed { context: String },

    #[error("subgroup certificate failed verification: {context}")]
    CertificateFailed { context: String },

    #[error("candidate sample is rank deficient (rank {rank} < dim {dim})")]
    RankDeficientSample { rank: usize, dim: usize },

    #[error("matrix is singular in {context}")]
    Singular { context: &'static str },

    #[error("no period with phi(n) <= {dim} divides the characteristic polynomial")]
    NoPeriodicity { dim: usize },

    #[error(
        "all eigenvalues lie within 1e-9 of the unit circle but no short period exists; \
         by the Kronecker argument this cannot happen for an integer matrix of this size"
    )]
    KroneckerViolation,

    #[error("growth witness rate {rate} stayed below 1 + 1e-6 at every rounding level")]
    WitnessRateTooSmall { rate: f64 },

    #[error("matrix is not unipotent after the tower: (T^{p} - I)^{dim} != 0")]
    NotUnipotent { p: u64, dim: usize },

    #[error("no slow-growth certificate verified within budget: {context}")]
    NoSlowGrowthCertificate { context: String },

    #[error("generators do not commute: [g{i}, g{j}] != id")]
    NotAbelian { i: usize, j: usize },

    #[error("numerical cross-check failed in {context}: {detail}")]
    NumericalFailure { context: &'static str, detail: String },

    #[error("no good scale found in the scanned range; det profile: {profile}")]
    NoGoodScale { profile: String },

    #[error("group spec error: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
