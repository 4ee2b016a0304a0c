use thiserror::Error;

/// Every failure the library can report. Variant names are stable: the CLI
/// copies them verbatim into its reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RevspecError {
    #[error("NonUnimodal: r' changes sign {sign_changes} times")]
    NonUnimodal { sign_changes: usize },
    #[error("BoundarySlope: {detail}")]
    BoundarySlope { detail: String },
    #[error("Negative: r <= 0 at interior point sigma = {sigma}")]
    Negative { sigma: f64 },
    #[error("OutOfDomain: {value} is outside {domain}")]
    OutOfDomain { value: f64, domain: String },
    #[error("OutOfRange: {value} is outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("PoleProximity: {detail}")]
    PoleProximity { detail: String },
    #[error("StepFailure: step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("MaxTimeExceeded: no event before t = {cap}")]
    MaxTimeExceeded { cap: f64 },
    #[error("NotClosed: closure residual {residual:e}")]
    NotClosed { residual: f64 },
    #[error("OnEquatorOrbit: |C| = {clairaut} is within the edge margin of r_max")]
    OnEquatorOrbit { clairaut: f64 },
    #[error("QuadratureFailure: panel budget exhausted, error estimate {estimate:e}")]
    QuadratureFailure { estimate: f64 },
    #[error("DomainError: {detail}")]
    DomainError { detail: String },
    #[error("KernelSingularity: {detail}")]
    KernelSingularity { detail: String },
    #[error("CoprimalityError: gcd({p}, {q}) != 1")]
    CoprimalityError { p: u32, q: u32 },
    #[error("FitUnstable: {detail}")]
    FitUnstable { detail: String },
    #[error("MonotonicityFailure: reparametrization not increasing near sigma = {sigma}")]
    MonotonicityFailure { sigma: f64 },
    #[error("ConstraintViolation: {constraint}")]
    ConstraintViolation { constraint: String },
    #[error("NonMonotoneSlopes: slopes not strictly monotone at index {index}")]
    NonMonotoneSlopes { index: usize },
    #[error("Config: {0}")]
    Config(String),
}

impl RevspecError {
    /// The bare variant name, as used in machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Self::NonUnimodal { .. } => "NonUnimodal",
            Self::BoundarySlope { .. } => "BoundarySlope",
            Self::Negative { .. } => "Negative",
            Self::OutOfDomain { .. } => "OutOfDomain",
            Self::OutOfRange { .. } => "OutOfRange",
            Self::PoleProximity { .. } => "PoleProximity",
            Self::StepFailure { .. } => "StepFailure",
            Self::MaxTimeExceeded { .. } => "MaxTimeExceeded",
            Self::NotClosed { .. } => "NotClosed",
            Self::OnEquatorOrbit { .. } => "OnEquatorOrbit",
            Self::QuadratureFailure { .. } => "QuadratureFailure",
            Self::DomainError { .. } => "DomainError",
            Self::KernelSingularity { .. } => "KernelSingularity",
            Self::CoprimalityError { .. } => "CoprimalityError",
            Self::FitUnstable { .. } => "FitUnstable",
            Self::MonotonicityFailure { .. } => "MonotonicityFailure",
            Self::ConstraintViolation { .. } => "ConstraintViolation",
            Self::NonMonotoneSlopes { .. } => "NonMonotoneSlopes",
            Self::Config(_) => "Config",
        }
    }
}

pub type Result<T> = std::result::Result<T, RevspecError>;
