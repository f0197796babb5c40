// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module. Each variant maps onto a stable
/// string code (see [`Error::code`]) used in CLI diagnostics and reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sample set is empty")]
    EmptySamples,
    #[error("inverted density has mass {mass:.6e}, outside tolerance {tolerance:.1e}")]
    InversionMassViolation { mass: f64, tolerance: f64 },
    #[error("characteristic function shows no polynomial decay on [{u_lo}, {u_hi}]")]
    NoPolynomialDecay { u_lo: f64, u_hi: f64 },
    #[error("moment diverges: {0}")]
    MomentDiverges(String),
    #[error("grids differ: {0}")]
    GridMismatch(String),
    #[error("dimension {dim} is not supported here")]
    UnsupportedDimension { dim: usize },
    #[error("invalid regularity parameter: {0}")]
    InvalidRegularity(String),
    #[error("tail envelope has not passed its audit")]
    UncertifiedEnvelope,
    #[error("no feasible order pair with k, l <= {cap}")]
    OrderCapExceeded { cap: u32 },
    #[error("non-finite state on path {path} at step {step}")]
    DivergenceDetected { path: usize, step: i64 },
    #[error("n = {n} is below the crossover index N(l) = {required}")]
    BelowCrossover { n: u64, required: u64 },
    #[error("no positive small-argument radius found")]
    NoSmallURadius,
    #[error("sup of |phi| away from the origin is {rho}, lattice law suspected")]
    LatticeSuspected { rho: f64 },
    #[error("logarithm of a non-positive value at index {index}")]
    LogDomain { index: usize },
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySamples => "empty_samples",
            Error::InversionMassViolation { .. } => "inversion_mass_violation",
            Error::NoPolynomialDecay { .. } => "no_polynomial_decay",
            Error::MomentDiverges(_) => "moment_diverges",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::InvalidRegularity(_) => "invalid_regularity",
            Error::UncertifiedEnvelope => "uncertified_envelope",
            Error::OrderCapExceeded { .. } => "order_cap_exceeded",
            Error::DivergenceDetected { .. } => "divergence_detected",
            Error::BelowCrossover { .. } => "below_crossover",
            Error::NoSmallURadius => "no_small_u_radius",
            Error::LatticeSuspected { .. } => "lattice_suspected",
            Error::LogDomain { .. } => "log_domain",
            Error::InsufficientData(_) => "insufficient_data",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
