use thiserror::Error;

/// Errors raised by the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("solution blew up (|u| above cap) after r = {r}")]
    BlowUp { r: f64 },
    #[error("step size underflow at r = {r}")]
    StepUnderflow { r: f64 },
    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },
    #[error("wronskian normalization failed (W = {w})")]
    NormalizationFailure { w: f64 },
    #[error("argument {x} outside [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("no interior zero of (xi zeta)': endpoint signs {left} and {right}")]
    NoInteriorZero { left: f64, right: f64 },
    #[error("singular linear system (condition estimate {cond:e})")]
    SingularSystem { cond: f64 },
    #[error("eigenvalue bracket search failed: {0}")]
    BracketFailure(String),
    #[error("mu = {mu} is not above the threshold lambda_2 = {lambda2}")]
    BelowThreshold { mu: f64, lambda2: f64 },
    #[error("shooting collapsed: {0}")]
    ShootingCollapse(String),
    #[error("zero function has no Nehari projection")]
    ZeroFunction,
    #[error("sub-solve failed on the {side} interval: {source}")]
    SubSolveFailure {
        side: String,
        #[source]
        source: Box<Error>,
    },
    #[error("no bracket: L has equal signs at both ends ({left:e}, {right:e})")]
    NoBracket { left: f64, right: f64 },
    #[error("newton stalled with residual {residual:e}")]
    NewtonStall { residual: f64 },
    #[error("iterates violate the interface ordering: {0}")]
    InfeasibleOrder(String),
    #[error("corrector diverged at mu = {mu}")]
    CorrectorDivergence { mu: f64 },
    #[error("zero of u - 1 at r = {r} is not simple")]
    NonSimpleZero { r: f64 },
    #[error("window {window} exceeds the available range {max}")]
    WindowTooWide { window: f64, max: f64 },
    #[error("eigenvalue solver failed: {0}")]
    EigSolverFailure(String),
    #[error("integrand singular: {0}")]
    SingularIntegrand(String),
    #[error("malformed profile: {0}")]
    MalformedProfile(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "InvalidParams",
            Error::BlowUp { .. } => "BlowUp",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::DegenerateInterval { .. } => "DegenerateInterval",
            Error::NormalizationFailure { .. } => "NormalizationFailure",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::NoInteriorZero { .. } => "NoInteriorZero",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::BracketFailure(_) => "BracketFailure",
            Error::BelowThreshold { .. } => "BelowThreshold",
            Error::ShootingCollapse(_) => "ShootingCollapse",
            Error::ZeroFunction => "ZeroFunction",
            Error::SubSolveFailure { .. } => "SubSolveFailure",
            Error::NoBracket { .. } => "NoBracket",
            Error::NewtonStall { .. } => "NewtonStall",
            Error::InfeasibleOrder(_) => "InfeasibleOrder",
            Error::CorrectorDivergence { .. } => "CorrectorDivergence",
            Error::NonSimpleZero { .. } => "NonSimpleZero",
            Error::WindowTooWide { .. } => "WindowTooWide",
            Error::EigSolverFailure(_) => "EigSolverFailure",
            Error::SingularIntegrand(_) => "SingularIntegrand",
            Error::MalformedProfile(_) => "MalformedProfile",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
