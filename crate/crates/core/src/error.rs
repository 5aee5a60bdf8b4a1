use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants are grouped by the stage that raises them; [`Error::kind`] maps
/// them onto the coarse classes used for process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    // geometry
    #[error("point lies outside the tubular chart of surface {surface} (distance {distance:.3e} >= radius {radius:.3e})")]
    OutsideChart {
        surface: usize,
        distance: f64,
        radius: f64,
    },
    #[error("point lies on surface {surface}; the normal direction is undefined")]
    OnSurface { surface: usize },

    // model / coefficients
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("expression error in `{source_text}`: {message}")]
    Expression {
        source_text: String,
        message: String,
    },
    #[error("field v_{field} does not leave surface {surface} invariant (residual {residual:.3e})")]
    NonInvariantField {
        surface: usize,
        field: usize,
        residual: f64,
    },
    #[error("angular operator is not elliptic on surface {surface}: min diffusion {min_diffusion:.3e}")]
    EllipticityFailure { surface: usize, min_diffusion: f64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    // spectral
    #[error("singular solve: {0}")]
    SingularSolve(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate case: |alpha_bar - beta_bar| = {gap:.3e} is below 1e-8")]
    DegenerateCase { gap: f64 },
    #[error("no sign change of lambda(gamma) found for |gamma| <= {limit}")]
    NoBracket { limit: f64 },
    #[error("generator has a negative off-diagonal entry {value:.3e} at ({row}, {col})")]
    NotMetzler { row: usize, col: usize, value: f64 },

    // simulation
    #[error("trajectory left the bounding box or became non-finite at t = {time:.6}")]
    NonFinite { time: f64 },

    // experiments
    #[error("{timeouts} of {total} trajectories timed out (limit {limit_percent}%)")]
    TooManyTimeouts {
        timeouts: usize,
        total: usize,
        limit_percent: f64,
    },
    #[error("timeouts dominate at eps = {eps}: {timeouts} of {total}")]
    TimeoutDominated {
        eps: f64,
        timeouts: usize,
        total: usize,
    },
    #[error("transient block of the chain is singular: {0}")]
    AbsorptionFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class used by the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Numerical,
    Assumption,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonInvariantField { .. } | Error::EllipticityFailure { .. } => {
                ErrorKind::Assumption
            }
            Error::Schema { .. }
            | Error::InvalidModel(_)
            | Error::Expression { .. }
            | Error::InvalidArgument(_)
            | Error::Unsupported(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorKind::Usage,
            _ => ErrorKind::Numerical,
        }
    }
}
