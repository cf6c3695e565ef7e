use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no interior equilibrium: {0}")]
    NoInteriorEquilibrium(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("coefficients are not conjugate-symmetric: {0}")]
    Symmetry(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    Stiffness { t: f64, h: f64 },

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("fixture error: {0}")]
    Fixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's data rather than by I/O.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
