use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The CLI maps these onto process exit codes, see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("point ({re}, {im}) is within {tol:e} of the boundary")]
    BoundaryAmbiguous { re: f64, im: f64, tol: f64 },

    #[error("point ({re}, {im}) lies outside the domain")]
    OutsideDomain { re: f64, im: f64 },

    #[error("evaluation point is within {0:e} of the pole")]
    Singularity(f64),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("near-critical level at t = {t}: {detail}")]
    NearCritical { t: f64, detail: String },

    #[error("tracing failure at t = {t}: {detail}")]
    TracingFailure { t: f64, detail: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("degenerate extremal system: {0}")]
    Degenerate(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse(_) | Error::Configuration(_) => 2,
            Error::InvalidGeometry(_)
            | Error::BoundaryAmbiguous { .. }
            | Error::OutsideDomain { .. }
            | Error::Singularity(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
