use thiserror::Error;

/// Broad failure classes, used by the command line front end to pick an
/// exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerics,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("jump distribution has infinite mean multiplier (eta1 = {eta1} must exceed 1)")]
    InfiniteMean { eta1: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate annuity: remaining horizon is zero at t = {t}")]
    DegenerateAnnuity { t: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("optimum W* = {w_star} lies on the bracket boundary [{lo}, {hi}]; widen the bracket")]
    BracketBoundary { w_star: f64, lo: f64, hi: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_)
            | Error::InfiniteMean { .. }
            | Error::Toml(_)
            | Error::TomlSer(_) => ErrorKind::Config,
            Error::Data(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorKind::Data,
            Error::Domain(_)
            | Error::DegenerateAnnuity { .. }
            | Error::Estimation(_)
            | Error::DegenerateSeries(_)
            | Error::GridMismatch(_)
            | Error::BracketBoundary { .. }
            | Error::EmptySample => ErrorKind::Numerics,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// Labels the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
