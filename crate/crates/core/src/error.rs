use std::path::PathBuf;

/// Coarse failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("degenerate covariate `{0}`: zero pooled variance")]
    DegenerateCovariate(String),

    #[error("degenerate treatment at time {time}: {detail}")]
    DegenerateTreatment { time: usize, detail: String },

    #[error("rank-deficient design; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("response has zero total sum of squares")]
    ConstantResponse,

    #[error("no censoring observed at any time-point; use treatment-only weights")]
    NoCensoring,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Context { source, .. } => source.class(),
            Error::Domain(_) | Error::UnknownScenario(_) => ErrorClass::Usage,
            Error::Schema(_)
            | Error::Validation(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::NoCensoring => ErrorClass::Data,
            Error::DegenerateResponse(_)
            | Error::DegenerateGroup(_)
            | Error::DegenerateCovariate(_)
            | Error::DegenerateTreatment { .. }
            | Error::RankDeficient(_)
            | Error::ConstantResponse => ErrorClass::Numerical,
        }
    }
}
