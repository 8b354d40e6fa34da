use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. Variant names double as the `kind`
/// field of the CLI's machine-readable error document.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: level `{token}` is not declared for factor `{factor}`")]
    UnknownLevel { row: usize, factor: String, token: String },
    #[error("row {0}: response is not a finite number")]
    NonNumericResponse(usize),
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("factor `{0}` has fewer than two levels")]
    DegenerateFactor(String),
    #[error("factor `{0}` is not ordinal")]
    NotOrdinal(String),
    #[error("penalty weight {value} for factor `{factor}` is not strictly positive and finite")]
    NonPositiveWeight { factor: String, value: f64 },
    #[error("gamma must be strictly positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("factor `{factor}` level {level} is unobserved; frequency weights need every level")]
    UnobservedLevel { factor: String, level: usize },
    #[error("least-squares estimate unavailable: design is singular")]
    OlsUnavailable,
    #[error("factor `{0}` has no spatial coordinates")]
    MissingCoordinates(String),
    #[error("solver did not converge after {iterations} iterations ({detail})")]
    NotConverged { iterations: usize, detail: String },
    #[error("coefficient layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("collapsed design is rank deficient")]
    RankDeficient,
    #[error("fold {fold}: training design is singular")]
    FoldRankDeficient { fold: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("replicate {replicate}, variant `{variant}`: {source}")]
    Study {
        replicate: usize,
        variant: String,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::MissingColumn(_) => "MissingColumn",
            Error::UnknownLevel { .. } => "UnknownLevel",
            Error::NonNumericResponse(_) => "NonNumericResponse",
            Error::EmptyDataset => "EmptyDataset",
            Error::InvalidDataset(_) => "InvalidDataset",
            Error::UnknownFactor(_) => "UnknownFactor",
            Error::DegenerateFactor(_) => "DegenerateFactor",
            Error::NotOrdinal(_) => "NotOrdinal",
            Error::NonPositiveWeight { .. } => "NonPositiveWeight",
            Error::NonPositiveGamma(_) => "NonPositiveGamma",
            Error::UnobservedLevel { .. } => "UnobservedLevel",
            Error::OlsUnavailable => "OlsUnavailable",
            Error::MissingCoordinates(_) => "MissingCoordinates",
            Error::NotConverged { .. } => "NotConverged",
            Error::LayoutMismatch(_) => "LayoutMismatch",
            Error::RankDeficient => "RankDeficient",
            Error::FoldRankDeficient { .. } => "FoldRankDeficient",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Study { .. } => "Study",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
