use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed field `{field}` at row {row}: {message}")]
    MalformedRow {
        row: usize,
        field: &'static str,
        message: String,
    },

    #[error("{message} at row {row}")]
    InvalidObservation { row: usize, message: String },

    #[error("unknown category `{label}` at row {row}")]
    UnknownCategory { row: usize, label: String },

    #[error("no data published on or before {end_year}")]
    EmptySlice { end_year: i32 },

    #[error("no modelled data in category `{0}`")]
    NoCategoryData(String),

    #[error("hierarchy line {line}: {message}")]
    HierarchyParse { line: usize, message: String },

    #[error("invalid hierarchy: {}", .0.join("; "))]
    InvalidHierarchy(Vec<String>),

    #[error("category `{0}` has no scale parameters in the hierarchy")]
    UnmodelledCategory(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("datum `{0}` has an observed log range")]
    ObservedLogRange(String),

    #[error("invalid sampler configuration: {0}")]
    Config(String),

    #[error("chain {chain}: no finite starting point after {attempts} attempts")]
    Initialisation { chain: usize, attempts: usize },

    #[error("chain {chain}: non-finite log density at accepted state (iteration {iteration})")]
    NonFiniteAccepted { chain: usize, iteration: usize },

    #[error("chains have unequal lengths ({0} vs {1})")]
    UnequalChains(usize, usize),

    #[error("need at least {needed} draws, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("level {0} is outside (0, 1)")]
    Level(f64),

    #[error("grid: {0}")]
    Grid(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("chain file: {0}")]
    ChainFile(String),

    #[error("invalid time slices: {0}")]
    Timeslice(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
