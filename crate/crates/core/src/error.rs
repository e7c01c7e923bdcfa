use thiserror::Error;

use crate::measures::BaseMeasure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("hierarchy spec must declare at least one level")]
    NoLevels,
    #[error("level {level} lists attribute `{key}` more than once")]
    RepeatedKey { level: usize, key: String },
    #[error("dataset has no bottom series")]
    Empty,
    #[error("duplicate bottom-series id `{0}`")]
    DuplicateId(String),
    #[error("bottom series `{series}` has no attribute `{attribute}` referenced by level {level}")]
    MissingAttribute {
        series: String,
        attribute: String,
        level: usize,
    },
    #[error("series `{series}`: {message}")]
    InvalidSeries { series: String, message: String },
    #[error("split needs at least 2 bottom series, got {0}")]
    TooFewToSplit(usize),
    #[error("test-window cut {cut} out of range 1..{horizon}")]
    CutOutOfRange { cut: usize, horizon: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriceError {
    #[error("dataset carries no price table")]
    NoPrices,
    #[error("price window {window} exceeds available {available} days")]
    WindowTooLong { window: usize, available: usize },
    #[error("total dollar sales over the price window is zero; weights are undefined")]
    ZeroTotalSales,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("{measure} scale is zero for series `{series}`")]
    ZeroScale { series: String, measure: BaseMeasure },
    #[error("length mismatch for `{series}`: expected {expected}, got {got}")]
    LengthMismatch {
        series: String,
        expected: usize,
        got: usize,
    },
    #[error("forecast for method `{method}` lacks bottom series `{series}`")]
    MissingForecast { method: String, series: String },
    #[error("forecast for method `{method}` has a non-finite value in `{series}`")]
    NonFinite { method: String, series: String },
    #[error("every series at level {0} was excluded (zero scale)")]
    LevelExcluded(usize),
    #[error("no series left after exclusions")]
    AllExcluded,
    #[error("level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("top-level weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("series id `{0}` has no price weight")]
    MissingWeight(String),
    #[error("price weights unavailable: {0}")]
    Weights(#[from] PriceError),
    #[error("cannot parse measure `{0}`")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankingError {
    #[error("ranking needs at least 2 methods, got {0}")]
    TooFewMethods(usize),
    #[error("score for method `{0}` is not finite")]
    NonFiniteScore(String),
    #[error("duplicate method id `{0}`")]
    DuplicateMethod(String),
    #[error("rankings cover different method sets")]
    MethodSetMismatch,
    #[error("top-{k} requested but the reference ranks only {available} methods")]
    TopKTooLarge { k: usize, available: usize },
    #[error("reference method `{0}` has no score")]
    MissingScore(String),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}:{line}: {message}")]
    Invalid {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{0}")]
    Options(String),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no methods to compare")]
    NoMethods,
    #[error("all grid points tie; no optimal multiplier")]
    DegenerateGrid,
    #[error("empty grid")]
    EmptyGrid,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("validation failed with {0} fatal finding(s)")]
    Validation(usize),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 1 for configuration, input and validation
    /// problems, 2 for failures while running experiments.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Load(_) | RunError::Validation(_) => 1,
            RunError::Experiment(_) | RunError::Output { .. } => 2,
        }
    }
}
