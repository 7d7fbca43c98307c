use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: vector has dimension {found}, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row}: vector has zero norm")]
    ZeroNorm { row: usize },
    #[error("row {row}: label {label} is not in the taxonomy")]
    UnknownLabel { row: usize, label: u32 },
    #[error("row {row}: duplicate record id {id:?}")]
    DuplicateId { row: usize, id: String },
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("vectors have different dimensions ({0} vs {1})")]
    VectorDimension(usize, usize),
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("invalid matrix: {0}")]
    Matrix(String),
    #[error("invalid threshold config: {0}")]
    Threshold(String),
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("graph has zero total weight")]
    ZeroTotalWeight,
    #[error("graph has negative edge weight {weight} between nodes {i} and {j}")]
    NegativeWeight { i: usize, j: usize, weight: f64 },
    #[error("unknown community id {0}")]
    UnknownCommunity(usize),
    #[error("node {0} must be removed from its community first")]
    NodeNotRemoved(usize),
    #[error("invalid k-means config: {0}")]
    KMeans(String),
    #[error("invalid spectral config: {0}")]
    Spectral(String),
    #[error("eigendecomposition did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },
    #[error("length mismatch: {0} labels vs {1} assignments")]
    LengthMismatch(usize, usize),
    #[error("label {0} has no records")]
    EmptyLabel(u32),
    #[error("label {label} outside 1..={max}")]
    LabelOutOfRange { label: u32, max: u32 },
    #[error("cluster id {id} outside 0..{k}")]
    ClusterOutOfRange { id: usize, k: usize },
    #[error("invalid probability distribution: {0}")]
    Distribution(String),
    #[error("label {0} is not mapped to any cluster")]
    UnmappedLabel(u32),
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("{method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<Error>,
    },
    #[error("no trial results to report")]
    EmptyResults,
    #[error("report check failed: {0}")]
    ReportMismatch(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
