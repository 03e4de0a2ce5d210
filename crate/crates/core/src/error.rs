use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {msg}")]
    Parse { file: PathBuf, line: usize, msg: String },

    #[error("{file}:{line}: dangling edge endpoint: {msg}")]
    DanglingEndpoint { file: PathBuf, line: usize, msg: String },

    #[error("{file}:{line}: duplicate split assignment for node {node}")]
    DuplicateSplit { file: PathBuf, line: usize, node: usize },

    #[error("{file}: non-finite feature at offset {offset}")]
    NonFiniteFeature { file: PathBuf, offset: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown node type: {0}")]
    UnknownNodeType(String),

    #[error("negative adjacency value {value} at row {row}")]
    NegativeWeight { row: usize, value: f64 },

    #[error("node type {0} has no features")]
    MissingFeatures(String),

    #[error("node type {0} already has features")]
    FeaturesPresent(String),

    #[error("invalid meta-path {path:?}: {msg}")]
    InvalidPath { path: String, msg: String },

    #[error("unknown path: {0}")]
    UnknownPath(String),

    #[error("stale cache at {path}: {reason}")]
    StaleCache { path: PathBuf, reason: String },

    #[error("bad binary format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing prerequisite artifact: {0}")]
    MissingArtifact(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub fn parse(file: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { file: file.into(), line, msg: msg.into() }
    }

    pub fn invalid_path(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidPath { path: path.into(), msg: msg.into() }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::MissingArtifact(_) => ErrorClass::Usage,
            Error::NonFinite(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingFile(_) => "missing_file",
            Error::Parse { .. } => "parse",
            Error::DanglingEndpoint { .. } => "dangling_endpoint",
            Error::DuplicateSplit { .. } => "duplicate_split",
            Error::NonFiniteFeature { .. } => "non_finite_feature",
            Error::Shape(_) => "shape",
            Error::Schema(_) => "schema",
            Error::UnknownNodeType(_) => "unknown_node_type",
            Error::NegativeWeight { .. } => "negative_weight",
            Error::MissingFeatures(_) => "missing_features",
            Error::FeaturesPresent(_) => "features_present",
            Error::InvalidPath { .. } => "invalid_path",
            Error::UnknownPath(_) => "unknown_path",
            Error::StaleCache { .. } => "stale_cache",
            Error::Format { .. } => "format",
            Error::InvalidArgument(_) => "usage",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::NonFinite(_) => "non_finite",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
