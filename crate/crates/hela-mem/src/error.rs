//! Error types shared across the engine.

use std::path::PathBuf;

use thiserror::Error;

use crate::types::NodeId;

/// Errors from graph, encoding, retrieval, and consolidation operations.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero-norm embedding cannot be normalized")]
    ZeroNormEmbedding,
    #[error("embedding contains a non-finite component")]
    NonFiniteEmbedding,
    #[error("text is empty")]
    EmptyText,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("self-loop edge on node {0}")]
    SelfLoop(NodeId),
    #[error(
        "step regression: edge last updated at step {last_update_step}, \
         queried at step {current_step}"
    )]
    StepRegression {
        last_update_step: u64,
        current_step: u64,
    },
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
}

/// Errors raised by embedding and chat backends. `is_retryable` separates
/// transient transport/server conditions from fatal request problems.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("empty input")]
    EmptyInput,
    #[error("transport: {0}")]
    Transport(String),
    #[error("rate limited (status {status}): {message}")]
    RateLimited { status: u16, message: String },
    #[error("server error (status {status}): {message}")]
    Server { status: u16, message: String },
    #[error("request rejected (status {status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Transport(_)
                | BackendError::RateLimited { .. }
                | BackendError::Server { .. }
        )
    }
}

/// Errors from snapshot persistence.
#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported snapshot format {found:?} (expected {expected:?})")]
    UnsupportedVersion { found: String, expected: String },
    #[error("invalid snapshot: {0}")]
    Invariant(String),
}

/// Errors from benchmark dataset loading.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{item}: {message}")]
    Item { item: String, message: String },
}
