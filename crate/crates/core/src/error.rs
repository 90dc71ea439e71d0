use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: NodeId },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("node {0} is out of range")]
    NodeOutOfRange(NodeId),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph size overflows node id space")]
    SizeOverflow,
    #[error("no connected graph after {0} attempts")]
    NotConnected(usize),
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("component of node {source_node} cannot absorb {steps} infections")]
    ComponentTooSmall { source_node: NodeId, steps: usize },
    #[error("not a diffusion path: node {node} at position {position} has no earlier neighbor")]
    InvalidPath { position: usize, node: NodeId },
    #[error("snapshot not connected")]
    SnapshotNotConnected,
    #[error("snapshot size {snapshot} does not match path length {path}")]
    SizeMismatch { snapshot: usize, path: usize },
    #[error("weight function is not non-increasing and nonnegative")]
    NonMonotoneWeights,
    #[error("{0} weights given for {1} samples")]
    WeightCount(usize, usize),
    #[error("node {0} is not single-degree")]
    NotSingleDegree(NodeId),
    #[error("path source {found} is not the neighbor {expected} of the mapped node")]
    WrongSource { expected: NodeId, found: NodeId },
    #[error("enumeration guard exceeded ({0} paths)")]
    EnumerationGuard(usize),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
