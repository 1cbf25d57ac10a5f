use thiserror::Error;

use crate::graph::{ArcId, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, found {found})")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node {0} is not reachable from the input node")]
    Unreachable(NodeId),

    #[error("node {0} does not exist")]
    UnknownNode(NodeId),

    #[error("arc {0} does not exist")]
    UnknownArc(ArcId),

    #[error("node {inner} is not in the computable sub-graph of node {outer}")]
    NotInSubgraph { outer: NodeId, inner: NodeId },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("not piecewise affine: arc {0} carries a non-linear transform")]
    NotPiecewiseAffine(ArcId),

    #[error("invalid activation: {0}")]
    InvalidActivation(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("network description: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
