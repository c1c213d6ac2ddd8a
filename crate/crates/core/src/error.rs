// SPDX-License-Identifier: Apache-2.0

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

    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("graph {graph_id}: {reason}")]
    InvalidGraph { graph_id: String, reason: String },

    #[error("node {node} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("({0}, {1}) is not an edge of the graph")]
    NotAnEdge(usize, usize),

    #[error("activation log for {graph_id}: {reason}")]
    InvalidLog { graph_id: String, reason: String },

    #[error("median of |weight| in group (layer {layer}, head {}) is below epsilon", .head.map_or("*".to_string(), |h| h.to_string()))]
    DegenerateGroup { layer: usize, head: Option<usize> },

    #[error("attention row (layer {layer}, head {head}, src {src}) sums to less than epsilon")]
    DegenerateRow {
        layer: usize,
        head: usize,
        src: usize,
    },

    #[error("graph {0} not found")]
    UnknownGraph(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense eigensolver is limited to {limit} nodes, got {nodes}")]
    TooLarge { nodes: usize, limit: usize },
}

impl Error {
    pub(crate) fn invalid_graph(graph_id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidGraph {
            graph_id: graph_id.to_owned(),
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid_log(graph_id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidLog {
            graph_id: graph_id.to_owned(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by a hard capability limit rather than bad input.
    pub fn is_capability(&self) -> bool {
        matches!(self, Error::TooLarge { .. })
    }
}
