// SPDX-License-Identifier: Apache-2.0

// `!(x >= limit)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod collapse;
pub mod curvature;
pub mod error;
pub mod graph;
pub mod io;
pub mod pruning;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{load_graphs, Edge, EdgeRef, Graph, GraphSet};
