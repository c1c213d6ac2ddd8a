// SPDX-License-Identifier: Apache-2.0

//! Spectral gap (second-smallest Laplacian eigenvalue) via a dense symmetric eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, component_labels, Edge};

/// Largest node count the dense solver accepts.
pub const DENSE_NODE_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Laplacian {
    /// `I - D^{-1/2} A D^{-1/2}`
    #[default]
    Normalized,
    /// `D - A`
    Unnormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub laplacian: Laplacian,
    /// Restrict to the largest connected component of the edge set's node support.
    pub largest_component: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            laplacian: Laplacian::Normalized,
            largest_component: true,
        }
    }
}

/// Ascending Laplacian spectrum of the graph on nodes `0..n` with the given edges.
/// Every node must have at least one incident edge when `laplacian` is normalised.
pub fn laplacian_spectrum(n: usize, edges: &[Edge], laplacian: Laplacian) -> Vec<f64> {
    let mut degree = vec![0.0f64; n];
    for &(i, j) in edges {
        degree[i] += 1.0;
        degree[j] += 1.0;
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    match laplacian {
        Laplacian::Unnormalized => {
            for (v, &d) in degree.iter().enumerate() {
                m[(v, v)] = d;
            }
            for &(i, j) in edges {
                m[(i, j)] = -1.0;
                m[(j, i)] = -1.0;
            }
        }
        Laplacian::Normalized => {
            for v in 0..n {
                m[(v, v)] = 1.0;
            }
            for &(i, j) in edges {
                let w = -1.0 / (degree[i] * degree[j]).sqrt();
                m[(i, j)] = w;
                m[(j, i)] = w;
            }
        }
    }
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Second-smallest Laplacian eigenvalue of the edge set, over the nodes it touches.
///
/// With `largest_component` unset, a disconnected support yields exactly 0.
pub fn spectral_gap(edges: &[Edge], num_nodes: usize, opts: SpectralOptions) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::Empty("spectral gap of an empty edge set"));
    }
    let mut edges: Vec<Edge> = edges.iter().map(|&(i, j)| canonical(i, j)).collect();
    edges.sort_unstable();
    edges.dedup();
    if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i == j || j >= num_nodes) {
        return Err(Error::InvalidArgument(format!(
            "edge ({i}, {j}) invalid for {num_nodes} nodes"
        )));
    }

    let labels = component_labels(num_nodes, &edges);
    let mut touched = vec![false; num_nodes];
    for &(i, j) in &edges {
        touched[i] = true;
        touched[j] = true;
    }
    let mut sizes = std::collections::BTreeMap::<usize, usize>::new();
    for v in (0..num_nodes).filter(|&v| touched[v]) {
        *sizes.entry(labels[v]).or_default() += 1;
    }

    let keep_label = if opts.largest_component {
        // Largest by node count; lowest label on ties.
        let (&label, _) = sizes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("nonempty edge set");
        Some(label)
    } else {
        None
    };

    let support: Vec<usize> = (0..num_nodes)
        .filter(|&v| touched[v] && keep_label.is_none_or(|l| labels[v] == l))
        .collect();
    if support.len() > DENSE_NODE_LIMIT {
        return Err(Error::TooLarge {
            nodes: support.len(),
            limit: DENSE_NODE_LIMIT,
        });
    }
    if keep_label.is_none() && sizes.len() > 1 {
        return Ok(0.0);
    }

    let mut local = vec![usize::MAX; num_nodes];
    for (pos, &v) in support.iter().enumerate() {
        local[v] = pos;
    }
    let sub_edges: Vec<Edge> = edges
        .iter()
        .filter(|&&(i, _)| local[i] != usize::MAX)
        .map(|&(i, j)| (local[i], local[j]))
        .collect();
    let spectrum = laplacian_spectrum(support.len(), &sub_edges, opts.laplacian);
    Ok(spectrum[1].max(0.0))
}
