// SPDX-License-Identifier: Apache-2.0

//! Brute-force Balanced Forman curvature for testing.
//!
//! Works from a dense adjacency matrix and enumerates every node triple and
//! every ordered node pair around the edge, so it shares no code with the
//! neighbour-list implementation in the parent module. Intended for graphs of
//! at most a few dozen nodes.

use std::collections::BTreeMap;

use super::{Exact, MotifCounts};
use crate::error::{Error, Result};
use crate::graph::Graph;

fn adjacency_matrix(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.num_nodes();
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in g.edges() {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    adj
}

/// Motif counts by exhaustive enumeration of the 3- and 4-node subgraphs containing `i` and `j`.
pub fn motif_counts_bruteforce(g: &Graph, i: usize, j: usize) -> Result<MotifCounts> {
    g.check_node(i)?;
    g.check_node(j)?;
    let adj = adjacency_matrix(g);
    if !adj[i][j] {
        return Err(Error::NotAnEdge(i, j));
    }
    let n = g.num_nodes();
    let others = || (0..n).filter(move |&v| v != i && v != j);

    let triangles = others().filter(|&c| adj[i][c] && adj[j][c]).count();

    // A qualifying 4-cycle is i - a - b - j - i with neither diagonal (a, j) nor (b, i).
    let mut cycles = Vec::new();
    for a in others() {
        for b in others() {
            if a == b {
                continue;
            }
            let is_cycle = adj[i][a] && adj[a][b] && adj[b][j];
            let has_diagonal = adj[a][j] || adj[b][i];
            if is_cycle && !has_diagonal {
                cycles.push((a, b));
            }
        }
    }

    let mut outer_i: Vec<usize> = cycles.iter().map(|&(a, _)| a).collect();
    outer_i.sort_unstable();
    outer_i.dedup();
    let mut outer_j: Vec<usize> = cycles.iter().map(|&(_, b)| b).collect();
    outer_j.sort_unstable();
    outer_j.dedup();

    let mut through: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, b) in &cycles {
        *through.entry(a).or_default() += 1;
        *through.entry(b).or_default() += 1;
    }
    let gamma_max = through.values().copied().max().unwrap_or(0);

    Ok(MotifCounts {
        triangles,
        squares_i: outer_i.len(),
        squares_j: outer_j.len(),
        gamma_max,
    })
}

/// Exact curvature of edge `(i, j)` from brute-force motif counts.
pub fn bfc_bruteforce(g: &Graph, i: usize, j: usize) -> Result<Exact> {
    let motifs = motif_counts_bruteforce(g, i, j)?;
    let adj = adjacency_matrix(g);
    let di = adj[i].iter().filter(|&&x| x).count();
    let dj = adj[j].iter().filter(|&&x| x).count();
    let r = |x: usize| Exact::from_integer(x as i128);
    let (d_max, d_min) = (r(di.max(dj)), r(di.min(dj)));
    let tri = r(motifs.triangles);
    let mut value = r(2) / r(di) + r(2) / r(dj) - r(2) + r(2) * tri / d_max + tri / d_min;
    if motifs.squares_i + motifs.squares_j > 0 {
        value += r(motifs.squares_i + motifs.squares_j) / (r(motifs.gamma_max) * d_max);
    }
    Ok(value)
}
