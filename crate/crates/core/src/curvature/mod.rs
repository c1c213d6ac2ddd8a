// SPDX-License-Identifier: Apache-2.0

//! Balanced Forman curvature.
//!
//! For an edge `i ~ j` with degrees `d_i`, `d_j`:
//!
//! ```text
//! BFc(i,j) = 2/d_i + 2/d_j - 2
//!          + 2·#tri / max(d_i, d_j) + #tri / min(d_i, d_j)
//!          + (#sq_i + #sq_j) / (gamma_max · max(d_i, d_j))
//! ```
//!
//! The last term is taken as zero when the edge supports no diagonal-free
//! 4-cycle. Values are computed exactly as rationals; the `f64` entry points
//! round once at the end, so curvature values that are equal as rationals
//! are bitwise equal as floats.
//!
//! Motif definitions used here, with `N(v)` the neighbourhood of `v`:
//!
//! * triangles: `N(i) ∩ N(j)`
//! * a qualifying 4-cycle is `i - k - w - j` with `k ∈ N(i) \ (N(j) ∪ {j})`,
//!   `w ∈ N(j) \ (N(i) ∪ {i})` and `k ~ w`
//! * `#sq_i` / `#sq_j` count the distinct `k` / `w` taking part in one
//! * `gamma_max` is the largest number of those cycles through a single outer node

pub mod oracle;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Exact curvature value.
pub type Exact = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MotifCounts {
    pub triangles: usize,
    pub squares_i: usize,
    pub squares_j: usize,
    /// Zero when no qualifying 4-cycle exists.
    pub gamma_max: usize,
}

/// Sorted-merge intersection size.
fn intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut x, mut y, mut n) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                x += 1;
                y += 1;
            }
        }
    }
    n
}

/// Elements of `a` that are neither in `b` nor equal to `skip`, in sorted order.
fn exclusive(a: &[usize], b: &[usize], skip: usize) -> Vec<usize> {
    a.iter()
        .copied()
        .filter(|&v| v != skip && b.binary_search(&v).is_err())
        .collect()
}

pub fn motif_counts(g: &Graph, i: usize, j: usize) -> Result<MotifCounts> {
    g.check_node(i)?;
    g.check_node(j)?;
    if !g.has_edge(i, j) {
        return Err(Error::NotAnEdge(i, j));
    }
    let (ni, nj) = (g.neighbors(i), g.neighbors(j));
    let triangles = intersection_len(ni, nj);

    let outer_i = exclusive(ni, nj, j);
    let outer_j = exclusive(nj, ni, i);
    if outer_i.is_empty() || outer_j.is_empty() {
        return Ok(MotifCounts {
            triangles,
            ..MotifCounts::default()
        });
    }

    // through_w[p] counts cycles through outer_j[p].
    let mut through_w = vec![0usize; outer_j.len()];
    let (mut squares_i, mut gamma_max) = (0, 0);
    for &k in &outer_i {
        let nk = g.neighbors(k);
        let mut cycles_at_k = 0;
        let (mut x, mut y) = (0, 0);
        while x < nk.len() && y < outer_j.len() {
            match nk[x].cmp(&outer_j[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    cycles_at_k += 1;
                    through_w[y] += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        if cycles_at_k > 0 {
            squares_i += 1;
            gamma_max = gamma_max.max(cycles_at_k);
        }
    }
    let squares_j = through_w.iter().filter(|&&c| c > 0).count();
    gamma_max = gamma_max.max(through_w.into_iter().max().unwrap_or(0));

    Ok(MotifCounts {
        triangles,
        squares_i,
        squares_j,
        gamma_max,
    })
}

/// Evaluate the curvature formula for degrees `d_i`, `d_j` (both >= 1).
pub fn bfc_from_motifs(d_i: usize, d_j: usize, m: &MotifCounts) -> Exact {
    let int = |x: usize| Exact::from_integer(x as i128);
    let d_max = d_i.max(d_j);
    let d_min = d_i.min(d_j);

    let mut value = Exact::new(2, d_i as i128) + Exact::new(2, d_j as i128) - int(2);
    if m.triangles > 0 {
        value += Exact::new(2 * m.triangles as i128, d_max as i128);
        value += Exact::new(m.triangles as i128, d_min as i128);
    }
    let squares = m.squares_i + m.squares_j;
    if squares > 0 {
        value += Exact::new(squares as i128, (m.gamma_max * d_max) as i128);
    }
    value
}

pub fn bfc_edge_exact(g: &Graph, i: usize, j: usize) -> Result<Exact> {
    let motifs = motif_counts(g, i, j)?;
    Ok(bfc_from_motifs(
        g.neighbors(i).len(),
        g.neighbors(j).len(),
        &motifs,
    ))
}

pub fn to_f64(value: Exact) -> f64 {
    value
        .to_f64()
        .expect("curvature values are small rationals")
}

pub fn bfc_edge(g: &Graph, i: usize, j: usize) -> Result<f64> {
    bfc_edge_exact(g, i, j).map(to_f64)
}

/// Curvature of every edge, in canonical edge order.
pub fn bfc_all(g: &Graph) -> Vec<(Edge, f64)> {
    g.edges()
        .iter()
        .map(|&(i, j)| {
            let value = bfc_edge(g, i, j).expect("edges of g are structural");
            ((i, j), value)
        })
        .collect()
}

pub use oracle::bfc_bruteforce;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSummary {
    pub per_edge: Vec<(Edge, f64)>,
    pub weighted_mean: f64,
    pub negative_fraction: f64,
    pub weights_used: Vec<f64>,
}

/// Weighted mean curvature and weighted share of negatively curved edges.
/// Uniform unit weights are used when `weights` is `None`.
pub fn curvature_summary(
    per_edge: &[(Edge, f64)],
    weights: Option<&[f64]>,
) -> Result<CurvatureSummary> {
    let weights: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != per_edge.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} weights for {} edges",
                    w.len(),
                    per_edge.len()
                )));
            }
            if let Some(bad) = w.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "weights must be finite and nonnegative, got {bad}"
                )));
            }
            w.to_vec()
        }
        None => vec![1.0; per_edge.len()],
    };
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("total weight is zero".into()));
    }
    let weighted_sum: f64 = per_edge.iter().zip(&weights).map(|((_, b), w)| b * w).sum();
    let negative: f64 = per_edge
        .iter()
        .zip(&weights)
        .filter(|((_, b), _)| *b < 0.0)
        .map(|(_, w)| w)
        .sum();
    Ok(CurvatureSummary {
        per_edge: per_edge.to_vec(),
        weighted_mean: weighted_sum / total,
        negative_fraction: negative / total,
        weights_used: weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> Graph {
        let edges: Vec<Edge> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Graph::new("K", n, &edges).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        let edges: Vec<Edge> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::new("C", n, &edges).unwrap()
    }

    fn barbell4() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for a in 0..4 {
                for b in a + 1..4 {
                    edges.push((base + a, base + b));
                }
            }
        }
        edges.push((3, 4));
        Graph::new("barbell", 8, &edges).unwrap()
    }

    fn q(n: i128, d: i128) -> Exact {
        Exact::new(n, d)
    }

    #[test]
    fn k4_motifs() {
        let m = motif_counts(&complete(4), 0, 1).unwrap();
        assert_eq!(
            m,
            MotifCounts {
                triangles: 2,
                ..Default::default()
            }
        );
        assert_eq!(bfc_edge_exact(&complete(4), 0, 1).unwrap(), q(4, 3));
    }

    #[test]
    fn c4_motifs() {
        let m = motif_counts(&cycle(4), 0, 1).unwrap();
        assert_eq!(
            m,
            MotifCounts {
                triangles: 0,
                squares_i: 1,
                squares_j: 1,
                gamma_max: 1
            }
        );
        assert_eq!(bfc_edge(&cycle(4), 0, 1).unwrap(), 1.0);
    }

    #[test]
    fn bridge_has_no_motifs() {
        let g = barbell4();
        assert_eq!(motif_counts(&g, 3, 4).unwrap(), MotifCounts::default());
        assert_eq!(bfc_edge(&g, 3, 4).unwrap(), -1.0);
    }

    #[test]
    fn barbell_frozen_values() {
        // Values from an independent rational enumeration of the 13 edges.
        let g = barbell4();
        let expected = [
            ((0, 1), q(4, 3)),
            ((0, 2), q(4, 3)),
            ((0, 3), q(5, 6)),
            ((1, 2), q(4, 3)),
            ((1, 3), q(5, 6)),
            ((2, 3), q(5, 6)),
            ((3, 4), q(-1, 1)),
            ((4, 5), q(5, 6)),
            ((4, 6), q(5, 6)),
            ((4, 7), q(5, 6)),
            ((5, 6), q(4, 3)),
            ((5, 7), q(4, 3)),
            ((6, 7), q(4, 3)),
        ];
        for ((i, j), value) in expected {
            assert_eq!(bfc_edge_exact(&g, i, j).unwrap(), value, "edge ({i},{j})");
        }
        let negatives: Vec<_> = bfc_all(&g).into_iter().filter(|(_, b)| *b < 0.0).collect();
        assert_eq!(negatives, vec![((3, 4), -1.0)]);
    }

    #[test]
    fn single_edge_and_path() {
        let g = Graph::new("e", 2, &[(0, 1)]).unwrap();
        assert_eq!(bfc_edge(&g, 0, 1).unwrap(), 2.0);
        let p = Graph::new("p4", 4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let values: Vec<f64> = bfc_all(&p).into_iter().map(|(_, b)| b).collect();
        assert_eq!(values, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn shared_outer_node_sets_gamma() {
        // Cycles through edge (0,1): 0-2-4-1, 0-2-5-1, 0-3-4-1. Nodes 2 and 4 each carry two.
        let g = Graph::new(
            "g",
            6,
            &[
                (0, 1),
                (0, 2),
                (0, 3),
                (1, 4),
                (1, 5),
                (2, 4),
                (2, 5),
                (3, 4),
            ],
        )
        .unwrap();
        let m = motif_counts(&g, 0, 1).unwrap();
        assert_eq!(
            m,
            MotifCounts {
                triangles: 0,
                squares_i: 2,
                squares_j: 2,
                gamma_max: 2
            }
        );
        assert_eq!(bfc_edge_exact(&g, 0, 1).unwrap(), q(0, 1));
        assert_eq!(bfc_bruteforce(&g, 0, 1).unwrap(), q(0, 1));
    }

    #[test]
    fn oracle_cross_checks() {
        for g in [cycle(4), complete(3), complete(5), barbell4(), cycle(7)] {
            for &(i, j) in g.edges() {
                assert_eq!(
                    bfc_edge_exact(&g, i, j).unwrap(),
                    bfc_bruteforce(&g, i, j).unwrap()
                );
            }
        }
    }

    #[test]
    fn non_edge_is_rejected() {
        let g = cycle(4);
        assert!(matches!(
            motif_counts(&g, 0, 2),
            Err(Error::NotAnEdge(0, 2))
        ));
        assert!(matches!(
            bfc_bruteforce(&g, 0, 2),
            Err(Error::NotAnEdge(0, 2))
        ));
    }

    #[test]
    fn empty_edge_set() {
        let g = Graph::new("empty", 3, &[]).unwrap();
        assert!(bfc_all(&g).is_empty());
    }

    #[test]
    fn summaries() {
        let per_edge = vec![((0, 1), -1.0), ((1, 2), 1.0)];
        let s = curvature_summary(&per_edge, None).unwrap();
        assert_eq!((s.weighted_mean, s.negative_fraction), (0.0, 0.5));
        let s = curvature_summary(&per_edge, Some(&[3.0, 1.0])).unwrap();
        assert_eq!((s.weighted_mean, s.negative_fraction), (-0.5, 0.75));
        let s = curvature_summary(&[((0, 1), 0.5), ((1, 2), 2.0)], None).unwrap();
        assert_eq!(s.negative_fraction, 0.0);
        assert!(curvature_summary(&per_edge, Some(&[-1.0, 2.0])).is_err());
        assert!(curvature_summary(&per_edge, Some(&[0.0, 0.0])).is_err());
        assert!(curvature_summary(&per_edge, Some(&[1.0])).is_err());
    }
}
