// SPDX-License-Identifier: Apache-2.0

//! Activation-weighted effective graphs and the curvature shift they induce.
//!
//! The effective graph keeps every node pair whose symmetrised activation
//! ratio reaches `theta`. Curvature is computed on that unweighted edge set;
//! the activation mass only enters as the weight of each edge in the summary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::activation::{activation_ratios, ActivationLog, MedianScope};
use crate::curvature::{bfc_all, curvature_summary, CurvatureSummary};
use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, Graph};
use crate::spectral::{spectral_gap, SpectralOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationGraphOptions {
    pub aggregation: Aggregation,
    /// Ratio cutoff; pairs with aggregate `>= theta` become effective edges.
    pub theta: f64,
    pub median_scope: MedianScope,
    /// Ignore attention between nodes that are not structurally adjacent.
    pub structural_only: bool,
}

impl Default for ActivationGraphOptions {
    fn default() -> Self {
        ActivationGraphOptions {
            aggregation: Aggregation::Mean,
            theta: 1.0,
            median_scope: MedianScope::LayerHead,
            structural_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPair {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationGraph {
    pub base_graph_id: String,
    pub num_nodes: usize,
    /// Symmetrised pairs, `src < dst`, canonical order.
    pub pairs: Vec<WeightedPair>,
    /// Pairs retained by the threshold.
    pub effective_edges: Vec<WeightedPair>,
}

impl ActivationGraph {
    pub fn edges(&self) -> Vec<Edge> {
        self.effective_edges
            .iter()
            .map(|p| (p.src, p.dst))
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.effective_edges.iter().map(|p| p.weight).collect()
    }

    /// Re-threshold the same pairs.
    pub fn with_threshold(&self, theta: f64) -> ActivationGraph {
        ActivationGraph {
            effective_edges: self
                .pairs
                .iter()
                .copied()
                .filter(|p| p.weight >= theta)
                .collect(),
            ..self.clone()
        }
    }

    pub fn effective_graph(&self) -> Graph {
        Graph::new(self.base_graph_id.clone(), self.num_nodes, &self.edges())
            .expect("effective edges are canonical and in range")
    }
}

pub fn build_activation_graph(
    g: &Graph,
    log: &ActivationLog,
    opts: &ActivationGraphOptions,
) -> Result<ActivationGraph> {
    if log.graph_id != g.id() {
        return Err(Error::invalid_log(
            &log.graph_id,
            format!("log does not belong to graph {}", g.id()),
        ));
    }
    if opts.theta.is_nan() || opts.theta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "theta must be >= 0, got {}",
            opts.theta
        )));
    }
    log.check_against(g)?;

    // Aggregate each direction over layers and heads.
    let mut directed: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for r in activation_ratios(log, opts.median_scope)? {
        if r.src == r.dst || (opts.structural_only && !g.has_edge(r.src, r.dst)) {
            continue;
        }
        let slot = directed.entry((r.src, r.dst)).or_insert((0.0, 0));
        match opts.aggregation {
            Aggregation::Mean => slot.0 += r.ratio,
            Aggregation::Max => slot.0 = slot.0.max(r.ratio),
        }
        slot.1 += 1;
    }

    // Symmetrise by averaging the directions that were logged.
    let mut undirected: BTreeMap<Edge, (f64, usize)> = BTreeMap::new();
    for ((src, dst), (acc, count)) in directed {
        let value = match opts.aggregation {
            Aggregation::Mean => acc / count as f64,
            Aggregation::Max => acc,
        };
        let slot = undirected.entry(canonical(src, dst)).or_insert((0.0, 0));
        slot.0 += value;
        slot.1 += 1;
    }
    let pairs: Vec<WeightedPair> = undirected
        .into_iter()
        .map(|((src, dst), (sum, n))| WeightedPair {
            src,
            dst,
            weight: sum / n as f64,
        })
        .collect();

    let ag = ActivationGraph {
        base_graph_id: g.id().to_owned(),
        num_nodes: g.num_nodes(),
        pairs,
        effective_edges: Vec::new(),
    };
    Ok(ag.with_threshold(opts.theta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub graph_id: String,
    pub static_summary: CurvatureSummary,
    pub activation_summary: CurvatureSummary,
    pub static_negative_fraction: f64,
    pub activation_negative_fraction: f64,
    pub static_spectral_gap: f64,
    pub activation_spectral_gap: f64,
}

impl CollapseReport {
    pub fn mean_shift(&self) -> f64 {
        self.activation_summary.weighted_mean - self.static_summary.weighted_mean
    }

    pub fn negative_fraction_shift(&self) -> f64 {
        self.activation_negative_fraction - self.static_negative_fraction
    }

    pub fn spectral_gap_shift(&self) -> f64 {
        self.activation_spectral_gap - self.static_spectral_gap
    }
}

/// Compare curvature and spectral gap of the static graph with its activation graph.
pub fn curvature_shift(
    g: &Graph,
    ag: &ActivationGraph,
    spectral: SpectralOptions,
) -> Result<CollapseReport> {
    if ag.base_graph_id != g.id() || ag.num_nodes != g.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "activation graph {} was not built from graph {}",
            ag.base_graph_id,
            g.id()
        )));
    }
    if ag.effective_edges.is_empty() {
        return Err(Error::Empty("activation graph has no effective edges"));
    }
    let static_summary = curvature_summary(&bfc_all(g), None)?;
    let effective = ag.effective_graph();
    let activation_summary = curvature_summary(&bfc_all(&effective), Some(&ag.weights()))?;
    Ok(CollapseReport {
        graph_id: g.id().to_owned(),
        static_negative_fraction: static_summary.negative_fraction,
        activation_negative_fraction: activation_summary.negative_fraction,
        static_spectral_gap: spectral_gap(g.edges(), g.num_nodes(), spectral)?,
        activation_spectral_gap: spectral_gap(effective.edges(), g.num_nodes(), spectral)?,
        static_summary,
        activation_summary,
    })
}

/// Dataset-level view: curvature statistics pooled over all edges of all graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseAggregate {
    pub graphs: usize,
    pub static_weighted_mean: f64,
    pub activation_weighted_mean: f64,
    pub static_negative_fraction: f64,
    pub activation_negative_fraction: f64,
    pub mean_static_spectral_gap: f64,
    pub mean_activation_spectral_gap: f64,
    /// Graphs whose activation graph has a strictly lower spectral gap.
    pub lower_gap_count: usize,
}

pub fn aggregate_collapse(reports: &[CollapseReport]) -> Result<CollapseAggregate> {
    if reports.is_empty() {
        return Err(Error::Empty("no collapse reports"));
    }
    let pooled = |pick: fn(&CollapseReport) -> &CurvatureSummary| {
        let (mut wsum, mut wneg, mut wtot) = (0.0, 0.0, 0.0);
        for s in reports.iter().map(pick) {
            for ((_, b), w) in s.per_edge.iter().zip(&s.weights_used) {
                wsum += b * w;
                wtot += w;
                if *b < 0.0 {
                    wneg += w;
                }
            }
        }
        (wsum / wtot, wneg / wtot)
    };
    let (static_mean, static_neg) = pooled(|r| &r.static_summary);
    let (act_mean, act_neg) = pooled(|r| &r.activation_summary);
    let n = reports.len() as f64;
    Ok(CollapseAggregate {
        graphs: reports.len(),
        static_weighted_mean: static_mean,
        activation_weighted_mean: act_mean,
        static_negative_fraction: static_neg,
        activation_negative_fraction: act_neg,
        mean_static_spectral_gap: reports.iter().map(|r| r.static_spectral_gap).sum::<f64>() / n,
        mean_activation_spectral_gap: reports
            .iter()
            .map(|r| r.activation_spectral_gap)
            .sum::<f64>()
            / n,
        lower_gap_count: reports
            .iter()
            .filter(|r| r.activation_spectral_gap < r.static_spectral_gap)
            .count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::AttentionRecord;
    use crate::curvature::{bfc_bruteforce, to_f64};

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
        Graph::new("bb", 8, &edges).unwrap()
    }

    /// Both directions of every listed pair, one layer, one head.
    fn uniform_log(g: &Graph, pairs: &[(usize, usize, f64)]) -> ActivationLog {
        let records = pairs
            .iter()
            .flat_map(|&(a, b, w)| {
                [(a, b), (b, a)].map(|(src, dst)| AttentionRecord {
                    layer: 0,
                    head: 0,
                    src,
                    dst,
                    weight: w,
                })
            })
            .collect();
        ActivationLog {
            graph_id: g.id().into(),
            model: "test".into(),
            records,
        }
    }

    #[test]
    fn identity_threshold_recovers_static_graph() {
        let g = barbell4();
        let pairs: Vec<_> = g.edges().iter().map(|&(a, b)| (a, b, 0.2)).collect();
        let ag = build_activation_graph(&g, &uniform_log(&g, &pairs), &Default::default()).unwrap();
        assert_eq!(ag.edges(), g.edges());
        let report = curvature_shift(&g, &ag, SpectralOptions::default()).unwrap();
        assert_eq!(report.static_summary, report.activation_summary);
        assert_eq!(report.mean_shift(), 0.0);
        assert_eq!(report.negative_fraction_shift(), 0.0);
        assert_eq!(report.spectral_gap_shift(), 0.0);
    }

    #[test]
    fn infinite_threshold_is_empty() {
        let g = barbell4();
        let pairs: Vec<_> = g.edges().iter().map(|&(a, b)| (a, b, 0.2)).collect();
        let opts = ActivationGraphOptions {
            theta: f64::INFINITY,
            ..Default::default()
        };
        let ag = build_activation_graph(&g, &uniform_log(&g, &pairs), &opts).unwrap();
        assert!(ag.effective_edges.is_empty());
        assert!(matches!(
            curvature_shift(&g, &ag, SpectralOptions::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn zero_threshold_admits_non_edges() {
        let g = barbell4();
        let log = uniform_log(&g, &[(0, 1, 0.5), (0, 7, 0.1)]);
        let opts = ActivationGraphOptions {
            theta: 0.0,
            ..Default::default()
        };
        let ag = build_activation_graph(&g, &log, &opts).unwrap();
        assert_eq!(ag.edges(), vec![(0, 1), (0, 7)]);
        let structural = ActivationGraphOptions {
            structural_only: true,
            ..opts
        };
        let ag = build_activation_graph(&g, &log, &structural).unwrap();
        assert_eq!(ag.edges(), vec![(0, 1)]);
    }

    #[test]
    fn directions_are_averaged() {
        let g = Graph::new("p", 3, &[(0, 1), (1, 2)]).unwrap();
        let mut log = uniform_log(&g, &[(1, 2, 1.0)]);
        log.records.push(AttentionRecord {
            layer: 0,
            head: 0,
            src: 0,
            dst: 1,
            weight: 1.0,
        });
        log.records.push(AttentionRecord {
            layer: 0,
            head: 0,
            src: 1,
            dst: 0,
            weight: 3.0,
        });
        // Median of {1, 1, 1, 3} is 1, so ratios are the weights.
        let ag = build_activation_graph(&g, &log, &Default::default()).unwrap();
        assert_eq!(ag.pairs[0].weight, 2.0);
        assert_eq!(ag.pairs[1].weight, 1.0);
    }

    #[test]
    fn max_aggregation() {
        let g = Graph::new("p", 3, &[(0, 1), (1, 2)]).unwrap();
        let mut log = uniform_log(&g, &[(0, 1, 1.0), (1, 2, 1.0)]);
        // Layer 1 weights {3, 3, 1, 1}: median 2, so (0,1) has ratio 1.5 there.
        for (src, dst, w) in [(0, 1, 3.0), (1, 0, 3.0), (1, 2, 1.0), (2, 1, 1.0)] {
            log.records.push(AttentionRecord {
                layer: 1,
                head: 0,
                src,
                dst,
                weight: w,
            });
        }
        let mean = build_activation_graph(&g, &log, &Default::default()).unwrap();
        assert_eq!(mean.pairs[0].weight, 1.25);
        assert_eq!(mean.pairs[1].weight, 0.75);
        let max_opts = ActivationGraphOptions {
            aggregation: Aggregation::Max,
            ..Default::default()
        };
        let max = build_activation_graph(&g, &log, &max_opts).unwrap();
        assert_eq!(max.pairs[0].weight, 1.5);
        assert_eq!(max.pairs[1].weight, 1.0);
        assert_eq!(mean.edges(), vec![(0, 1)]);
        assert_eq!(max.edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn dropping_a_clique_edge_changes_bridge_curvature() {
        let g = barbell4();
        // Every edge except (2, 3), which touches the bridge endpoint 3.
        let kept: Vec<_> = g
            .edges()
            .iter()
            .filter(|&&e| e != (2, 3))
            .map(|&(a, b)| (a, b, 1.0))
            .collect();
        let mut log = uniform_log(&g, &kept);
        log.records.push(AttentionRecord {
            layer: 0,
            head: 0,
            src: 2,
            dst: 3,
            weight: 0.1,
        });
        log.records.push(AttentionRecord {
            layer: 0,
            head: 0,
            src: 3,
            dst: 2,
            weight: 0.1,
        });
        let ag = build_activation_graph(&g, &log, &Default::default()).unwrap();
        assert_eq!(ag.effective_edges.len(), 12);
        let report = curvature_shift(&g, &ag, SpectralOptions::default()).unwrap();
        let pruned = g.without_edges(&[(2, 3)]);
        let bridge = report
            .activation_summary
            .per_edge
            .iter()
            .find(|(e, _)| *e == (3, 4))
            .unwrap()
            .1;
        assert_eq!(bridge, to_f64(bfc_bruteforce(&pruned, 3, 4).unwrap()));
        // d_3 drops to 3: 2/3 + 2/4 - 2.
        assert_eq!(bridge, to_f64(crate::curvature::Exact::new(-5, 6)));
    }

    #[test]
    fn mismatched_graph_is_rejected() {
        let g = barbell4();
        let mut log = uniform_log(&g, &[(0, 1, 1.0)]);
        log.graph_id = "other".into();
        assert!(build_activation_graph(&g, &log, &Default::default()).is_err());
    }

    #[test]
    fn aggregate_pools_edges() {
        let g = barbell4();
        let pairs: Vec<_> = g.edges().iter().map(|&(a, b)| (a, b, 0.2)).collect();
        let ag = build_activation_graph(&g, &uniform_log(&g, &pairs), &Default::default()).unwrap();
        let report = curvature_shift(&g, &ag, SpectralOptions::default()).unwrap();
        let agg = aggregate_collapse(&[report.clone(), report.clone()]).unwrap();
        assert_eq!(agg.graphs, 2);
        assert!((agg.static_negative_fraction - 1.0 / 13.0).abs() < 1e-15);
        assert_eq!(agg.lower_gap_count, 0);
        assert!(aggregate_collapse(&[]).is_err());
    }
}
