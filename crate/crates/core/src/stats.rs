// SPDX-License-Identifier: Apache-2.0

//! Curvature-conditioned statistics over massive-activation flags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::activation::{EntropyRecord, MaReport, RatioRecord};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Curvature values closer than this share an exact bin.
pub const EXACT_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "width")]
pub enum Binning {
    /// One bin per distinct curvature value (rounded to 1e-9).
    Exact,
    /// Half-open bins `[k·w, (k+1)·w)`.
    Width(f64),
}

impl Binning {
    fn validate(self) -> Result<()> {
        match self {
            Binning::Width(w) if !(w > 0.0 && w.is_finite()) => Err(Error::InvalidArgument(
                format!("bin width must be positive, got {w}"),
            )),
            _ => Ok(()),
        }
    }

    fn key(self, value: f64) -> i64 {
        match self {
            Binning::Exact => (value / EXACT_RESOLUTION).round() as i64,
            // The small offset keeps values sitting on a boundary, like 0.3 with
            // width 0.1, from falling into the lower bin through rounding.
            Binning::Width(w) => (value / w + 1e-9).floor() as i64,
        }
    }

    /// Representative value of a bin: the value itself or the bin's lower edge.
    fn value(self, key: i64) -> f64 {
        match self {
            Binning::Exact => key as f64 / 1e9,
            Binning::Width(w) => key as f64 * w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentEntry {
    pub curvature_value: f64,
    pub base_prob: f64,
    pub ma_prob: f64,
    /// `ma_prob / base_prob`; `None` when `base_prob` is zero.
    pub enrichment: Option<f64>,
    pub edges: usize,
    pub ma_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentTable {
    pub binning: Binning,
    pub entries: Vec<EnrichmentEntry>,
    pub total_edges: usize,
    pub total_ma_edges: usize,
    /// Set when no edge is flagged; every `ma_prob` is then zero.
    pub no_ma_edges: bool,
}

/// Enrichment of massive activations per curvature value over `(bfc, flagged)`
/// pairs of structural edges.
pub fn enrichment(edges: &[(f64, bool)], binning: Binning) -> Result<EnrichmentTable> {
    binning.validate()?;
    if edges.is_empty() {
        return Err(Error::Empty("no edges for enrichment"));
    }
    let mut counts: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for &(bfc, flagged) in edges {
        if !bfc.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite curvature {bfc}"
            )));
        }
        let slot = counts.entry(binning.key(bfc)).or_default();
        slot.0 += 1;
        slot.1 += usize::from(flagged);
    }
    let total_edges = edges.len();
    let total_ma_edges: usize = counts.values().map(|c| c.1).sum();

    let entries = counts
        .into_iter()
        .map(|(key, (n, n_ma))| {
            let base_prob = n as f64 / total_edges as f64;
            let ma_prob = if total_ma_edges > 0 {
                n_ma as f64 / total_ma_edges as f64
            } else {
                0.0
            };
            EnrichmentEntry {
                curvature_value: binning.value(key),
                base_prob,
                ma_prob,
                enrichment: (base_prob > 0.0).then(|| ma_prob / base_prob),
                edges: n,
                ma_edges: n_ma,
            }
        })
        .collect();

    Ok(EnrichmentTable {
        binning,
        entries,
        total_edges,
        total_ma_edges,
        no_ma_edges: total_ma_edges == 0,
    })
}

/// Per-layer activation profile of one structural edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLayerProfile {
    pub edge: Edge,
    pub bfc: f64,
    pub flagged: bool,
    /// Largest ratio in each layer over heads and both directions.
    pub layer_ratios: BTreeMap<usize, f64>,
}

/// Profiles for every structural edge of `g` that the report covers.
pub fn edge_layer_profiles(
    g: &Graph,
    ratios: &[RatioRecord],
    report: &MaReport,
    bfc: &[(Edge, f64)],
) -> Result<Vec<EdgeLayerProfile>> {
    if bfc.len() != g.num_edges() {
        return Err(Error::InvalidArgument(format!(
            "{} curvature values for {} edges of {}",
            bfc.len(),
            g.num_edges(),
            g.id()
        )));
    }
    let flags = report.edge_flags(g);
    let mut per_edge: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); g.num_edges()];
    for r in ratios {
        if r.src == r.dst {
            continue;
        }
        if let Some(idx) = g.edge_index(r.src, r.dst) {
            per_edge[idx]
                .entry(r.layer)
                .and_modify(|v| *v = v.max(r.ratio))
                .or_insert(r.ratio);
        }
    }
    Ok(g.edges()
        .iter()
        .zip(flags)
        .zip(per_edge)
        .zip(bfc)
        .filter_map(|(((&edge, flag), layer_ratios), &(_, b))| {
            flag.map(|flagged| EdgeLayerProfile {
                edge,
                bfc: b,
                flagged,
                layer_ratios,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEvolutionRow {
    pub curvature_value: f64,
    pub ma_edges: usize,
    /// Mean ratio per layer; layers without data are absent.
    pub mean_ratio: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEvolution {
    pub binning: Binning,
    pub rows: Vec<LayerEvolutionRow>,
}

/// Mean ratio per `(curvature bin, layer)` over flagged edges only.
pub fn layer_evolution(profiles: &[EdgeLayerProfile], binning: Binning) -> Result<LayerEvolution> {
    binning.validate()?;
    #[derive(Default)]
    struct Acc {
        edges: usize,
        sums: BTreeMap<usize, (f64, usize)>,
    }
    let mut bins: BTreeMap<i64, Acc> = BTreeMap::new();
    for p in profiles.iter().filter(|p| p.flagged) {
        let acc = bins.entry(binning.key(p.bfc)).or_default();
        acc.edges += 1;
        for (&layer, &ratio) in &p.layer_ratios {
            let cell = acc.sums.entry(layer).or_default();
            cell.0 += ratio;
            cell.1 += 1;
        }
    }
    let rows = bins
        .into_iter()
        .map(|(key, acc)| LayerEvolutionRow {
            curvature_value: binning.value(key),
            ma_edges: acc.edges,
            mean_ratio: acc
                .sums
                .into_iter()
                .map(|(layer, (sum, n))| (layer, sum / n as f64))
                .collect(),
        })
        .collect();
    Ok(LayerEvolution { binning, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pearson_r: f64,
    pub ols_slope: f64,
    pub ols_intercept: f64,
}

/// Pearson correlation and least-squares line `y = slope·x + intercept`.
pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "{} xs for {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 points".into()));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::InvalidArgument("xs have zero variance".into()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    if ys.iter().all(|&y| y == ys[0]) {
        return Ok(Correlation {
            pearson_r: 0.0,
            ols_slope: 0.0,
            ols_intercept: ys[0],
        });
    }
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let slope = sxy / sxx;
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(Correlation {
        pearson_r: r,
        ols_slope: slope,
        ols_intercept: mean_y - slope * mean_x,
    })
}

/// Curvature coordinate of each node: the minimum curvature over its incident
/// edges, `None` for isolated nodes.
pub fn node_min_curvature(g: &Graph, bfc: &[(Edge, f64)]) -> Vec<Option<f64>> {
    let mut out: Vec<Option<f64>> = vec![None; g.num_nodes()];
    for &((i, j), b) in bfc {
        for v in [i, j] {
            out[v] = Some(out[v].map_or(b, |cur| cur.min(b)));
        }
    }
    out
}

/// `(node curvature, entropy)` points for rows whose source node has a curvature.
pub fn entropy_vs_curvature(
    entropy: &[EntropyRecord],
    node_curvature: &[Option<f64>],
) -> Vec<(f64, f64)> {
    entropy
        .iter()
        .filter_map(|e| {
            node_curvature
                .get(e.src)
                .copied()
                .flatten()
                .map(|c| (c, e.entropy))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_edges_flagged_gives_unit_enrichment() {
        let edges = [(-1.0, true), (0.5, true), (0.5, true), (1.0, true)];
        let t = enrichment(&edges, Binning::Exact).unwrap();
        assert!(t.entries.iter().all(|e| e.enrichment == Some(1.0)));
    }

    #[test]
    fn concentrated_flags() {
        // c0 = -1 holds a quarter of the edges and every flag.
        let mut edges = vec![(-1.0, true)];
        edges.extend([(0.5, false), (1.0, false), (1.0, false)]);
        let t = enrichment(&edges, Binning::Exact).unwrap();
        assert_eq!(t.entries[0].curvature_value, -1.0);
        assert_eq!(t.entries[0].base_prob, 0.25);
        assert_eq!(t.entries[0].enrichment, Some(4.0));
        assert!(t.entries[1..].iter().all(|e| e.enrichment == Some(0.0)));
    }

    #[test]
    fn no_flags_sets_warning() {
        let t = enrichment(&[(0.0, false), (1.0, false)], Binning::Exact).unwrap();
        assert!(t.no_ma_edges);
        assert!(t.entries.iter().all(|e| e.ma_prob == 0.0));
    }

    #[test]
    fn exact_bins_absorb_float_drift() {
        let a = 5.0 / 6.0;
        let b = 0.5 + 1.0 / 3.0;
        assert_ne!(a, b);
        let t = enrichment(&[(a, true), (b, false)], Binning::Exact).unwrap();
        assert_eq!(t.entries.len(), 1);
    }

    #[test]
    fn width_bins_are_half_open() {
        let t = enrichment(
            &[(0.0, true), (0.25, false), (0.3, false)],
            Binning::Width(0.1),
        )
        .unwrap();
        let values: Vec<f64> = t.entries.iter().map(|e| e.curvature_value).collect();
        assert_eq!(values.len(), 3);
        assert!((values[2] - 0.3).abs() < 1e-12);
        assert!(enrichment(&[(0.0, true)], Binning::Width(0.0)).is_err());
        assert!(enrichment(&[], Binning::Exact).is_err());
    }

    fn profile(bfc: f64, flagged: bool, ratios: &[f64]) -> EdgeLayerProfile {
        EdgeLayerProfile {
            edge: (0, 1),
            bfc,
            flagged,
            layer_ratios: ratios.iter().copied().enumerate().collect(),
        }
    }

    #[test]
    fn layer_evolution_means() {
        let single =
            layer_evolution(&[profile(-1.0, true, &[10.0, 2.0, 1.0])], Binning::Exact).unwrap();
        let row: Vec<f64> = single.rows[0].mean_ratio.values().copied().collect();
        assert_eq!(row, vec![10.0, 2.0, 1.0]);

        let pair = layer_evolution(
            &[
                profile(0.5, true, &[4.0]),
                profile(0.5, true, &[6.0]),
                profile(1.0, false, &[100.0]),
            ],
            Binning::Exact,
        )
        .unwrap();
        assert_eq!(pair.rows.len(), 1);
        assert_eq!(pair.rows[0].mean_ratio[&0], 5.0);
    }

    #[test]
    fn correlation_cases() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let line: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let c = correlate(&xs, &line).unwrap();
        assert_eq!((c.ols_slope, c.ols_intercept, c.pearson_r), (2.0, 1.0, 1.0));

        let c = correlate(&xs, &[3.0; 5]).unwrap();
        assert_eq!((c.ols_slope, c.pearson_r), (0.0, 0.0));

        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let c = correlate(&xs, &neg).unwrap();
        assert_eq!((c.ols_slope, c.pearson_r), (-1.0, -1.0));

        assert!(correlate(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(correlate(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(correlate(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn node_curvature_takes_minimum() {
        let g = Graph::new("p", 4, &[(0, 1), (1, 2)]).unwrap();
        let bfc = vec![((0, 1), 1.0), ((1, 2), -0.5)];
        assert_eq!(
            node_min_curvature(&g, &bfc),
            vec![Some(1.0), Some(-0.5), Some(-0.5), None]
        );
        let entropy = [
            EntropyRecord {
                layer: 0,
                head: 0,
                src: 1,
                entropy: 0.7,
            },
            EntropyRecord {
                layer: 0,
                head: 0,
                src: 3,
                entropy: 0.1,
            },
        ];
        assert_eq!(
            entropy_vs_curvature(&entropy, &node_min_curvature(&g, &bfc)),
            vec![(-0.5, 0.7)]
        );
    }
}
