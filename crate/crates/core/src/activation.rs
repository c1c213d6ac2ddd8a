// SPDX-License-Identifier: Apache-2.0

//! Attention logs, median-normalised activation ratios and massive-activation flags.
//!
//! A pair `(src, dst)` is a massive activation when its largest ratio over all
//! layers and heads reaches the percentile cutoff of the per-pair maxima,
//! pooled over the whole dataset (or per graph, for ablations).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::curvature::bfc_all;
use crate::error::{Error, Result};
use crate::graph::{canonical, Graph, GraphSet};
use crate::io::read_jsonl;

/// Medians and row sums below this are treated as zero.
pub const EPSILON: f64 = 1e-12;

pub const DEFAULT_PERCENTILE: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub layer: usize,
    pub head: usize,
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationLog {
    pub graph_id: String,
    pub model: String,
    pub records: Vec<AttentionRecord>,
}

impl ActivationLog {
    /// Reject negative or non-finite weights and repeated `(layer, head, src, dst)` keys.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::with_capacity(self.records.len());
        for r in &self.records {
            if !r.weight.is_finite() || r.weight < 0.0 {
                return Err(Error::invalid_log(
                    &self.graph_id,
                    format!(
                        "weight {} at (layer {}, head {}, {} -> {}) must be finite and >= 0",
                        r.weight, r.layer, r.head, r.src, r.dst
                    ),
                ));
            }
            if seen.insert((r.layer, r.head, r.src, r.dst), ()).is_some() {
                return Err(Error::invalid_log(
                    &self.graph_id,
                    format!(
                        "duplicate record (layer {}, head {}, {} -> {})",
                        r.layer, r.head, r.src, r.dst
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Check that every referenced node exists in `g`.
    pub fn check_against(&self, g: &Graph) -> Result<()> {
        if self.graph_id != g.id() {
            return Err(Error::invalid_log(
                &self.graph_id,
                format!("log does not belong to graph {}", g.id()),
            ));
        }
        for r in &self.records {
            g.check_node(r.src)?;
            g.check_node(r.dst)?;
        }
        Ok(())
    }
}

pub fn load_logs(path: &Path) -> Result<Vec<ActivationLog>> {
    let logs: Vec<ActivationLog> = read_jsonl(path)?;
    for log in &logs {
        log.validate()?;
    }
    Ok(logs)
}

/// Normalisation group for the median in the activation ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianScope {
    Layer,
    #[default]
    LayerHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub layer: usize,
    pub head: usize,
    pub src: usize,
    pub dst: usize,
    pub ratio: f64,
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// `|weight| / median |weight|` over the record's group. Output follows log order.
pub fn activation_ratios(log: &ActivationLog, scope: MedianScope) -> Result<Vec<RatioRecord>> {
    let key = |r: &AttentionRecord| match scope {
        MedianScope::Layer => (r.layer, None),
        MedianScope::LayerHead => (r.layer, Some(r.head)),
    };
    let mut groups: BTreeMap<(usize, Option<usize>), Vec<f64>> = BTreeMap::new();
    for r in &log.records {
        groups.entry(key(r)).or_default().push(r.weight.abs());
    }
    let mut medians = HashMap::with_capacity(groups.len());
    for ((layer, head), mut values) in groups {
        let m = median(&mut values);
        if !(m >= EPSILON) {
            return Err(Error::DegenerateGroup { layer, head });
        }
        medians.insert((layer, head), m);
    }
    Ok(log
        .records
        .iter()
        .map(|r| RatioRecord {
            layer: r.layer,
            head: r.head,
            src: r.src,
            dst: r.dst,
            ratio: r.weight.abs() / medians[&key(r)],
        })
        .collect())
}

/// Largest ratio of one directed pair and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMax {
    pub src: usize,
    pub dst: usize,
    pub max_ratio: f64,
    pub argmax_layer: usize,
    pub argmax_head: usize,
}

/// Per-pair maxima sorted by `(src, dst)`. Ties go to the lowest `(layer, head)`.
pub fn pair_maxima(ratios: &[RatioRecord]) -> Vec<PairMax> {
    let mut best: BTreeMap<(usize, usize), PairMax> = BTreeMap::new();
    for r in ratios {
        let candidate = PairMax {
            src: r.src,
            dst: r.dst,
            max_ratio: r.ratio,
            argmax_layer: r.layer,
            argmax_head: r.head,
        };
        best.entry((r.src, r.dst))
            .and_modify(|cur| {
                let better = r.ratio > cur.max_ratio
                    || (r.ratio == cur.max_ratio
                        && (r.layer, r.head) < (cur.argmax_layer, cur.argmax_head));
                if better {
                    *cur = candidate;
                }
            })
            .or_insert(candidate);
    }
    best.into_values().collect()
}

/// Nearest-rank cutoff with inclusive ties: the value at 0-based rank
/// `floor(p·N/100)` of the ascending sort. With distinct values exactly
/// `ceil((1 - p/100)·N)` of them are `>=` the cutoff.
pub fn percentile_cutoff(values: &[f64], percentile: f64) -> Result<f64> {
    check_percentile(percentile)?;
    if values.is_empty() {
        return Err(Error::Empty("no ratios to threshold"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((percentile * n as f64) / 100.0).floor() as usize;
    Ok(sorted[rank.min(n - 1)])
}

fn check_percentile(percentile: f64) -> Result<()> {
    if percentile > 0.0 && percentile < 100.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "percentile must lie in (0, 100), got {percentile}"
        )))
    }
}

/// Shortest-path length of an attention pair in the structural graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hop {
    Hops(usize),
    Unreachable,
}

impl From<Option<usize>> for Hop {
    fn from(d: Option<usize>) -> Self {
        d.map_or(Hop::Unreachable, Hop::Hops)
    }
}

impl Serialize for Hop {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Hop::Hops(n) => s.serialize_u64(*n as u64),
            Hop::Unreachable => s.serialize_str("unreachable"),
        }
    }
}

impl<'de> Deserialize<'de> for Hop {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Hops(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Hops(n) => Ok(Hop::Hops(n)),
            Raw::Text(t) if t == "unreachable" => Ok(Hop::Unreachable),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid hop {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaEntry {
    pub src: usize,
    pub dst: usize,
    pub max_ratio: f64,
    pub argmax_layer: usize,
    pub argmax_head: usize,
    pub flagged: bool,
    pub hop: Hop,
    /// Present iff `(src, dst)` is a structural edge.
    pub bfc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaReport {
    pub graph_id: String,
    pub model: String,
    pub threshold_percentile: f64,
    pub cutoff: f64,
    pub entries: Vec<MaEntry>,
}

impl MaReport {
    pub fn flagged(&self) -> impl Iterator<Item = &MaEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }

    /// Per structural edge of `g`, in canonical order: `Some(flag)` when the
    /// report covers either direction of the edge (flagged if either direction
    /// is), `None` when no attention was logged on it.
    pub fn edge_flags(&self, g: &Graph) -> Vec<Option<bool>> {
        self.flags_for_edges(g.edges())
    }

    /// Same as [`MaReport::edge_flags`] for an explicit edge list.
    pub fn flags_for_edges(&self, edges: &[(usize, usize)]) -> Vec<Option<bool>> {
        let index: HashMap<(usize, usize), usize> = edges
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| (canonical(i, j), k))
            .collect();
        let mut flags = vec![None; edges.len()];
        for e in &self.entries {
            if e.src == e.dst {
                continue;
            }
            if let Some(&idx) = index.get(&canonical(e.src, e.dst)) {
                let slot = flags[idx].get_or_insert(false);
                *slot |= e.flagged;
            }
        }
        flags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffScope {
    #[default]
    Dataset,
    PerGraph,
}

/// Ratios of one logged graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRatios {
    pub graph_id: String,
    pub model: String,
    pub ratios: Vec<RatioRecord>,
}

impl GraphRatios {
    pub fn from_log(log: &ActivationLog, scope: MedianScope) -> Result<Self> {
        Ok(GraphRatios {
            graph_id: log.graph_id.clone(),
            model: log.model.clone(),
            ratios: activation_ratios(log, scope)?,
        })
    }
}

/// Flag massive activations and annotate each pair with its hop length and,
/// for structural edges, its curvature.
pub fn flag_massive(
    dataset: &[GraphRatios],
    graphs: &GraphSet,
    percentile: f64,
    scope: CutoffScope,
) -> Result<Vec<MaReport>> {
    check_percentile(percentile)?;
    if dataset.iter().all(|d| d.ratios.is_empty()) {
        return Err(Error::Empty("no attention ratios in dataset"));
    }
    let maxima: Vec<Vec<PairMax>> = dataset.iter().map(|d| pair_maxima(&d.ratios)).collect();

    let dataset_cutoff = match scope {
        CutoffScope::Dataset => {
            let pooled: Vec<f64> = maxima.iter().flatten().map(|p| p.max_ratio).collect();
            Some(percentile_cutoff(&pooled, percentile)?)
        }
        CutoffScope::PerGraph => None,
    };

    dataset
        .iter()
        .zip(maxima)
        .map(|(d, pairs)| {
            let g = graphs.get(&d.graph_id)?;
            let cutoff = match dataset_cutoff {
                Some(c) => c,
                None if pairs.is_empty() => f64::INFINITY,
                None => {
                    let values: Vec<f64> = pairs.iter().map(|p| p.max_ratio).collect();
                    percentile_cutoff(&values, percentile)?
                }
            };
            Ok(MaReport {
                graph_id: d.graph_id.clone(),
                model: d.model.clone(),
                threshold_percentile: percentile,
                cutoff,
                entries: annotate(g, &pairs, cutoff)?,
            })
        })
        .collect()
}

fn annotate(g: &Graph, pairs: &[PairMax], cutoff: f64) -> Result<Vec<MaEntry>> {
    let curvature = bfc_all(g);
    let mut distances: HashMap<usize, Vec<Option<usize>>> = HashMap::new();
    pairs
        .iter()
        .map(|p| {
            g.check_node(p.dst)?;
            let hop = if p.src == p.dst {
                g.check_node(p.src)?;
                Hop::Hops(0)
            } else {
                if let std::collections::hash_map::Entry::Vacant(slot) = distances.entry(p.src) {
                    slot.insert(g.bfs_distances(p.src)?);
                }
                Hop::from(distances[&p.src][p.dst])
            };
            let bfc = (p.src != p.dst)
                .then(|| g.edge_index(p.src, p.dst))
                .flatten()
                .map(|idx| curvature[idx].1);
            Ok(MaEntry {
                src: p.src,
                dst: p.dst,
                max_ratio: p.max_ratio,
                argmax_layer: p.argmax_layer,
                argmax_head: p.argmax_head,
                flagged: p.max_ratio >= cutoff,
                hop,
                bfc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HopHistogram {
    pub by_hop: BTreeMap<usize, usize>,
    pub unreachable: usize,
}

impl HopHistogram {
    pub fn total(&self) -> usize {
        self.by_hop.values().sum::<usize>() + self.unreachable
    }
}

/// Hop lengths of flagged pairs, recomputed from the structural graphs.
pub fn ma_hop_lengths(reports: &[MaReport], graphs: &GraphSet) -> Result<HopHistogram> {
    let mut hist = HopHistogram::default();
    for report in reports {
        let g = graphs.get(&report.graph_id)?;
        let mut distances: HashMap<usize, Vec<Option<usize>>> = HashMap::new();
        for e in report.flagged() {
            let hop = if e.src == e.dst {
                g.check_node(e.src)?;
                Some(0)
            } else {
                g.check_node(e.dst)?;
                if let std::collections::hash_map::Entry::Vacant(slot) = distances.entry(e.src) {
                    slot.insert(g.bfs_distances(e.src)?);
                }
                distances[&e.src][e.dst]
            };
            match hop {
                Some(h) => *hist.by_hop.entry(h).or_default() += 1,
                None => hist.unreachable += 1,
            }
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub layer: usize,
    pub head: usize,
    pub src: usize,
    pub entropy: f64,
}

/// Shannon entropy (nats) of each `(layer, head, src)` attention row after
/// renormalising over the logged destinations.
pub fn attention_entropy(log: &ActivationLog) -> Result<Vec<EntropyRecord>> {
    let mut rows: BTreeMap<(usize, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in &log.records {
        rows.entry((r.layer, r.head, r.src))
            .or_default()
            .push(r.weight.abs());
    }
    rows.into_iter()
        .map(|((layer, head, src), weights)| {
            let total: f64 = weights.iter().sum();
            if !(total >= EPSILON) {
                return Err(Error::DegenerateRow { layer, head, src });
            }
            let entropy = -weights
                .iter()
                .filter(|&&w| w > 0.0)
                .map(|&w| {
                    let p = w / total;
                    p * p.ln()
                })
                .sum::<f64>();
            Ok(EntropyRecord {
                layer,
                head,
                src,
                entropy: entropy.max(0.0),
            })
        })
        .collect()
}

/// Canonical structural edge of a pair, if any.
pub fn structural_edge(g: &Graph, src: usize, dst: usize) -> Option<(usize, usize)> {
    (src != dst && g.has_edge(src, dst)).then(|| canonical(src, dst))
}
