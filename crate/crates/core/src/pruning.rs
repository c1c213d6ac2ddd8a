// SPDX-License-Identifier: Apache-2.0

//! Causal-pruning edge sets and loss deltas from externally produced evaluations.
//!
//! * Set A: flagged edges with negative curvature
//! * Set B: flagged edges with positive curvature
//! * Set C: unflagged edges with negative curvature
//!
//! Zero-curvature edges belong to none of them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::activation::MaReport;
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeRef, Graph, GraphSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PruneTarget {
    A,
    B,
    C,
}

impl PruneTarget {
    pub fn variant(self) -> Variant {
        match self {
            PruneTarget::A => Variant::PruneA,
            PruneTarget::B => Variant::PruneB,
            PruneTarget::C => Variant::PruneC,
        }
    }

    /// Appended to the id of every emitted graph.
    pub fn suffix(self) -> String {
        format!("__{}", self.variant())
    }
}

impl FromStr for PruneTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(PruneTarget::A),
            "B" | "b" => Ok(PruneTarget::B),
            "C" | "c" => Ok(PruneTarget::C),
            other => Err(Error::InvalidArgument(format!(
                "unknown pruning set {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruningSets {
    pub set_a: Vec<EdgeRef>,
    pub set_b: Vec<EdgeRef>,
    pub set_c: Vec<EdgeRef>,
    /// Unflagged, positively curved edges; outside every pruning set.
    pub no_ma_positive: Vec<EdgeRef>,
    pub excluded_zero: Vec<EdgeRef>,
}

impl PruningSets {
    pub fn get(&self, target: PruneTarget) -> &[EdgeRef] {
        match target {
            PruneTarget::A => &self.set_a,
            PruneTarget::B => &self.set_b,
            PruneTarget::C => &self.set_c,
        }
    }

    pub fn total(&self) -> usize {
        self.set_a.len()
            + self.set_b.len()
            + self.set_c.len()
            + self.no_ma_positive.len()
            + self.excluded_zero.len()
    }
}

/// Partition structural edges by flag and curvature sign. Both maps must
/// cover exactly the same edges.
pub fn categorize(
    flags: &BTreeMap<EdgeRef, bool>,
    bfc: &BTreeMap<EdgeRef, f64>,
) -> Result<PruningSets> {
    if let Some(missing) = bfc.keys().find(|e| !flags.contains_key(*e)) {
        return Err(Error::InvalidArgument(format!(
            "edge {:?} of {} has a curvature but no activation flag",
            missing.endpoints, missing.graph_id
        )));
    }
    let mut sets = PruningSets::default();
    for (edge, &flagged) in flags {
        let value = *bfc.get(edge).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "edge {:?} of {} has an activation flag but no curvature",
                edge.endpoints, edge.graph_id
            ))
        })?;
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "edge {:?} of {} has non-finite curvature {value}",
                edge.endpoints, edge.graph_id
            )));
        }
        let bucket = match (flagged, value) {
            (_, 0.0) => &mut sets.excluded_zero,
            (true, v) if v < 0.0 => &mut sets.set_a,
            (true, _) => &mut sets.set_b,
            (false, v) if v < 0.0 => &mut sets.set_c,
            (false, _) => &mut sets.no_ma_positive,
        };
        bucket.push(edge.clone());
    }
    Ok(sets)
}

/// Edge flags keyed by edge, for every structural edge an MA report covers.
pub fn flags_from_reports(
    reports: &[MaReport],
    graphs: &GraphSet,
) -> Result<BTreeMap<EdgeRef, bool>> {
    let mut out = BTreeMap::new();
    for report in reports {
        let g = graphs.get(&report.graph_id)?;
        for (&(i, j), flag) in g.edges().iter().zip(report.edge_flags(g)) {
            if let Some(flag) = flag {
                let slot = out.entry(EdgeRef::new(g.id(), i, j)).or_insert(false);
                *slot |= flag;
            }
        }
    }
    Ok(out)
}

/// Remove the targeted edges from each graph and tag graph ids with the variant.
///
/// Graphs already carrying the tag are accepted and left edge-for-edge as they
/// are, so applying the same target twice equals applying it once.
pub fn emit_pruned(
    graphs: &[Graph],
    sets: &PruningSets,
    target: PruneTarget,
) -> Result<Vec<Graph>> {
    let suffix = target.suffix();
    let base_id = |g: &Graph| {
        g.id()
            .strip_suffix(suffix.as_str())
            .unwrap_or(g.id())
            .to_owned()
    };

    let mut by_graph: BTreeMap<&str, Vec<Edge>> = BTreeMap::new();
    for e in sets.get(target) {
        by_graph.entry(&e.graph_id).or_default().push(e.endpoints);
    }
    let known: BTreeSet<String> = graphs.iter().map(base_id).collect();
    if let Some(&missing) = by_graph.keys().find(|id| !known.contains(**id)) {
        return Err(Error::UnknownGraph(missing.to_owned()));
    }

    graphs
        .iter()
        .map(|g| {
            let base = base_id(g);
            let already_tagged = base != g.id();
            let remove = by_graph
                .get(base.as_str())
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            for &(i, j) in remove {
                g.check_node(i)?;
                g.check_node(j)?;
                if !already_tagged && !g.has_edge(i, j) {
                    return Err(Error::InvalidArgument(format!(
                        "edge ({i}, {j}) is not in graph {base}"
                    )));
                }
            }
            Ok(g.without_edges(remove).with_id(format!("{base}{suffix}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "prune_A")]
    PruneA,
    #[serde(rename = "prune_B")]
    PruneB,
    #[serde(rename = "prune_C")]
    PruneC,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::PruneA => "prune_A",
            Variant::PruneB => "prune_B",
            Variant::PruneC => "prune_C",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphLoss {
    pub graph_id: String,
    pub loss: f64,
}

/// Loss of one model on one dataset variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_graph: Option<Vec<GraphLoss>>,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        if !self.loss.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{} loss is not finite",
                self.variant
            )));
        }
        if let Some(bad) = self
            .per_graph
            .iter()
            .flatten()
            .find(|g| !g.loss.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "{} loss for graph {} is not finite",
                self.variant, bad.graph_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub variant: Variant,
    pub loss: f64,
    pub delta: f64,
    pub relative_error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaLossTable {
    pub baseline_loss: f64,
    pub rows: Vec<DeltaRow>,
    pub warnings: Vec<String>,
}

/// The decimal number a float prints as (its shortest round-trip form).
fn as_decimal(x: f64) -> Option<Decimal> {
    Decimal::from_str(&x.to_string()).ok()
}

fn decimal_to_f64(d: Decimal) -> f64 {
    d.normalize()
        .to_string()
        .parse()
        .expect("decimal strings parse as f64")
}

/// `variant - baseline` and its size relative to the baseline, in percent.
///
/// Arithmetic is done on the decimal values the reports carry, so a delta
/// between `0.6224` and `0.51` is exactly `0.1124`.
pub fn delta_loss(baseline: &EvalReport, variants: &[EvalReport]) -> Result<DeltaLossTable> {
    if baseline.variant != Variant::Baseline {
        return Err(Error::InvalidArgument(format!(
            "baseline report has variant {}",
            baseline.variant
        )));
    }
    baseline.validate()?;
    let mut warnings = Vec::new();
    let relative_ok = baseline.loss > 0.0;
    if !relative_ok {
        warnings.push(format!(
            "baseline loss {} is not positive; relative error omitted",
            baseline.loss
        ));
    }
    let base_dec = as_decimal(baseline.loss);

    let rows = variants
        .iter()
        .map(|v| {
            v.validate()?;
            let exact = base_dec.zip(as_decimal(v.loss)).map(|(b, l)| (b, l - b));
            let delta = exact.map_or(v.loss - baseline.loss, |(_, d)| decimal_to_f64(d));
            let relative_error_pct = relative_ok.then(|| match exact {
                Some((b, d)) => d
                    .checked_div(b)
                    .and_then(|r| r.checked_mul(Decimal::ONE_HUNDRED))
                    .map(decimal_to_f64)
                    .unwrap_or(delta / baseline.loss * 100.0),
                None => delta / baseline.loss * 100.0,
            });
            Ok(DeltaRow {
                variant: v.variant,
                loss: v.loss,
                delta,
                relative_error_pct,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DeltaLossTable {
        baseline_loss: baseline.loss,
        rows,
        warnings,
    })
}
