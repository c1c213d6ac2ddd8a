// SPDX-License-Identifier: Apache-2.0

//! File formats exchanged between subcommands.

use std::path::Path;

use anyhow::Context;
use curveprobe_core::activation::{ActivationLog, MaReport};
use curveprobe_core::curvature::{bfc_all, curvature_summary};
use curveprobe_core::io::parse_jsonl;
use curveprobe_core::pruning::EvalReport;
use curveprobe_core::{Edge, Graph, GraphSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// One line of `curveprobe curvature` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfcRecord {
    pub graph_id: String,
    pub edges: Vec<[usize; 2]>,
    pub bfc: Vec<f64>,
    /// Unweighted mean; `null` for a graph without edges.
    pub weighted_mean: Option<f64>,
    pub negative_fraction: Option<f64>,
}

impl BfcRecord {
    pub fn from_graph(g: &Graph) -> curveprobe_core::Result<BfcRecord> {
        let per_edge = bfc_all(g);
        let summary = if per_edge.is_empty() {
            None
        } else {
            Some(curvature_summary(&per_edge, None)?)
        };
        Ok(BfcRecord {
            graph_id: g.id().to_owned(),
            edges: per_edge.iter().map(|&((i, j), _)| [i, j]).collect(),
            bfc: per_edge.iter().map(|&(_, b)| b).collect(),
            weighted_mean: summary.as_ref().map(|s| s.weighted_mean),
            negative_fraction: summary.as_ref().map(|s| s.negative_fraction),
        })
    }

    pub fn edge_list(&self) -> Vec<Edge> {
        self.edges.iter().map(|&[i, j]| (i, j)).collect()
    }

    /// Structural graph rebuilt from the edge list (nodes `0..=max endpoint`).
    pub fn graph(&self) -> curveprobe_core::Result<Graph> {
        let n = self.edges.iter().flatten().max().map_or(0, |m| m + 1);
        Graph::new(self.graph_id.clone(), n, &self.edge_list())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(
            self.edges.len() == self.bfc.len(),
            "curvature record {} has {} edges but {} values",
            self.graph_id,
            self.edges.len(),
            self.bfc.len()
        );
        Ok(())
    }
}

fn jsonl<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> anyhow::Result<Vec<T>> {
    parse_jsonl(bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn graphs(bytes: &[u8], path: &Path) -> anyhow::Result<GraphSet> {
    let graphs = curveprobe_core::graph::parse_graphs(bytes)
        .with_context(|| format!("parsing {}", path.display()))?;
    GraphSet::new(graphs).with_context(|| format!("loading {}", path.display()))
}

pub fn logs(bytes: &[u8], path: &Path) -> anyhow::Result<Vec<ActivationLog>> {
    let logs: Vec<ActivationLog> = jsonl(bytes, path)?;
    let mut seen = std::collections::BTreeSet::new();
    for log in &logs {
        log.validate()
            .with_context(|| format!("in {}", path.display()))?;
        anyhow::ensure!(
            seen.insert(log.graph_id.as_str()),
            "{}: more than one log for graph {}",
            path.display(),
            log.graph_id
        );
    }
    Ok(logs)
}

pub fn bfc_records(bytes: &[u8], path: &Path) -> anyhow::Result<Vec<BfcRecord>> {
    let records: Vec<BfcRecord> = jsonl(bytes, path)?;
    let mut seen = std::collections::BTreeSet::new();
    for r in &records {
        r.validate()
            .with_context(|| format!("in {}", path.display()))?;
        anyhow::ensure!(
            seen.insert(r.graph_id.as_str()),
            "{}: duplicate graph {}",
            path.display(),
            r.graph_id
        );
    }
    Ok(records)
}

pub fn ma_reports(bytes: &[u8], path: &Path) -> anyhow::Result<Vec<MaReport>> {
    jsonl(bytes, path)
}

pub fn eval_report(bytes: &[u8], path: &Path) -> anyhow::Result<EvalReport> {
    let report: EvalReport =
        serde_json::from_slice(bytes).with_context(|| format!("parsing {}", path.display()))?;
    report
        .validate()
        .with_context(|| format!("in {}", path.display()))?;
    Ok(report)
}
