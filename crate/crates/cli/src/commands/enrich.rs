// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use curveprobe_core::activation::{activation_ratios, attention_entropy, MedianScope};
use curveprobe_core::stats::{
    correlate, edge_layer_profiles, enrichment, entropy_vs_curvature, layer_evolution,
    node_min_curvature, Binning, Correlation, EnrichmentTable, LayerEvolution,
};
use serde::Serialize;

use crate::formats;
use crate::output::{companion, sibling, Run};
use crate::settings::{Settings, UsageError};
use crate::EnrichArgs;

#[derive(Serialize)]
struct EntropySummary {
    points: usize,
    /// `null` when the points do not support a fit.
    fit: Option<Correlation>,
}

#[derive(Serialize)]
struct EnrichOutput {
    #[serde(flatten)]
    table: EnrichmentTable,
    /// Structural edges with no logged attention in either direction.
    uncovered_edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    layer_evolution: Option<LayerEvolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entropy_vs_curvature: Option<EntropySummary>,
}

#[derive(Serialize)]
struct Row {
    curvature_value: f64,
    edges: usize,
    ma_edges: usize,
    base_prob: f64,
    ma_prob: f64,
    enrichment: Option<f64>,
}

#[derive(Serialize)]
struct LayerRow {
    curvature_value: f64,
    layer: usize,
    ma_edges: usize,
    mean_ratio: f64,
}

pub fn run(args: EnrichArgs, mut settings: Settings) -> anyhow::Result<()> {
    let ma_path: PathBuf = settings.req("ma", args.ma)?;
    let bfc_path: PathBuf = settings.req("bfc", args.bfc)?;
    let kind: String = settings.or("binning", args.binning, "exact".into())?;
    let binning = match kind.as_str() {
        "exact" => Binning::Exact,
        "width" => {
            let w: f64 = settings
                .opt("bin_width", args.bin_width)?
                .ok_or_else(|| UsageError("--binning width needs --bin-width".into()))?;
            Binning::Width(w)
        }
        other => bail!("invalid value {other:?} for --binning"),
    };
    let logs_path: Option<PathBuf> = settings.opt("logs", args.logs)?;
    let median_scope: MedianScope =
        settings.choice("median_scope", args.median_scope, "layer_head")?;
    let out: PathBuf = settings.req("out", args.out)?;
    let config = settings.finish()?;

    let mut run = Run::new("enrich");
    let reports = formats::ma_reports(&run.read(&ma_path)?, &ma_path)?;
    let records = formats::bfc_records(&run.read(&bfc_path)?, &bfc_path)?;
    let by_id: BTreeMap<&str, &formats::BfcRecord> =
        records.iter().map(|r| (r.graph_id.as_str(), r)).collect();

    let mut pairs = Vec::new();
    let mut uncovered = 0;
    for report in &reports {
        let record = by_id.get(report.graph_id.as_str()).with_context(|| {
            format!(
                "{} has no curvature record in {}",
                report.graph_id,
                bfc_path.display()
            )
        })?;
        for (flag, &b) in report
            .flags_for_edges(&record.edge_list())
            .into_iter()
            .zip(&record.bfc)
        {
            match flag {
                Some(flag) => pairs.push((b, flag)),
                None => uncovered += 1,
            }
        }
    }
    let table = enrichment(&pairs, binning)?;

    let mut layers = None;
    let mut entropy = None;
    if let Some(logs_path) = &logs_path {
        let logs = formats::logs(&run.read(logs_path)?, logs_path)?;
        let reports_by_id: BTreeMap<&str, _> =
            reports.iter().map(|r| (r.graph_id.as_str(), r)).collect();
        let mut profiles = Vec::new();
        let mut points = Vec::new();
        for log in &logs {
            let (Some(record), Some(report)) = (
                by_id.get(log.graph_id.as_str()),
                reports_by_id.get(log.graph_id.as_str()),
            ) else {
                bail!(
                    "log for {} has no matching MA report and curvature record",
                    log.graph_id
                );
            };
            let g = record.graph()?;
            let bfc: Vec<_> = record
                .edge_list()
                .into_iter()
                .zip(record.bfc.iter().copied())
                .collect();
            let ratios = activation_ratios(log, median_scope)?;
            profiles.extend(edge_layer_profiles(&g, &ratios, report, &bfc)?);
            let node_curvature = node_min_curvature(&g, &bfc);
            points.extend(entropy_vs_curvature(
                &attention_entropy(log)?,
                &node_curvature,
            ));
        }
        layers = Some(layer_evolution(&profiles, binning)?);
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        entropy = Some(EntropySummary {
            points: points.len(),
            fit: correlate(&xs, &ys).ok(),
        });
    }

    let rows: Vec<Row> = table
        .entries
        .iter()
        .map(|e| Row {
            curvature_value: e.curvature_value,
            edges: e.edges,
            ma_edges: e.ma_edges,
            base_prob: e.base_prob,
            ma_prob: e.ma_prob,
            enrichment: e.enrichment,
        })
        .collect();
    let layer_rows: Option<Vec<LayerRow>> = layers.as_ref().map(|evolution| {
        evolution
            .rows
            .iter()
            .flat_map(|r| {
                r.mean_ratio.iter().map(|(&layer, &mean_ratio)| LayerRow {
                    curvature_value: r.curvature_value,
                    layer,
                    ma_edges: r.ma_edges,
                    mean_ratio,
                })
            })
            .collect()
    });
    let output = EnrichOutput {
        table,
        uncovered_edges: uncovered,
        layer_evolution: layers,
        entropy_vs_curvature: entropy,
    };
    // The JSON table comes first so it names the manifest entry.
    run.add_json(out.clone(), &output)?;
    run.add_csv(sibling(&out, "csv"), &rows)?;
    if let Some(layer_rows) = layer_rows {
        run.add_csv(companion(&out, "layers", "csv"), &layer_rows)?;
    }
    run.commit(config)
}
