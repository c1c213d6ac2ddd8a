// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use curveprobe_core::activation::MedianScope;
use curveprobe_core::collapse::{
    aggregate_collapse, build_activation_graph, curvature_shift, ActivationGraphOptions,
    Aggregation, CollapseReport,
};
use curveprobe_core::spectral::{Laplacian, SpectralOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::formats;
use crate::output::{companion, sibling, Run};
use crate::settings::Settings;
use crate::CollapseArgs;

#[derive(Serialize)]
struct Record {
    #[serde(flatten)]
    report: CollapseReport,
    theta: f64,
    effective_edges: usize,
    mean_shift: f64,
    negative_fraction_shift: f64,
    spectral_gap_shift: f64,
}

#[derive(Serialize)]
struct Row<'a> {
    graph_id: &'a str,
    static_edges: usize,
    effective_edges: usize,
    static_weighted_mean: f64,
    activation_weighted_mean: f64,
    static_negative_fraction: f64,
    activation_negative_fraction: f64,
    static_spectral_gap: f64,
    activation_spectral_gap: f64,
}

pub fn run(args: CollapseArgs, mut settings: Settings) -> anyhow::Result<()> {
    let graphs_path: PathBuf = settings.req("graphs", args.graphs)?;
    let logs_path: PathBuf = settings.req("logs", args.logs)?;
    let theta = settings.or("theta", args.theta, 1.0)?;
    let aggregation: Aggregation = settings.choice("agg", args.agg, "mean")?;
    let median_scope: MedianScope =
        settings.choice("median_scope", args.median_scope, "layer_head")?;
    let structural_only = settings.switch("structural_only", args.structural_only)?;
    let laplacian: Laplacian = settings.choice("laplacian", args.laplacian, "normalized")?;
    let whole_graph = settings.switch("whole_graph", args.whole_graph)?;
    let out: PathBuf = settings.req("out", args.out)?;
    let config = settings.finish()?;

    let opts = ActivationGraphOptions {
        aggregation,
        theta,
        median_scope,
        structural_only,
    };
    let spectral = SpectralOptions {
        laplacian,
        largest_component: !whole_graph,
    };

    let mut run = Run::new("collapse");
    let graphs = formats::graphs(&run.read(&graphs_path)?, &graphs_path)?;
    let logs = formats::logs(&run.read(&logs_path)?, &logs_path)?;
    let records = logs
        .par_iter()
        .map(|log| {
            let g = graphs.get(&log.graph_id)?;
            let ag = build_activation_graph(g, log, &opts)?;
            let report = curvature_shift(g, &ag, spectral)?;
            Ok(Record {
                theta,
                effective_edges: ag.effective_edges.len(),
                mean_shift: report.mean_shift(),
                negative_fraction_shift: report.negative_fraction_shift(),
                spectral_gap_shift: report.spectral_gap_shift(),
                report,
            })
        })
        .collect::<curveprobe_core::Result<Vec<_>>>()?;
    let reports: Vec<CollapseReport> = records.iter().map(|r| r.report.clone()).collect();
    let aggregate = aggregate_collapse(&reports)?;

    let rows: Vec<Row> = records
        .iter()
        .map(|r| Row {
            graph_id: &r.report.graph_id,
            static_edges: r.report.static_summary.per_edge.len(),
            effective_edges: r.effective_edges,
            static_weighted_mean: r.report.static_summary.weighted_mean,
            activation_weighted_mean: r.report.activation_summary.weighted_mean,
            static_negative_fraction: r.report.static_negative_fraction,
            activation_negative_fraction: r.report.activation_negative_fraction,
            static_spectral_gap: r.report.static_spectral_gap,
            activation_spectral_gap: r.report.activation_spectral_gap,
        })
        .collect();

    run.add_jsonl(out.clone(), &records)?;
    run.add_csv(sibling(&out, "csv"), &rows)?;
    run.add_json(companion(&out, "aggregate", "json"), &aggregate)?;
    run.commit(config)
}
