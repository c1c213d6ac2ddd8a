// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use anyhow::Context;
use curveprobe_core::activation::{
    flag_massive, ma_hop_lengths, CutoffScope, GraphRatios, Hop, MedianScope, DEFAULT_PERCENTILE,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::formats;
use crate::output::{companion, sibling, Run};
use crate::settings::Settings;
use crate::MaArgs;

#[derive(Serialize)]
struct Row<'a> {
    graph_id: &'a str,
    model: &'a str,
    src: usize,
    dst: usize,
    max_ratio: f64,
    argmax_layer: usize,
    argmax_head: usize,
    flagged: bool,
    hop: String,
    bfc: Option<f64>,
}

pub fn run(args: MaArgs, mut settings: Settings) -> anyhow::Result<()> {
    let logs_path: PathBuf = settings.req("logs", args.logs)?;
    let graphs_path: PathBuf = settings.req("graphs", args.graphs)?;
    let percentile = settings.or("percentile", args.percentile, DEFAULT_PERCENTILE)?;
    let median_scope: MedianScope =
        settings.choice("median_scope", args.median_scope, "layer_head")?;
    let cutoff_scope: CutoffScope =
        settings.choice("cutoff_scope", args.cutoff_scope, "dataset")?;
    let out: PathBuf = settings.req("out", args.out)?;
    let config = settings.finish()?;

    let mut run = Run::new("ma");
    let logs = formats::logs(&run.read(&logs_path)?, &logs_path)?;
    let graphs = formats::graphs(&run.read(&graphs_path)?, &graphs_path)?;

    let ratios = logs
        .par_iter()
        .map(|log| {
            let g = graphs.get(&log.graph_id)?;
            log.check_against(g)?;
            GraphRatios::from_log(log, median_scope)
        })
        .collect::<curveprobe_core::Result<Vec<_>>>()
        .with_context(|| format!("in {}", logs_path.display()))?;
    let reports = flag_massive(&ratios, &graphs, percentile, cutoff_scope)?;
    let hops = ma_hop_lengths(&reports, &graphs)?;

    let rows: Vec<Row> = reports
        .iter()
        .flat_map(|r| {
            r.entries.iter().map(|e| Row {
                graph_id: &r.graph_id,
                model: &r.model,
                src: e.src,
                dst: e.dst,
                max_ratio: e.max_ratio,
                argmax_layer: e.argmax_layer,
                argmax_head: e.argmax_head,
                flagged: e.flagged,
                hop: match e.hop {
                    Hop::Hops(n) => n.to_string(),
                    Hop::Unreachable => "unreachable".into(),
                },
                bfc: e.bfc,
            })
        })
        .collect();

    run.add_jsonl(out.clone(), &reports)?;
    run.add_csv(sibling(&out, "csv"), &rows)?;
    run.add_json(companion(&out, "hops", "json"), &hops)?;
    run.commit(config)
}
