// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use curveprobe_core::spectral::{spectral_gap, Laplacian, SpectralOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::formats;
use crate::output::{sibling, Run};
use crate::settings::Settings;
use crate::SpectralArgs;

#[derive(Debug, Serialize)]
struct GapRecord {
    graph_id: String,
    num_nodes: usize,
    num_edges: usize,
    /// `null` for a graph without edges.
    spectral_gap: Option<f64>,
}

pub fn run(args: SpectralArgs, mut settings: Settings) -> anyhow::Result<()> {
    let graphs_path: PathBuf = settings.req("graphs", args.graphs)?;
    let laplacian: Laplacian = settings.choice("laplacian", args.laplacian, "normalized")?;
    let whole_graph = settings.switch("whole_graph", args.whole_graph)?;
    let out: PathBuf = settings.req("out", args.out)?;
    let config = settings.finish()?;
    let opts = SpectralOptions {
        laplacian,
        largest_component: !whole_graph,
    };

    let mut run = Run::new("spectral");
    let graphs = formats::graphs(&run.read(&graphs_path)?, &graphs_path)?;
    let records = graphs
        .graphs()
        .par_iter()
        .map(|g| {
            let gap = if g.num_edges() == 0 {
                None
            } else {
                Some(spectral_gap(g.edges(), g.num_nodes(), opts)?)
            };
            Ok(GapRecord {
                graph_id: g.id().to_owned(),
                num_nodes: g.num_nodes(),
                num_edges: g.num_edges(),
                spectral_gap: gap,
            })
        })
        .collect::<curveprobe_core::Result<Vec<_>>>()?;

    run.add_jsonl(out.clone(), &records)?;
    run.add_csv(sibling(&out, "csv"), &records)?;
    run.commit(config)
}
