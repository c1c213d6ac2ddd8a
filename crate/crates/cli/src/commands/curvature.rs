// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::formats::{self, BfcRecord};
use crate::output::{sibling, Run};
use crate::settings::Settings;
use crate::CurvatureArgs;

#[derive(Serialize)]
struct Row<'a> {
    graph_id: &'a str,
    i: usize,
    j: usize,
    bfc: f64,
}

pub fn run(args: CurvatureArgs, mut settings: Settings) -> anyhow::Result<()> {
    let graphs_path: PathBuf = settings.req("graphs", args.graphs)?;
    let out: PathBuf = settings.req("out", args.out)?;
    let config = settings.finish()?;

    let mut run = Run::new("curvature");
    let graphs = formats::graphs(&run.read(&graphs_path)?, &graphs_path)?;
    let records = graphs
        .graphs()
        .par_iter()
        .map(BfcRecord::from_graph)
        .collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<Row> = records
        .iter()
        .flat_map(|r| {
            r.edges.iter().zip(&r.bfc).map(|(&[i, j], &bfc)| Row {
                graph_id: &r.graph_id,
                i,
                j,
                bfc,
            })
        })
        .collect();
    run.add_jsonl(out.clone(), &records)?;
    run.add_csv(sibling(&out, "csv"), &rows)?;
    run.commit(config)
}
