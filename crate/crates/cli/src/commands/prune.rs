// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::PathBuf;

use curveprobe_core::pruning::{categorize, emit_pruned, flags_from_reports, PruneTarget};
use curveprobe_core::EdgeRef;

use crate::formats;
use crate::output::{companion, Run};
use crate::settings::Settings;
use crate::PruneArgs;

pub fn run(args: PruneArgs, mut settings: Settings) -> anyhow::Result<()> {
    let graphs_path: PathBuf = settings.req("graphs", args.graphs)?;
    let ma_path: PathBuf = settings.req("ma", args.ma)?;
    let bfc_path: PathBuf = settings.req("bfc", args.bfc)?;
    let target: PruneTarget = settings.req::<String>("set", args.set)?.parse()?;
    let out: PathBuf = settings.req("out", args.out)?;
    let config = settings.finish()?;

    let mut run = Run::new("prune");
    let graphs = formats::graphs(&run.read(&graphs_path)?, &graphs_path)?;
    let reports = formats::ma_reports(&run.read(&ma_path)?, &ma_path)?;
    let records = formats::bfc_records(&run.read(&bfc_path)?, &bfc_path)?;

    let flags = flags_from_reports(&reports, &graphs)?;
    let mut bfc = BTreeMap::new();
    for r in &records {
        for (&[i, j], &value) in r.edges.iter().zip(&r.bfc) {
            bfc.insert(EdgeRef::new(r.graph_id.clone(), i, j), value);
        }
    }
    let sets = categorize(&flags, &bfc)?;
    let pruned = emit_pruned(graphs.graphs(), &sets, target)?;

    run.add_jsonl(out.clone(), &pruned)?;
    run.add_json(companion(&out, "sets", "json"), &sets)?;
    run.commit(config)
}
