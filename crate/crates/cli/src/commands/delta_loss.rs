// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use curveprobe_core::pruning::delta_loss;

use crate::formats;
use crate::output::{sibling, Run};
use crate::settings::Settings;
use crate::DeltaLossArgs;

pub fn run(args: DeltaLossArgs, mut settings: Settings) -> anyhow::Result<()> {
    let baseline_path: PathBuf = settings.req("baseline", args.baseline)?;
    let variant_paths: Vec<PathBuf> = settings.req("variants", args.variants)?;
    let out: PathBuf = settings.req("out", args.out)?;
    let config = settings.finish()?;

    let mut run = Run::new("delta-loss");
    let baseline = formats::eval_report(&run.read(&baseline_path)?, &baseline_path)?;
    let variants = variant_paths
        .iter()
        .map(|p| formats::eval_report(&run.read(p)?, p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let table = delta_loss(&baseline, &variants)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }

    run.add_json(out.clone(), &table)?;
    run.add_csv(sibling(&out, "csv"), &table.rows)?;
    run.commit(config)
}
