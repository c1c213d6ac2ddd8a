// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use curveprobe_core::synth::{
    gen_barbell_dataset, BarbellSpec, BarbellVariant, DummyAttachment, FeatureMode,
};

use crate::output::Run;
use crate::settings::Settings;
use crate::GenBarbellArgs;

pub fn run(args: GenBarbellArgs, seed: u64, mut settings: Settings) -> anyhow::Result<()> {
    let variant: BarbellVariant = settings.choice("variant", args.variant, "standard")?;
    let mode: FeatureMode = settings.choice("mode", args.mode, "topological")?;
    let n_train = settings.or("n_train", args.n_train, 256)?;
    let n_test = settings.or("n_test", args.n_test, 26)?;
    let defaults = BarbellSpec::for_variant(variant);
    let clique_size = settings.or("clique_size", args.clique_size, defaults.clique_size)?;
    let feature_dim = settings.or("feature_dim", args.feature_dim, defaults.feature_dim)?;
    let dummy_attachment: DummyAttachment =
        settings.choice("dummy_attachment", args.dummy_attachment, "target_node")?;
    let out_dir: PathBuf = settings.req("out_dir", args.out_dir)?;
    let config = settings.finish()?;

    let spec = BarbellSpec {
        clique_size,
        feature_dim,
        feature_mode: mode,
        seed,
        dummy_attachment,
        ..defaults
    };
    let (train, test) = gen_barbell_dataset(&spec, n_train, n_test)?;

    let mut run = Run::new("gen-barbell");
    run.add_jsonl(out_dir.join("train.jsonl"), &train)?;
    run.add_jsonl(out_dir.join("test.jsonl"), &test)?;
    run.commit(config)
}
