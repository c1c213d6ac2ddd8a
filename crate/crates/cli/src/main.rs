// SPDX-License-Identifier: Apache-2.0

mod commands;
mod formats;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::{Settings, UsageError};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CAPABILITY: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Curvature and massive-activation diagnostics for graph attention models.
#[derive(Debug, Parser)]
#[command(name = "curveprobe", version)]
struct Cli {
    /// Worker threads for per-graph work (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON file with default values for any flag; flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Balanced Forman curvature of every edge.
    Curvature(CurvatureArgs),
    /// Flag massive activations in attention logs.
    Ma(MaArgs),
    /// Massive-activation enrichment per curvature value.
    Enrich(EnrichArgs),
    /// Static vs activation-graph curvature and spectral gap.
    Collapse(CollapseArgs),
    /// Remove one pruning set from a graph dataset.
    Prune(PruneArgs),
    /// Loss deltas of pruned variants against a baseline.
    DeltaLoss(DeltaLossArgs),
    /// Generate a barbell benchmark dataset.
    GenBarbell(GenBarbellArgs),
    /// Spectral gap of every graph.
    Spectral(SpectralArgs),
    /// Join the tables of an output directory by graph id.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Curvature(_) => "curvature",
            Command::Ma(_) => "ma",
            Command::Enrich(_) => "enrich",
            Command::Collapse(_) => "collapse",
            Command::Prune(_) => "prune",
            Command::DeltaLoss(_) => "delta-loss",
            Command::GenBarbell(_) => "gen-barbell",
            Command::Spectral(_) => "spectral",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaArgs {
    #[arg(long)]
    pub logs: Option<PathBuf>,
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    /// Percentile of per-pair maxima used as the cutoff.
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long, value_parser = ["layer", "layer_head"])]
    pub median_scope: Option<String>,
    /// Pool maxima over the whole dataset or threshold each graph on its own.
    #[arg(long, value_parser = ["dataset", "per_graph"])]
    pub cutoff_scope: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnrichArgs {
    #[arg(long)]
    pub ma: Option<PathBuf>,
    #[arg(long)]
    pub bfc: Option<PathBuf>,
    #[arg(long, value_parser = ["exact", "width"])]
    pub binning: Option<String>,
    /// Bin width when `--binning width`.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Attention logs; adds the per-layer ratio table of flagged edges.
    #[arg(long)]
    pub logs: Option<PathBuf>,
    #[arg(long, value_parser = ["layer", "layer_head"])]
    pub median_scope: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    #[arg(long)]
    pub logs: Option<PathBuf>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_parser = ["mean", "max"])]
    pub agg: Option<String>,
    #[arg(long, value_parser = ["layer", "layer_head"])]
    pub median_scope: Option<String>,
    /// Only reweight structural edges instead of admitting every attended pair.
    #[arg(long)]
    pub structural_only: bool,
    #[arg(long, value_parser = ["normalized", "unnormalized"])]
    pub laplacian: Option<String>,
    /// Compute spectral gaps over the whole node support instead of the largest component.
    #[arg(long)]
    pub whole_graph: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    #[arg(long)]
    pub ma: Option<PathBuf>,
    #[arg(long)]
    pub bfc: Option<PathBuf>,
    #[arg(long, value_parser = ["A", "B", "C"])]
    pub set: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeltaLossArgs {
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub variants: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenBarbellArgs {
    #[arg(long, value_parser = ["standard", "modified", "extended"])]
    pub variant: Option<String>,
    #[arg(long, value_parser = ["topological", "permuted"])]
    pub mode: Option<String>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub clique_size: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// Where dummy bridges end in the target clique.
    #[arg(long, value_parser = ["target_node", "clique_node"])]
    pub dummy_attachment: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    #[arg(long, value_parser = ["normalized", "unnormalized"])]
    pub laplacian: Option<String>,
    #[arg(long)]
    pub whole_graph: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Defaults to `report.json` inside `--dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut settings = Settings::load(cli.config.as_deref(), cli.command.name())?;
    let jobs = settings.global_opt("jobs", cli.jobs)?;
    let seed = settings.global_or("seed", cli.seed, 0)?;
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    match cli.command {
        Command::Curvature(a) => commands::curvature::run(a, settings),
        Command::Ma(a) => commands::ma::run(a, settings),
        Command::Enrich(a) => commands::enrich::run(a, settings),
        Command::Collapse(a) => commands::collapse::run(a, settings),
        Command::Prune(a) => commands::prune::run(a, settings),
        Command::DeltaLoss(a) => commands::delta_loss::run(a, settings),
        Command::GenBarbell(a) => commands::gen_barbell::run(a, seed, settings),
        Command::Spectral(a) => commands::spectral::run(a, settings),
        Command::Report(a) => commands::report::run(a, settings),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        return EXIT_USAGE;
    }
    let capability = err
        .chain()
        .filter_map(|e| e.downcast_ref::<curveprobe_core::Error>())
        .any(|e| e.is_capability());
    if capability {
        EXIT_CAPABILITY
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
