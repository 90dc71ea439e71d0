//! `dsi`: generate graphs, simulate diffusions, and compute confidence sets
//! for the source of an observed infection snapshot.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dsi", version, about = "Diffusion source identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random or regular graph as an edge list.
    Generate(GenerateArgs),
    /// Run one SI diffusion and write the snapshot and the hidden source.
    Simulate(SimulateArgs),
    /// Confidence sets for the source of a snapshot.
    Infer(InferArgs),
    /// Print the isomorphism groups and single-degree satellites of a snapshot.
    Isogroups(IsogroupsArgs),
    /// Repeated simulate-and-infer runs with coverage and accuracy summaries.
    Experiment(Box<ExperimentArgs>),
}

/// Graph family parameters, named like the experiment config keys.
#[derive(Args)]
struct FamilyArgs {
    /// tree, pa or sw.
    #[arg(long, default_value = "pa")]
    family: String,
    #[arg(long)]
    branching: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    attach: Option<String>,
    #[arg(long)]
    ring_degree: Option<String>,
    #[arg(long)]
    rewire_prob: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Number of infections after the source.
    #[arg(long)]
    steps: usize,
    /// Source node; defaults to the median-eigencentrality node.
    #[arg(long)]
    source: Option<u32>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Snapshot file, one node per line.
    #[arg(long)]
    snapshot: PathBuf,
    /// File receiving the true source.
    #[arg(long)]
    truth: PathBuf,
    /// Optional CSV dump of the infection order.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    /// `label<TAB>id` lines; the snapshot may then use labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Significance level; repeat for several sets.
    #[arg(long = "alpha", default_values_t = [0.1])]
    alphas: Vec<f64>,
    /// Monte Carlo size; derived from the requested levels when absent.
    #[arg(long)]
    m: Option<usize>,
    /// adit, euclidean or rc.
    #[arg(long, default_value = "adit")]
    loss: String,
    /// none, iso, is or both.
    #[arg(long, default_value = "none")]
    pooling: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "DSI_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Output prefix: writes `<out>.json` and `<out>.csv`, or one pair per
    /// level as `<out>-alpha<α>.*` when several levels are given.
    #[arg(long, default_value = "confidence_set")]
    out: PathBuf,
}

#[derive(Args)]
struct IsogroupsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// `key=value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    branching: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    attach: Option<String>,
    #[arg(long)]
    ring_degree: Option<String>,
    #[arg(long)]
    rewire_prob: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated significance levels.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    pooling: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Falls back to DSI_WORKERS when neither flag nor file sets it.
    #[arg(long)]
    workers: Option<String>,
    /// `median` or a node id.
    #[arg(long)]
    source: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Infer(a) => commands::infer(a),
        Command::Isogroups(a) => commands::isogroups(a),
        Command::Experiment(a) => commands::experiment(*a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
