//! `rste`: simulate rooted spanning-tree embeddings on friend-to-friend
//! overlays and measure what colluding participants can infer about the
//! topology from announced coordinates and routed messages.

mod commands;
mod coords;
mod source;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rste_core::embedding::{EmbeddingMode, DEFAULT_ELEMENT_BITS};
use rste_core::graph::OverlayGraph;
use rste_core::routing::NextHopRule;
use rste_core::trajectory::DEFAULT_TRAJECTORY_LIMIT;

use source::{load_graph, LoadOptions};

#[derive(Parser)]
#[command(
    name = "rste",
    version,
    about = "Rooted spanning-tree embeddings and topology inference for friend-to-friend overlays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a rooted spanning tree and write every node's coordinate.
    Embed(EmbedArgs),
    /// Reconstruct what a malicious collective knows after coordinate
    /// announcements: known nodes, links, and pseudonym counts.
    Infer(InferArgs),
    /// Route random messages, extract the traces malicious nodes observe,
    /// and enumerate the plausible trajectories behind each trace.
    Trace(TraceArgs),
    /// Run a seeded multi-set, multi-run pseudonym-count experiment.
    Experiment(ExperimentArgs),
}

/// Graph source options shared by graph-consuming subcommands.
#[derive(Args)]
struct GraphArgs {
    /// Edge-list file, or `scale-free(n=..,m=..,seed=..)` /
    /// `small-world(n=..,k=..,p=..,seed=..)`.
    #[arg(long)]
    graph: String,
    /// Keep only reciprocated directed edges of a file source.
    #[arg(long)]
    mutual_only: bool,
    /// Reduce a file source to its largest connected component.
    #[arg(long)]
    largest_component: bool,
}

impl GraphArgs {
    fn load(&self) -> Result<OverlayGraph> {
        load_graph(
            &self.graph,
            LoadOptions {
                mutual_only: self.mutual_only,
                largest_component: self.largest_component,
            },
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// The i-th child extends the parent coordinate by element i.
    #[value(name = "enum")]
    Enumeration,
    /// Children extend the parent coordinate by fresh random elements.
    Random,
}

impl ModeArg {
    fn to_mode(self, bits: u32) -> EmbeddingMode {
        match self {
            ModeArg::Enumeration => EmbeddingMode::Enumeration,
            ModeArg::Random => EmbeddingMode::Random { bits },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ForwardingArg {
    /// Minimum-distance neighbor, uniform among ties.
    Best,
    /// Uniform over all strictly closer neighbors.
    AnyCloser,
}

impl ForwardingArg {
    fn rule(self) -> NextHopRule {
        match self {
            ForwardingArg::Best => NextHopRule::GreedyBest,
            ForwardingArg::AnyCloser => NextHopRule::AnyCloser,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ForwardingArg::Best => "best",
            ForwardingArg::AnyCloser => "any-closer",
        }
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Coordinate assignment mode.
    #[arg(long, value_enum, default_value = "enum")]
    mode: ModeArg,
    /// Element width in bits for random mode.
    #[arg(long, default_value_t = DEFAULT_ELEMENT_BITS)]
    bits: u32,
    /// Root node (original id); drawn uniformly from the seed when omitted.
    #[arg(long)]
    root: Option<u64>,
    /// Seed for root choice, parent tie-breaks, and random elements.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Coordinate file produced by `embed`.
    #[arg(long)]
    coords: PathBuf,
    /// Comma-separated malicious member ids (original ids).
    #[arg(long)]
    malicious: String,
    /// Write `<prefix>.nodes.csv` and `<prefix>.links.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Coordinate file produced by `embed`.
    #[arg(long)]
    coords: PathBuf,
    /// Comma-separated malicious member ids (original ids).
    #[arg(long)]
    malicious: String,
    /// Messages routed between random distinct node pairs.
    #[arg(long, default_value_t = 20)]
    messages: usize,
    /// Seed for endpoint choice and forwarding tie-breaks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Next-hop rule used by every forwarder.
    #[arg(long, value_enum, default_value = "best")]
    forwarding: ForwardingArg,
    /// Cap on enumerated trajectories per trace record.
    #[arg(long, default_value_t = DEFAULT_TRAJECTORY_LIMIT)]
    limit: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXPERIMENT_HELP: &str = "\
Config keys (one `key = value` per line, `#` comments):
  graph              edge-list file or synthetic spec        (required)
  mode               enum | random                           (required)
  bits               element bits for random mode            (default 128)
  behavior           honest | leaf-only                      (default honest)
  n_compromised      target compromised-neighbor count       (required)
  num_sets           malicious sets to draw                  (required)
  runs_per_set       embeddings per set                      (required)
  master_seed        root of the seed hierarchy              (default 0)
  output             CSV output path                         (default stdout)
  mutual_only        true | false, for file graphs           (default false)
  largest_component  true | false, for file graphs           (default false)";

#[derive(Args)]
#[command(after_help = EXPERIMENT_HELP)]
struct ExperimentArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Embed(args) => commands::run_embed(&args),
        Command::Infer(args) => commands::run_infer(&args),
        Command::Trace(args) => commands::run_trace(&args),
        Command::Experiment(args) => commands::run_experiment_cmd(&args),
    }
}
