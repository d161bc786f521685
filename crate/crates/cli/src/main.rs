use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use machvuln_core::dataset::{DatasetError, Split, VulnClass, CC_ENV};
use machvuln_core::elf::ElfError;
use machvuln_core::model::ModelError;
use machvuln_core::par::Execution;
use machvuln_core::pipeline::PipelineError;

/// A problem with what the user supplied, as opposed to an internal failure.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

/// Detect memory-safety vulnerabilities in x86-64 ELF binaries
#[derive(Parser)]
#[command(author, version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Commands,

    /// JSON config file; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed (default 0)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Commands {
    /// Dump the functions, instructions, tokens and CFG edges of a binary
    Decode(DecodeArgs),
    /// Split, compile, balance and encode a labeled C corpus
    BuildDataset(BuildArgs),
    /// Train a classifier on a built dataset
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset
    Eval(EvalArgs),
    /// Per-function attention scores of a checkpoint on one binary
    InspectAttention(InspectArgs),
}

#[derive(Args)]
pub struct DecodeArgs {
    /// ELF binary to decode
    pub binary: PathBuf,
    /// Emit JSON instead of text
    #[arg(long)]
    pub json: bool,
    /// Keep compiler/runtime scaffolding functions
    #[arg(long)]
    pub all_functions: bool,
    /// Write to this file instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Default)]
pub struct ReprArgs {
    /// Instructions kept per function (sequential)
    #[arg(long)]
    pub n_seq: Option<usize>,
    /// Functions kept per program (sequential)
    #[arg(long)]
    pub m_seq: Option<usize>,
    /// Instructions per block and blocks per function (graph)
    #[arg(long)]
    pub n_blk: Option<usize>,
    /// Functions kept per program (graph)
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Args)]
pub struct BuildArgs {
    /// JSONL of labeled sources: {"path", "label", "class"?, "violations"?}
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub manifest: Option<PathBuf>,
    /// Generate a synthetic corpus of this class instead of reading a manifest
    #[arg(long, value_name = "CLASS")]
    pub synthetic: Option<VulnClass>,
    /// Programs to generate with --synthetic
    #[arg(long, default_value_t = 400)]
    pub count: usize,
    /// Output directory
    #[arg(short, long)]
    pub out: PathBuf,
    /// Compilations per source, each with a distinct optimization flag (1-6)
    #[arg(long)]
    pub times_compiled: Option<usize>,
    /// C compiler
    #[arg(long, env = CC_ENV)]
    pub compiler: Option<PathBuf>,
    /// Concurrent compiler processes
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub repr: ReprArgs,
    #[arg(long, value_enum, default_value_t = ExecArg::Parallel)]
    pub execution: ExecArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// One convolution branch (see --kernel)
    Sequential,
    /// Kernels 3, 5 and 7 side by side
    Hybrid,
    /// Per-block convolution, GCN and top-K pooling
    Graph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExecArg {
    Sequential,
    Parallel,
}

impl From<ExecArg> for Execution {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Sequential => Execution::Sequential,
            ExecArg::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory written by build-dataset
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Graph)]
    pub model: ModelArg,
    /// Kernel size of the sequential model (default 7)
    #[arg(long)]
    pub kernel: Option<usize>,
    /// GCN layers of the graph model (default 2)
    #[arg(long)]
    pub gcn_layers: Option<usize>,
    /// Replace every model width with this value
    #[arg(long)]
    pub width: Option<usize>,
    /// Restrict training to one vulnerability class
    #[arg(long)]
    pub class: Option<VulnClass>,
    /// Output directory for the checkpoint, history and run record
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long, value_enum)]
    pub execution: Option<ExecArg>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub class: Option<VulnClass>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Directory for metrics.json and the run record
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Print the metrics JSON instead of the table
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// ELF binary to score
    pub binary: PathBuf,
    #[arg(long)]
    pub json: bool,
    /// Write to this file instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// 2 for bad input (unreadable or malformed files, bad options), 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<ElfError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<DatasetError>() {
            return dataset_code(e);
        }
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return match e {
                PipelineError::Elf(_) | PipelineError::Vocab(_) => 2,
                PipelineError::Dataset(d) => dataset_code(d),
                PipelineError::Invalid(_) => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return match e {
                ModelError::Checkpoint(_) | ModelError::Io(_) | ModelError::Config(_) | ModelError::Representation(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn dataset_code(e: &DatasetError) -> u8 {
    match e {
        DatasetError::Io { .. } | DatasetError::Manifest { .. } | DatasetError::Unclassified(_) => 2,
        DatasetError::CompilerNotFound(_) | DatasetError::TimesCompiled { .. } => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = config::FileConfig::load(cli.config.as_deref()).and_then(|file| {
        let ctx = commands::Context {
            file,
            seed: cli.seed,
            config_path: cli.config.clone(),
        };
        match cli.command {
            Commands::Decode(a) => commands::decode(&ctx, a),
            Commands::BuildDataset(a) => commands::build_dataset(&ctx, a),
            Commands::Train(a) => commands::train(&ctx, a),
            Commands::Eval(a) => commands::eval(&ctx, a),
            Commands::InspectAttention(a) => commands::inspect_attention(&ctx, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
