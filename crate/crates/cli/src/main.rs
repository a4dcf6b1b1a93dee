//! `dmmh`: one subcommand per pipeline stage, each producing a file the
//! next stage consumes. Machine-readable output is JSON lines on stdout;
//! diagnostics go to stderr. Exit codes: 0 success, 1 runtime or numeric
//! failure, 2 usage or config error.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use dmmh_core::Error as CoreError;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "dmmh", version, about = "Multi-modal hashing toolkit")]
struct Cli {
    /// Override the seed from configs/defaults.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for forward-only paths (encode, eval); 0 keeps the
    /// library default. 64-bit results do not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Run config (JSON). Required by `train`; supplies path and option
    /// defaults to `encode`, `eval` and `gradcheck`. Flags win over
    /// config values.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic multi-modal dataset.
    Synth(commands::synth::SynthArgs),
    /// Train a model from a JSON run config and write a checkpoint.
    Train(commands::train::TrainArgs),
    /// Encode a manifest split into a packed code bank.
    Encode(commands::encode::EncodeArgs),
    /// Rank a code bank against a query code or stored id.
    Query(commands::query::QueryArgs),
    /// Evaluate query codes against a retrieval bank (mAP report).
    Eval(commands::eval::EvalArgs),
    /// Run the gradient-check suites.
    Gradcheck(commands::gradcheck::GradcheckArgs),
}

/// Failures that are the operator's to fix (bad flags, bad config, bad
/// combinations) exit 2; data and numeric failures at runtime exit 1.
fn exit_code(err: &CoreError) -> u8 {
    match err {
        CoreError::InvalidArgument { .. }
        | CoreError::ShapeMismatch { .. }
        | CoreError::CodeLengthUnsupported { .. }
        | CoreError::BitsMismatch { .. }
        | CoreError::MissingModality { .. }
        | CoreError::UnknownStrategy { .. }
        | CoreError::UnknownSplit { .. }
        | CoreError::SplitOverlap { .. }
        | CoreError::SplitIndexOutOfRange { .. }
        | CoreError::DimMismatch { .. }
        | CoreError::CountMismatch { .. }
        | CoreError::CategoryMismatch { .. }
        | CoreError::ZeroDim { .. }
        | CoreError::EmptyQuerySet
        | CoreError::Json(_) => 2,
        CoreError::NonFinite { .. }
        | CoreError::NonFiniteGradient { .. }
        | CoreError::NonFiniteLoss { .. }
        | CoreError::BadMagic { .. }
        | CoreError::UnsupportedVersion { .. }
        | CoreError::Truncated { .. }
        | CoreError::InvalidLabelByte { .. }
        | CoreError::PaddingBitsSet { .. }
        | CoreError::Io(_) => 1,
    }
}

pub(crate) struct CliError {
    code: u8,
    message: String,
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl CliError {
    pub(crate) fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub(crate) fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: failed to size thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args, cli.seed),
        Command::Train(args) => commands::train::run(args, cli.seed, config),
        Command::Encode(args) => commands::encode::run(args, config),
        Command::Query(args) => commands::query::run(args),
        Command::Eval(args) => commands::eval::run(args, config),
        Command::Gradcheck(args) => commands::gradcheck::run(args, cli.seed, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
