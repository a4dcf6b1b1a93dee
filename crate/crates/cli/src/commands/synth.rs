use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use dmmh_core::data::{generate_synthetic, SyntheticSpec};

use crate::commands::emit;
use crate::CliError;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of classes (one prototype per class per modality).
    #[arg(long, default_value_t = 3)]
    pub classes: usize,

    /// Samples per class; at least 2.
    #[arg(long = "per-class", default_value_t = 100)]
    pub per_class: usize,

    /// Per-modality feature dims, comma separated (e.g. 64,32).
    #[arg(long, required = true, value_delimiter = ',')]
    pub dims: Vec<usize>,

    /// Noise standard deviation around class prototypes.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,

    /// Output directory for feature banks, labels and manifest.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn run(args: SynthArgs, seed: Option<u64>) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        classes: args.classes,
        per_class: args.per_class,
        dims: args.dims,
        sigma: args.sigma,
        seed: seed.unwrap_or(42),
    };
    let manifest = generate_synthetic(&spec, &args.out)?;
    emit(json!({
        "event": "synth",
        "manifest": manifest,
        "samples": spec.classes * spec.per_class,
        "classes": spec.classes,
        "dims": spec.dims,
        "sigma": spec.sigma,
        "seed": spec.seed,
    }));
    Ok(())
}
