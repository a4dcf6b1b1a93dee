use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use dmmh_core::hamming::write_code_bank;
use dmmh_core::model::read_checkpoint;

use crate::commands::{emit, load_manifest, load_split_features};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Model checkpoint (overrides config).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Dataset manifest (overrides config).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Split to encode: training, retrieval or query.
    #[arg(long)]
    pub split: String,

    /// Output code bank path (overrides config `codes`).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Scan implementation override.
    #[arg(long)]
    pub scan: Option<String>,
}

pub fn run(args: EncodeArgs, config: Option<&Path>) -> Result<(), CliError> {
    let config = config.map(RunConfig::read).transpose()?;
    let pick = |flag: Option<PathBuf>, from_config: Option<PathBuf>, what: &str| {
        flag.or(from_config)
            .ok_or_else(|| CliError::usage(format!("--{what} required (no config default)")))
    };
    let checkpoint = pick(
        args.checkpoint,
        config.as_ref().map(|c| c.checkpoint.clone()),
        "checkpoint",
    )?;
    let manifest_path = pick(
        args.manifest,
        config.as_ref().map(|c| c.manifest.clone()),
        "manifest",
    )?;
    let out = pick(
        args.out,
        config.as_ref().and_then(|c| c.codes.clone()),
        "out",
    )?;

    let mut model = read_checkpoint(&checkpoint)?;
    if let Some(scan) = &args.scan {
        model.set_scan(scan)?;
    }
    let manifest = load_manifest(&manifest_path)?;
    let split = manifest.split(&args.split)?.to_vec();
    let features = load_split_features(&model, &manifest, &split)?;
    let refs: Vec<&dmmh_core::Tensor> = features.iter().collect();
    let labels = manifest.load_labels()?.select(&split);

    let bank = model.encode(&refs, &labels, &split)?;
    write_code_bank(&out, &bank)?;
    emit(json!({
        "event": "encode",
        "split": args.split,
        "samples": bank.n(),
        "bits": bank.k(),
        "codes": out,
    }));
    Ok(())
}
