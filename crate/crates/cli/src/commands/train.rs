use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use dmmh_core::model::{train, write_checkpoint, DmmhModel, TrainingSet};

use crate::commands::{emit, load_manifest, load_split_features};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Scan implementation override (see `ssm.scan` in the config).
    #[arg(long)]
    pub scan: Option<String>,

    /// Not supported; training always starts from the seeded init.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

pub fn run(args: TrainArgs, seed: Option<u64>, config: Option<&Path>) -> Result<(), CliError> {
    if args.resume.is_some() {
        return Err(CliError::usage(
            "checkpoint resume is not supported; run a fresh training from config",
        ));
    }
    let config_path =
        config.ok_or_else(|| CliError::usage("train requires --config <RUN.json>"))?;
    let mut config = RunConfig::read(config_path)?;
    if let Some(seed) = seed {
        config.model.seed = seed;
    }
    if let Some(scan) = &args.scan {
        config.model.ssm.scan = scan.clone();
    }

    let manifest = load_manifest(&config.manifest)?;
    // the classifier head needs the category count from the data
    if config.model.loss.cls > 0.0 && config.model.categories.is_none() {
        config.model.categories = Some(manifest.categories);
    }
    config.model.validate()?;

    // effective config echo: feeding this back in reproduces the run
    emit(json!({"event": "config", "effective": serde_json::to_value(&config).expect("config")}));

    let mut model = DmmhModel::new(config.model.clone())?;
    let labels = manifest.load_labels()?;
    let split = manifest.training.clone();
    let features = load_split_features(&model, &manifest, &split)?;
    let data = TrainingSet {
        features,
        labels: labels.select(&split),
    };

    let log = train(&mut model, &data)?;
    for (epoch, loss) in log.epoch_loss.iter().enumerate() {
        emit(json!({"event": "epoch", "epoch": epoch, "loss": loss}));
    }
    write_checkpoint(&config.checkpoint, &model)?;
    emit(json!({
        "event": "done",
        "checkpoint": config.checkpoint,
        "epochs": log.epoch_loss.len(),
        "final_loss": log.epoch_loss.last(),
    }));
    Ok(())
}
