
use clap::Args;
use serde_json::json;

use dmmh_core::model::gradcheck::{check_layer_suite, check_model_suite, ModelCheckOptions};
use dmmh_core::model::{CnnConfig, LossWeights, ModalityConfig, ModelConfig, SsmConfig};
use dmmh_core::nn::gradcheck::{LAYER_TOLERANCE, MODEL_TOLERANCE};
use dmmh_core::nn::GradCheckReport;

use crate::commands::emit;
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 10)]
    pub instances: usize,

    /// Test hook: corrupt one analytic gradient so the suite must fail.
    #[arg(long, default_value_t = false)]
    pub corrupt: bool,
}

/// Built-in tiny model: two small modalities, every architectural feature
/// on (including the classifier head) so all adjoints get exercised.
fn tiny_config(seed: u64) -> ModelConfig {
    ModelConfig {
        modalities: vec![
            ModalityConfig {
                name: "m0".to_string(),
                dim: 5,
            },
            ModalityConfig {
                name: "m1".to_string(),
                dim: 4,
            },
        ],
        d_model: 6,
        seq_len: 4,
        code_bits: 16,
        cnn: CnnConfig::default(),
        ssm: SsmConfig {
            d_state: 2,
            blocks: 1,
            scan: "parallel".to_string(),
        },
        loss: LossWeights {
            sim: 1.0,
            quant: 0.25,
            cls: 0.25,
        },
        lr: 1e-3,
        epochs: 1,
        batch_size: 4,
        seed,
        categories: Some(3),
    }
}

fn emit_report(suite: &str, report: &GradCheckReport) {
    for entry in &report.entries {
        emit(json!({
            "event": "gradcheck",
            "suite": suite,
            "layer": entry.name,
            "max_rel_err": entry.max_rel_err,
            "tolerance": report.tolerance,
            "pass": entry.pass,
        }));
    }
}

/// With a run config the configured model is checked (keep it small: the
/// check runs two forwards per parameter); without one, a built-in tiny
/// model.
pub fn run(
    args: GradcheckArgs,
    seed: Option<u64>,
    config: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let model_config = match config {
        Some(path) => {
            let mut config = RunConfig::read(path)?.model;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            config
        }
        None => tiny_config(seed.unwrap_or(42)),
    };

    let layer_report = check_layer_suite(model_config.seed, args.instances, LAYER_TOLERANCE);
    emit_report("layers", &layer_report);

    let opts = ModelCheckOptions {
        instances: args.instances,
        tolerance: MODEL_TOLERANCE,
        corrupt: args.corrupt,
    };
    let model_report = check_model_suite(&model_config, &opts)?;
    emit_report("model", &model_report);

    let passed = layer_report.passed() && model_report.passed();
    emit(json!({
        "event": "summary",
        "passed": passed,
        "layer_worst": layer_report.worst(),
        "model_worst": model_report.worst(),
    }));
    if passed {
        Ok(())
    } else {
        Err(CliError::runtime("gradient check failed"))
    }
}
