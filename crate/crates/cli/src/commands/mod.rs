pub mod encode;
pub mod eval;
pub mod gradcheck;
pub mod query;
pub mod synth;
pub mod train;

use std::path::Path;

use dmmh_core::data::{read_feature_bank, validate_manifest, CheckedManifest, DatasetManifest};
use dmmh_core::model::DmmhModel;
use dmmh_core::tensor::Tensor;

use crate::CliError;

/// Prints one machine-readable JSON line on stdout.
pub(crate) fn emit(value: serde_json::Value) {
    println!("{value}");
}

pub(crate) fn load_manifest(path: &Path) -> Result<CheckedManifest, CliError> {
    let manifest = DatasetManifest::read(path)?;
    Ok(validate_manifest(&manifest, path)?)
}

/// Loads the feature rows of one split in model-modality order, checking
/// that every modality the model declares exists in the manifest with the
/// same dimensionality.
pub(crate) fn load_split_features(
    model: &DmmhModel,
    manifest: &CheckedManifest,
    split: &[u64],
) -> Result<Vec<Tensor>, CliError> {
    let mut features = Vec::with_capacity(model.config().modalities.len());
    for m in &model.config().modalities {
        let entry = manifest
            .modalities
            .iter()
            .find(|mm| mm.name == m.name)
            .ok_or_else(|| {
                CliError::usage(format!("manifest has no modality `{}`", m.name))
            })?;
        if entry.dim != m.dim {
            return Err(CliError::usage(format!(
                "modality `{}`: model expects dim {}, manifest declares {}",
                m.name, m.dim, entry.dim
            )));
        }
        let bank = read_feature_bank(&entry.path)?;
        features.push(bank.gather(split));
    }
    Ok(features)
}
