//! Seeded synthetic multi-modal dataset generator.
//!
//! Each class gets one Gaussian prototype per modality; samples are the
//! prototype plus isotropic noise. The same class index maps to the same
//! cluster in every modality, so multi-modal fusion genuinely carries
//! signal. Labels are single-hot. Splits are 60/30/10
//! training/retrieval/query over a seeded shuffle.

use std::path::{Path, PathBuf};

use crate::data::format::{write_feature_bank, write_labels};
use crate::data::manifest::{DatasetManifest, ManifestModality, SplitSpec};
use crate::data::{FeatureBank, LabelMatrix};
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dims: Vec<usize>,
    pub sigma: f64,
    pub seed: u64,
}

/// Writes feature banks, the label file and `manifest.json` into `out_dir`
/// and returns the manifest path. Deterministic: the same spec produces
/// byte-identical files.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<PathBuf> {
    if spec.per_class < 2 {
        return Err(Error::invalid(
            "generate_synthetic",
            format!("per_class must be >= 2, got {}", spec.per_class),
        ));
    }
    if spec.classes == 0 || spec.dims.is_empty() {
        return Err(Error::invalid(
            "generate_synthetic",
            "need at least one class and one modality",
        ));
    }
    if spec.sigma < 0.0 {
        return Err(Error::invalid("generate_synthetic", "sigma must be >= 0"));
    }
    std::fs::create_dir_all(out_dir)?;

    let n = spec.classes * spec.per_class;
    let mut rng = RngState::new(spec.seed);

    // prototypes[modality][class][dim]
    let prototypes: Vec<Vec<Vec<f64>>> = spec
        .dims
        .iter()
        .map(|&dim| {
            (0..spec.classes)
                .map(|_| (0..dim).map(|_| rng.normal()).collect())
                .collect()
        })
        .collect();

    let mut modalities = Vec::with_capacity(spec.dims.len());
    for (m, &dim) in spec.dims.iter().enumerate() {
        let mut data = Vec::with_capacity(n * dim);
        for proto in &prototypes[m] {
            for _ in 0..spec.per_class {
                for &p in proto.iter() {
                    data.push((p + spec.sigma * rng.normal()) as f32);
                }
            }
        }
        let bank = FeatureBank::new(n, dim, data)?;
        let file = format!("m{m}.dmfb");
        write_feature_bank(&out_dir.join(&file), &bank)?;
        modalities.push(ManifestModality {
            name: format!("m{m}"),
            dim,
            path: PathBuf::from(file),
        });
    }

    let mut label_bytes = vec![0u8; n * spec.classes];
    for class in 0..spec.classes {
        for s in 0..spec.per_class {
            let i = class * spec.per_class + s;
            label_bytes[i * spec.classes + class] = 1;
        }
    }
    let labels = LabelMatrix::new(n, spec.classes, label_bytes)?;
    write_labels(&out_dir.join("labels.dmlb"), &labels)?;

    let mut perm: Vec<u64> = (0..n as u64).collect();
    rng.shuffle(&mut perm);
    let n_train = n * 6 / 10;
    let n_retrieval = n * 3 / 10;
    let mut training = perm[..n_train].to_vec();
    let mut retrieval = perm[n_train..n_train + n_retrieval].to_vec();
    let mut query = perm[n_train + n_retrieval..].to_vec();
    training.sort_unstable();
    retrieval.sort_unstable();
    query.sort_unstable();

    let manifest = DatasetManifest {
        name: format!(
            "synthetic-{}x{}-s{}",
            spec.classes, spec.per_class, spec.seed
        ),
        modalities,
        labels: PathBuf::from("labels.dmlb"),
        categories: spec.classes,
        splits: SplitSpec::Indices {
            training,
            retrieval,
            query,
        },
    };
    let manifest_path = out_dir.join("manifest.json");
    manifest.write(&manifest_path)?;
    Ok(manifest_path)
}
