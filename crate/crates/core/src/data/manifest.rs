//! Dataset manifest: a JSON description of modalities, label file and
//! train/retrieval/query splits. Paths are relative to the manifest's
//! directory. Splits are either explicit index lists or sizes drawn from a
//! seeded shuffle of `0..n`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::format::read_feature_header;
use crate::data::{read_labels, LabelMatrix};
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifestModality {
    pub name: String,
    pub dim: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SplitSpec {
    /// Explicit, pairwise-disjoint index lists.
    Indices {
        training: Vec<u64>,
        retrieval: Vec<u64>,
        query: Vec<u64>,
    },
    /// Sizes carved from a seeded shuffle of `0..n` in the order
    /// training, retrieval, query.
    Sizes {
        training_size: u64,
        retrieval_size: u64,
        query_size: u64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub modalities: Vec<ManifestModality>,
    pub labels: PathBuf,
    pub categories: usize,
    pub splits: SplitSpec,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<DatasetManifest> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// A manifest whose files, dims and splits have all been cross-checked.
/// Paths are resolved against the manifest directory; splits are resolved
/// to explicit index lists.
#[derive(Debug, Clone)]
pub struct CheckedManifest {
    pub name: String,
    pub n: u64,
    pub categories: usize,
    pub modalities: Vec<ManifestModality>,
    pub labels_path: PathBuf,
    pub training: Vec<u64>,
    pub retrieval: Vec<u64>,
    pub query: Vec<u64>,
}

impl CheckedManifest {
    pub fn split(&self, name: &str) -> Result<&[u64]> {
        match name {
            "training" => Ok(&self.training),
            "retrieval" => Ok(&self.retrieval),
            "query" => Ok(&self.query),
            other => Err(Error::UnknownSplit {
                name: other.to_string(),
            }),
        }
    }

    pub fn load_labels(&self) -> Result<LabelMatrix> {
        read_labels(&self.labels_path)
    }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn check_disjoint(a_name: &str, a: &[u64], b_name: &str, b: &[u64]) -> Result<()> {
    let set: HashSet<u64> = a.iter().copied().collect();
    for &i in b {
        if set.contains(&i) {
            return Err(Error::SplitOverlap {
                a: a_name.to_string(),
                b: b_name.to_string(),
                index: i,
            });
        }
    }
    Ok(())
}

/// Validates a manifest located at `manifest_path`: file headers agree with
/// declared dims and the shared sample count, the label file matches the
/// declared category count, and the splits are in-range and pairwise
/// disjoint.
pub fn validate_manifest(
    manifest: &DatasetManifest,
    manifest_path: &Path,
) -> Result<CheckedManifest> {
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    if manifest.modalities.is_empty() {
        return Err(Error::invalid("validate_manifest", "no modalities declared"));
    }

    let labels_path = resolve(dir, &manifest.labels);
    let labels = read_labels(&labels_path)?;
    let n = labels.n() as u64;
    if labels.categories() != manifest.categories {
        return Err(Error::CategoryMismatch {
            declared: manifest.categories,
            found: labels.categories(),
        });
    }

    let mut modalities = Vec::with_capacity(manifest.modalities.len());
    for m in &manifest.modalities {
        let path = resolve(dir, &m.path);
        let (file_n, file_dim) = read_feature_header(&path)?;
        if file_dim as usize != m.dim {
            return Err(Error::DimMismatch {
                modality: m.name.clone(),
                declared: m.dim,
                found: file_dim as usize,
            });
        }
        if file_n != n {
            return Err(Error::CountMismatch {
                modality: m.name.clone(),
                expected: n,
                found: file_n,
            });
        }
        modalities.push(ManifestModality {
            name: m.name.clone(),
            dim: m.dim,
            path,
        });
    }

    let (training, retrieval, query) = match &manifest.splits {
        SplitSpec::Indices {
            training,
            retrieval,
            query,
        } => (training.clone(), retrieval.clone(), query.clone()),
        SplitSpec::Sizes {
            training_size,
            retrieval_size,
            query_size,
            seed,
        } => {
            let total = training_size + retrieval_size + query_size;
            if total > n {
                return Err(Error::invalid(
                    "validate_manifest",
                    format!("split sizes sum to {total} but dataset has {n} samples"),
                ));
            }
            let mut perm: Vec<u64> = (0..n).collect();
            RngState::new(*seed).shuffle(&mut perm);
            let train = perm[..*training_size as usize].to_vec();
            let retr = perm[*training_size as usize..(*training_size + *retrieval_size) as usize]
                .to_vec();
            let query = perm[(*training_size + *retrieval_size) as usize..total as usize].to_vec();
            (train, retr, query)
        }
    };

    for (name, split) in [
        ("training", &training),
        ("retrieval", &retrieval),
        ("query", &query),
    ] {
        for &i in split.iter() {
            if i >= n {
                return Err(Error::SplitIndexOutOfRange {
                    split: name.to_string(),
                    index: i,
                    n,
                });
            }
        }
    }
    check_disjoint("training", &training, "retrieval", &retrieval)?;
    check_disjoint("training", &training, "query", &query)?;
    check_disjoint("retrieval", &retrieval, "query", &query)?;

    Ok(CheckedManifest {
        name: manifest.name.clone(),
        n,
        categories: manifest.categories,
        modalities,
        labels_path,
        training,
        retrieval,
        query,
    })
}
