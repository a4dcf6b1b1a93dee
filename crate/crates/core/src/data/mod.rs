//! Feature banks, label matrices, dataset manifests and the synthetic
//! dataset generator.

pub mod format;
pub mod manifest;
pub mod synthetic;

pub use format::{read_feature_bank, read_labels, write_feature_bank, write_labels};
pub use manifest::{
    validate_manifest, CheckedManifest, DatasetManifest, ManifestModality, SplitSpec,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Multi-hot label matrix, one byte per (sample, category), values 0/1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    n: usize,
    categories: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn new(n: usize, categories: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n * categories {
            return Err(Error::ShapeMismatch {
                op: "label_matrix",
                expected: vec![n, categories],
                actual: vec![data.len()],
            });
        }
        if let Some(index) = data.iter().position(|&b| b > 1) {
            return Err(Error::InvalidLabelByte {
                context: "label matrix".to_string(),
                index,
                value: data[index],
            });
        }
        Ok(LabelMatrix { n, categories, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.categories..(i + 1) * self.categories]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Gathers the given rows into a new matrix.
    pub fn select(&self, indices: &[u64]) -> LabelMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.categories);
        for &i in indices {
            data.extend_from_slice(self.row(i as usize));
        }
        LabelMatrix {
            n: indices.len(),
            categories: self.categories,
            data,
        }
    }
}

/// One modality's feature matrix, stored as it is on disk: 32-bit reals,
/// row-major. Model code promotes rows to `f64` on gather.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    n: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureBank {
    pub fn new(n: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDim {
                context: "feature bank".to_string(),
            });
        }
        if data.len() != n * dim {
            return Err(Error::ShapeMismatch {
                op: "feature_bank",
                expected: vec![n, dim],
                actual: vec![data.len()],
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "feature bank".to_string(),
                index,
            });
        }
        Ok(FeatureBank { n, dim, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Gathers rows into an `[indices.len(), dim]` f64 tensor.
    pub fn gather(&self, indices: &[u64]) -> Tensor {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend(self.row(i as usize).iter().map(|&v| v as f64));
        }
        Tensor::new(vec![indices.len(), self.dim], data).expect("shape by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_matrix_rejects_bad_bytes() {
        assert!(LabelMatrix::new(2, 2, vec![0, 1, 1, 2]).is_err());
        assert!(LabelMatrix::new(2, 2, vec![0, 1, 1, 0]).is_ok());
        assert!(LabelMatrix::new(2, 2, vec![0, 1, 1]).is_err());
    }

    #[test]
    fn feature_bank_rejects_non_finite() {
        assert!(FeatureBank::new(1, 2, vec![0.0, f32::NAN]).is_err());
        assert!(FeatureBank::new(1, 0, vec![]).is_err());
    }

    #[test]
    fn gather_promotes_and_orders() {
        let bank = FeatureBank::new(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let t = bank.gather(&[2, 0]);
        assert_eq!(t.shape(), &[2, 2]);
        assert_eq!(t.data(), &[4.0, 5.0, 0.0, 1.0]);
    }
}
