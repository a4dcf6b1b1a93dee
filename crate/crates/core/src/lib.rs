//! Multi-modal hashing toolkit.
//!
//! The library trains a fusion network that turns per-modality feature
//! vectors into compact binary codes: per-modality MLP normalization,
//! dilation into token sequences, a selective state-space block per
//! modality, additive fusion, a small CNN stack, and a tanh hash layer.
//! Retrieval runs over machine-word packed codes with popcount Hamming
//! ranking, evaluated with multi-label mean Average Precision.
//!
//! Everything is seeded and deterministic: identical seeds reproduce
//! training trajectories, codes, and evaluation reports bit for bit.

pub mod data;
pub mod error;
pub mod hamming;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod ssm;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::RngState;
pub use tensor::Tensor;
