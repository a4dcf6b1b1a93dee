//! Packed binary codes and Hamming distance.
//!
//! Packing contract: bit `i` of a code is bit `i % 64` of word `i / 64`,
//! with `+1 -> 1` and `-1 -> 0`; unused high bits of the last word are
//! zero, so whole-word XOR + popcount needs no masking.

pub mod io;
pub mod rank;

pub use io::{read_code_bank, write_code_bank};
pub use rank::{
    inner_product_from_hamming, knn, ranker_by_name, ranker_names, ranker_registry, BucketRanker,
    RankedItem, Ranker, SortRanker,
};

use crate::data::LabelMatrix;
use crate::error::{Error, Result};

pub fn words_per_code(k: usize) -> usize {
    k.div_ceil(64)
}

/// A single packed code with its bit length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCode {
    pub k: usize,
    pub words: Vec<u64>,
}

impl PackedCode {
    /// Packs a `±1` vector; any other entry is rejected.
    pub fn pack(code: &[f64]) -> Result<PackedCode> {
        let k = code.len();
        let mut words = vec![0u64; words_per_code(k)];
        for (i, &v) in code.iter().enumerate() {
            if v == 1.0 {
                words[i / 64] |= 1u64 << (i % 64);
            } else if v != -1.0 {
                return Err(Error::invalid(
                    "pack",
                    format!("entry {i} is {v}, must be exactly +1 or -1"),
                ));
            }
        }
        Ok(PackedCode { k, words })
    }

    /// Inverse of `pack`.
    pub fn unpack(&self) -> Vec<f64> {
        unpack_words(&self.words, self.k)
    }

    pub fn from_words(k: usize, words: Vec<u64>) -> Result<PackedCode> {
        if words.len() != words_per_code(k) {
            return Err(Error::ShapeMismatch {
                op: "packed_code",
                expected: vec![words_per_code(k)],
                actual: vec![words.len()],
            });
        }
        if padding_bits_set(&words, k) {
            return Err(Error::PaddingBitsSet {
                context: "packed code".to_string(),
                row: 0,
            });
        }
        Ok(PackedCode { k, words })
    }
}

pub fn unpack_words(words: &[u64], k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            if words[i / 64] >> (i % 64) & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

pub(crate) fn padding_bits_set(words: &[u64], k: usize) -> bool {
    let rem = k % 64;
    rem != 0 && words[k / 64] >> rem != 0
}

/// XOR + popcount over aligned word slices; the caller guarantees equal k.
#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Hamming distance between two packed codes of the same length.
pub fn hamming(a: &PackedCode, b: &PackedCode) -> Result<u32> {
    if a.k != b.k {
        return Err(Error::BitsMismatch {
            left: a.k,
            right: b.k,
        });
    }
    Ok(hamming_words(&a.words, &b.words))
}

/// Immutable store of packed codes with labels and stable sample ids; the
/// unit of retrieval and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeBank {
    k: usize,
    words_per_code: usize,
    words: Vec<u64>,
    labels: LabelMatrix,
    ids: Vec<u64>,
}

impl CodeBank {
    pub fn new(k: usize, rows: Vec<Vec<u64>>, labels: LabelMatrix, ids: Vec<u64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::ZeroDim {
                context: "code bank".to_string(),
            });
        }
        let n = rows.len();
        if labels.n() != n || ids.len() != n {
            return Err(Error::ShapeMismatch {
                op: "code_bank",
                expected: vec![n],
                actual: vec![labels.n(), ids.len()],
            });
        }
        let wpc = words_per_code(k);
        let mut words = Vec::with_capacity(n * wpc);
        for (row_idx, row) in rows.iter().enumerate() {
            if row.len() != wpc {
                return Err(Error::ShapeMismatch {
                    op: "code_bank",
                    expected: vec![wpc],
                    actual: vec![row.len()],
                });
            }
            if padding_bits_set(row, k) {
                return Err(Error::PaddingBitsSet {
                    context: "code bank".to_string(),
                    row: row_idx,
                });
            }
            words.extend_from_slice(row);
        }
        Ok(CodeBank {
            k,
            words_per_code: wpc,
            words,
            labels,
            ids,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn code(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_code..(i + 1) * self.words_per_code]
    }

    pub fn packed(&self, i: usize) -> PackedCode {
        PackedCode {
            k: self.k,
            words: self.code(i).to_vec(),
        }
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    /// Row position of a sample id, linear scan.
    pub fn position_of_id(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}
