//! Hamming ranking over a code bank.
//!
//! Two interchangeable rankers sit behind [`Ranker`] and are selected by
//! name: `bucket` counts into `k + 1` distance buckets (distances are small
//! integers, so O(n) beats a comparison sort) and `sort` is the plain
//! comparison sort kept as the oracle. Both order by ascending distance
//! with ties broken by ascending id, so every ranking is deterministic.

use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamming::{hamming_words, CodeBank, PackedCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankedItem {
    pub id: u64,
    pub distance: u32,
}

pub trait Ranker: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Ranks the whole bank: ascending `(distance, id)`.
    fn rank(&self, query: &PackedCode, bank: &CodeBank) -> Result<Vec<RankedItem>>;
}

fn check_bits(query: &PackedCode, bank: &CodeBank) -> Result<()> {
    if query.k != bank.k() {
        return Err(Error::BitsMismatch {
            left: query.k,
            right: bank.k(),
        });
    }
    Ok(())
}

/// Distance-bucket counting ranker, the fast path.
#[derive(Debug, Clone, Copy, Default)]
pub struct BucketRanker;

impl Ranker for BucketRanker {
    fn name(&self) -> &'static str {
        "bucket"
    }

    fn rank(&self, query: &PackedCode, bank: &CodeBank) -> Result<Vec<RankedItem>> {
        check_bits(query, bank)?;
        let mut buckets: Vec<Vec<u64>> = vec![Vec::new(); bank.k() + 1];
        for i in 0..bank.n() {
            let d = hamming_words(&query.words, bank.code(i));
            buckets[d as usize].push(bank.id(i));
        }
        let mut out = Vec::with_capacity(bank.n());
        for (d, bucket) in buckets.iter_mut().enumerate() {
            bucket.sort_unstable();
            out.extend(bucket.iter().map(|&id| RankedItem {
                id,
                distance: d as u32,
            }));
        }
        Ok(out)
    }
}

/// Comparison-sort ranker, the correctness anchor.
#[derive(Debug, Clone, Copy, Default)]
pub struct SortRanker;

impl Ranker for SortRanker {
    fn name(&self) -> &'static str {
        "sort"
    }

    fn rank(&self, query: &PackedCode, bank: &CodeBank) -> Result<Vec<RankedItem>> {
        check_bits(query, bank)?;
        let mut out: Vec<RankedItem> = (0..bank.n())
            .map(|i| RankedItem {
                id: bank.id(i),
                distance: hamming_words(&query.words, bank.code(i)),
            })
            .collect();
        out.sort_unstable_by_key(|item| (item.distance, item.id));
        Ok(out)
    }
}

static BUCKET: BucketRanker = BucketRanker;
static SORT: SortRanker = SortRanker;
static REGISTRY: [&dyn Ranker; 2] = [&BUCKET, &SORT];

pub fn ranker_registry() -> &'static [&'static dyn Ranker] {
    &REGISTRY
}

pub fn ranker_names() -> Vec<&'static str> {
    ranker_registry().iter().map(|r| r.name()).collect()
}

pub fn ranker_by_name(name: &str) -> Result<&'static dyn Ranker> {
    ranker_registry()
        .iter()
        .find(|r| r.name() == name)
        .copied()
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "ranker",
            name: name.to_string(),
            available: ranker_names(),
        })
}

/// Top-k nearest codes without a full sort: a bounded max-heap on
/// `(distance, id)` keeps the best `topk` seen so far. Equals
/// `rank(query, bank)[..topk]` exactly.
pub fn knn(query: &PackedCode, bank: &CodeBank, topk: usize) -> Result<Vec<RankedItem>> {
    check_bits(query, bank)?;
    let keep = topk.min(bank.n());
    if keep == 0 {
        return Ok(Vec::new());
    }
    let mut heap: BinaryHeap<(u32, u64)> = BinaryHeap::with_capacity(keep + 1);
    for i in 0..bank.n() {
        let d = hamming_words(&query.words, bank.code(i));
        let key = (d, bank.id(i));
        if heap.len() < keep {
            heap.push(key);
        } else if key < *heap.peek().expect("non-empty heap") {
            heap.pop();
            heap.push(key);
        }
    }
    let mut sorted: Vec<(u32, u64)> = heap.into_vec();
    sorted.sort_unstable();
    Ok(sorted
        .into_iter()
        .map(|(distance, id)| RankedItem { id, distance })
        .collect())
}

/// For `±1` vectors, `<a, b> = k - 2 * hamming(a, b)`.
pub fn inner_product_from_hamming(k: usize, distance: u32) -> i64 {
    k as i64 - 2 * distance as i64
}

/// Verifies the identity on a concrete pair by computing the inner product
/// from the unpacked vectors.
pub fn check_inner_product_identity(a: &PackedCode, b: &PackedCode) -> Result<bool> {
    let d = crate::hamming::hamming(a, b)?;
    let dot: f64 = a
        .unpack()
        .iter()
        .zip(b.unpack())
        .map(|(x, y)| x * y)
        .sum();
    Ok(dot as i64 == inner_product_from_hamming(a.k, d))
}
