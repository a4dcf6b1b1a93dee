//! Retrieval evaluation: multi-label mean Average Precision over full
//! Hamming rankings, plus precision@K.
//!
//! An item is relevant to a query iff their multi-hot label vectors share
//! at least one category. mAP is computed over the full retrieval set.
//! Queries with zero relevant items are excluded from the mean and counted
//! separately in the report rather than silently scored 0.

pub mod reference;

pub use reference::{paper_reference, reference_datasets, REFERENCE_BITS};

use std::collections::BTreeMap;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamming::{CodeBank, Ranker};

/// True iff the two multi-hot rows share at least one category.
pub fn relevant(a: &[u8], b: &[u8]) -> bool {
    a.iter().zip(b).any(|(&x, &y)| x == 1 && y == 1)
}

/// Average precision of a ranked relevance sequence:
/// `AP = (1/R) * sum over relevant positions p of (relevant_up_to_p / p)`,
/// positions 1-based. Returns `None` when nothing is relevant (the query
/// is excluded, not scored 0).
pub fn average_precision(rel: &[bool]) -> Option<f64> {
    let total = rel.iter().filter(|&&r| r).count();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &r) in rel.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

/// Mean over a sorted copy: the reduction order is a function of the
/// multiset of values alone.
fn canonical_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Relevant fraction among the top `min(K, n)` items.
pub fn precision_at(rel: &[bool], k: usize) -> f64 {
    let take = k.min(rel.len());
    if take == 0 {
        return 0.0;
    }
    rel.iter().take(take).filter(|&&r| r).count() as f64 / take as f64
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PaperReference {
    pub dataset: String,
    pub map: f64,
}

/// Evaluation report. The JSON wire format is
/// `{map, num_queries, excluded_queries, precision_at, bits, paper_reference?}`;
/// per-query APs and the retrieval size are carried in memory only.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub map: f64,
    /// Total queries evaluated, including excluded ones.
    pub num_queries: usize,
    /// Queries with zero relevant items, excluded from the mean.
    pub excluded_queries: usize,
    pub precision_at: BTreeMap<usize, f64>,
    pub bits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paper_reference: Option<PaperReference>,
    #[serde(skip)]
    pub per_query_ap: Vec<f64>,
    #[serde(skip)]
    pub retrieval_size: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Ranks every query against the retrieval bank, computes per-query AP and
/// precision@K, and averages over queries with at least one relevant item.
/// Per-query work is order-preserving parallel; the mean is a fixed-order
/// reduction, so the result is independent of thread count.
pub fn mean_average_precision(
    queries: &CodeBank,
    retrieval: &CodeBank,
    ranker: &dyn Ranker,
    precision_ks: &[usize],
) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    if queries.k() != retrieval.k() {
        return Err(Error::BitsMismatch {
            left: queries.k(),
            right: retrieval.k(),
        });
    }
    if queries.labels().categories() != retrieval.labels().categories() {
        return Err(Error::CategoryMismatch {
            declared: queries.labels().categories(),
            found: retrieval.labels().categories(),
        });
    }

    let row_of_id: HashMap<u64, usize> = retrieval
        .ids()
        .iter()
        .enumerate()
        .map(|(row, &id)| (id, row))
        .collect();

    let per_query: Vec<Result<(Option<f64>, Vec<f64>)>> = (0..queries.n())
        .into_par_iter()
        .map(|qi| {
            let ranked = ranker.rank(&queries.packed(qi), retrieval)?;
            let qlabels = queries.labels().row(qi);
            let rel: Vec<bool> = ranked
                .iter()
                .map(|item| {
                    let row = row_of_id[&item.id];
                    relevant(qlabels, retrieval.labels().row(row))
                })
                .collect();
            let ap = average_precision(&rel);
            let precs = precision_ks
                .iter()
                .map(|&k| precision_at(&rel, k))
                .collect();
            Ok((ap, precs))
        })
        .collect();

    let mut per_query_ap = Vec::with_capacity(queries.n());
    let mut excluded = 0usize;
    let mut prec_cols: Vec<Vec<f64>> = vec![Vec::new(); precision_ks.len()];
    for result in per_query {
        let (ap, precs) = result?;
        match ap {
            Some(v) => {
                per_query_ap.push(v);
                for (col, p) in prec_cols.iter_mut().zip(&precs) {
                    col.push(*p);
                }
            }
            None => excluded += 1,
        }
    }
    let included = per_query_ap.len();
    if included == 0 {
        return Err(Error::invalid(
            "mean_average_precision",
            "every query has zero relevant items",
        ));
    }
    // means reduce in sorted order so permuting the query set cannot move
    // the result by even an ulp
    let map = canonical_mean(&per_query_ap);
    let precision_at = precision_ks
        .iter()
        .zip(&prec_cols)
        .map(|(&k, col)| (k, canonical_mean(col)))
        .collect();

    Ok(EvalReport {
        map,
        num_queries: queries.n(),
        excluded_queries: excluded,
        precision_at,
        bits: queries.k(),
        paper_reference: None,
        per_query_ap,
        retrieval_size: retrieval.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelMatrix;
    use crate::hamming::{BucketRanker, PackedCode};
    use crate::rng::RngState;

    #[test]
    fn relevance_rules() {
        assert!(relevant(&[1, 0], &[1, 0]));
        assert!(!relevant(&[1, 0, 0], &[0, 1, 1]));
        assert!(relevant(&[1, 0, 1, 0], &[0, 0, 1, 1]));
    }

    #[test]
    fn ap_hand_case() {
        // [rel, nonrel, rel] -> (1/1 + 2/3) / 2 = 0.8333...
        let ap = average_precision(&[true, false, true]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn ap_all_relevant_first_is_one() {
        let ap = average_precision(&[true, true, true, false, false]).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn ap_none_relevant_is_excluded() {
        assert!(average_precision(&[false, false]).is_none());
    }

    /// Brute-force AP straight from the definition, written independently:
    /// enumerate relevant positions, divide running hit count by position.
    fn brute_force_ap(rel: &[bool]) -> Option<f64> {
        let positions: Vec<usize> = rel
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| i + 1)
            .collect();
        if positions.is_empty() {
            return None;
        }
        let mut total = 0.0;
        for (count, &p) in positions.iter().enumerate() {
            total += (count + 1) as f64 / p as f64;
        }
        Some(total / positions.len() as f64)
    }

    #[test]
    fn ap_matches_brute_force_on_random_instances() {
        let mut rng = RngState::new(31);
        for _ in 0..200 {
            let rel: Vec<bool> = (0..20).map(|_| rng.next_u64().is_multiple_of(3)).collect();
            match (average_precision(&rel), brute_force_ap(&rel)) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-15),
                (None, None) => {}
                other => panic!("disagreement: {other:?}"),
            }
        }
    }

    /// Worst ranking (all relevant last) has the closed form
    /// `(1/R) * sum_{i=1..R} i / (n - R + i)`.
    #[test]
    fn ap_adversarial_closed_form() {
        for (n, r) in [(10, 3), (20, 7), (50, 1)] {
            let mut rel = vec![false; n - r];
            rel.extend(std::iter::repeat_n(true, r));
            let ap = average_precision(&rel).unwrap();
            let closed: f64 =
                (1..=r).map(|i| i as f64 / (n - r + i) as f64).sum::<f64>() / r as f64;
            assert!((ap - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn precision_at_cases() {
        let rel = [true, false, true];
        assert_eq!(precision_at(&rel, 1), 1.0);
        assert!((precision_at(&rel, 3) - 2.0 / 3.0).abs() < 1e-15);
        // K beyond n: overall relevant fraction
        assert!((precision_at(&rel, 10) - 2.0 / 3.0).abs() < 1e-15);
    }

    fn bank_from(codes: Vec<Vec<f64>>, labels: Vec<Vec<u8>>, ids: Vec<u64>) -> CodeBank {
        let k = codes[0].len();
        let rows: Vec<Vec<u64>> = codes
            .iter()
            .map(|c| PackedCode::pack(c).unwrap().words)
            .collect();
        let c = labels[0].len();
        let flat: Vec<u8> = labels.into_iter().flatten().collect();
        let lm = LabelMatrix::new(rows.len(), c, flat).unwrap();
        CodeBank::new(k, rows, lm, ids).unwrap()
    }

    #[test]
    fn self_retrieval_gives_map_one() {
        let code = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let bank = bank_from(vec![code.clone()], vec![vec![1, 0]], vec![0]);
        let report = mean_average_precision(&bank, &bank, &BucketRanker, &[1]).unwrap();
        assert_eq!(report.map, 1.0);
        assert_eq!(report.num_queries, 1);
        assert_eq!(report.excluded_queries, 0);
    }

    #[test]
    fn map_rejects_k_mismatch_and_empty_queries() {
        let a = bank_from(vec![vec![1.0; 8]], vec![vec![1]], vec![0]);
        let b = bank_from(vec![vec![1.0; 16]], vec![vec![1]], vec![0]);
        assert!(matches!(
            mean_average_precision(&a, &b, &BucketRanker, &[]),
            Err(Error::BitsMismatch { .. })
        ));
        let empty = CodeBank::new(
            8,
            vec![],
            LabelMatrix::new(0, 1, vec![]).unwrap(),
            vec![],
        )
        .unwrap();
        assert!(matches!(
            mean_average_precision(&empty, &a, &BucketRanker, &[]),
            Err(Error::EmptyQuerySet)
        ));
    }

    /// With random codes and random-but-balanced labels, mAP concentrates
    /// near the relevant-fraction prior.
    #[test]
    fn random_codes_score_near_prior() {
        let mut rng = RngState::new(33);
        let n_retr = 600;
        let n_query = 60;
        let classes = 3;
        let make = |n: usize, rng: &mut RngState, id0: u64| {
            let codes: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..16)
                        .map(|_| if rng.next_u64() & 1 == 1 { 1.0 } else { -1.0 })
                        .collect()
                })
                .collect();
            let labels: Vec<Vec<u8>> = (0..n)
                .map(|i| {
                    let mut row = vec![0u8; classes];
                    row[i % classes] = 1;
                    row
                })
                .collect();
            let ids = (id0..id0 + n as u64).collect();
            bank_from(codes, labels, ids)
        };
        let retrieval = make(n_retr, &mut rng, 0);
        let queries = make(n_query, &mut rng, 10_000);
        let report =
            mean_average_precision(&queries, &retrieval, &BucketRanker, &[10]).unwrap();
        let prior = 1.0 / classes as f64;
        assert!(
            (report.map - prior).abs() < 0.05,
            "random-code mAP {} strays from prior {prior}",
            report.map
        );
    }

    /// Permuting query order permutes per-query APs but leaves the mean
    /// bit-identical (fixed-order reduction over the permuted list differs
    /// only by which query maps to which slot).
    #[test]
    fn map_invariant_under_query_permutation() {
        let mut rng = RngState::new(35);
        let codes: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                (0..8)
                    .map(|_| if rng.next_u64() & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        let labels: Vec<Vec<u8>> = (0..12)
            .map(|i| {
                let mut row = vec![0u8; 2];
                row[i % 2] = 1;
                row
            })
            .collect();
        let retrieval = bank_from(codes.clone(), labels.clone(), (0..12).collect());

        let fwd = bank_from(codes.clone(), labels.clone(), (100..112).collect());
        let rev_codes: Vec<Vec<f64>> = codes.iter().rev().cloned().collect();
        let rev_labels: Vec<Vec<u8>> = labels.iter().rev().cloned().collect();
        let rev = bank_from(rev_codes, rev_labels, (100..112).rev().collect());

        let a = mean_average_precision(&fwd, &retrieval, &BucketRanker, &[3]).unwrap();
        let b = mean_average_precision(&rev, &retrieval, &BucketRanker, &[3]).unwrap();
        let mut ap_a = a.per_query_ap.clone();
        let mut ap_b = b.per_query_ap.clone();
        ap_a.sort_by(f64::total_cmp);
        ap_b.sort_by(f64::total_cmp);
        assert_eq!(ap_a, ap_b);
        // the canonical-order reduction makes the means exactly equal
        assert_eq!(a.map.to_bits(), b.map.to_bits());
        assert_eq!(
            a.precision_at[&3].to_bits(),
            b.precision_at[&3].to_bits()
        );
    }

    #[test]
    fn report_json_shape() {
        let mut report = EvalReport {
            map: 0.5,
            num_queries: 10,
            excluded_queries: 1,
            precision_at: [(1, 1.0), (5, 0.8)].into_iter().collect(),
            bits: 16,
            paper_reference: None,
            per_query_ap: vec![0.5; 9],
            retrieval_size: 100,
        };
        let json = report.to_json();
        assert!(json.contains("\"map\":0.5"));
        assert!(json.contains("\"precision_at\":{\"1\":1.0,\"5\":0.8}"));
        assert!(!json.contains("per_query_ap"));
        assert!(!json.contains("paper_reference"));
        report.paper_reference = Some(PaperReference {
            dataset: "MIR-Flickr25K".to_string(),
            map: 0.8319,
        });
        assert!(report.to_json().contains("paper_reference"));
    }
}
