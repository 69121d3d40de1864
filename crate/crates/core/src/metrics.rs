//! Exact-match precision / recall / F1, overall and per bucket.
//!
//! A predicted span is correct only if a gold span with the same sentence,
//! token interval, and label exists; each gold span matches at most one
//! prediction. All denominators follow the zero convention: precision with
//! no predictions is 0, recall with no gold spans is 0, and F1 is 0 whenever
//! precision + recall is 0.

use crate::bucketing::Partition;
use crate::corpus::Span;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Precision / recall / F1 with their defining counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub true_positives: u64,
    pub predicted: u64,
    pub gold: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(true_positives: u64, predicted: u64, gold: u64) -> Prf {
        debug_assert!(true_positives <= predicted && true_positives <= gold);
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, gold);
        Prf {
            true_positives,
            predicted,
            gold,
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Micro-averaged exact-match F1 over two span sets.
///
/// Matching is by multiset of `(sentence, start, end, label)` keys, so
/// repeated identical spans (which decoding never produces, but arbitrary
/// span lists may contain) match one-for-one.
pub fn micro_f1(gold: &[Span], pred: &[Span]) -> Prf {
    let mut gold_keys: HashMap<(usize, usize, usize, &str), u64> = HashMap::new();
    for span in gold {
        *gold_keys.entry(span.key()).or_insert(0) += 1;
    }
    let mut tp = 0u64;
    for span in pred {
        if let Some(count) = gold_keys.get_mut(&span.key()) {
            if *count > 0 {
                *count -= 1;
                tp += 1;
            }
        }
    }
    Prf::from_counts(tp, pred.len() as u64, gold.len() as u64)
}

/// Per-bucket scores. Recall is computed over the gold spans assigned to the
/// bucket, precision over the predicted spans assigned to it; because a true
/// positive's bucket is derived from its own attribute value on each side,
/// the matched counts of the two sides are tracked separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketScore {
    pub gold: u64,
    pub predicted: u64,
    /// Gold spans in this bucket that a prediction matched.
    pub gold_matched: u64,
    /// Predicted spans in this bucket that matched a gold span.
    pub pred_matched: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl BucketScore {
    pub fn from_counts(gold: u64, predicted: u64, gold_matched: u64, pred_matched: u64) -> BucketScore {
        let precision = ratio(pred_matched, predicted);
        let recall = ratio(gold_matched, gold);
        BucketScore {
            gold,
            predicted,
            gold_matched,
            pred_matched,
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

/// Scores one system per bucket.
///
/// `partition` holds the gold spans bucketed under the fitted plan (members
/// index into `gold`); `pred_buckets[i]` is the bucket of `pred[i]` under
/// the same plan. A bucket containing neither gold nor predicted spans has
/// no defined score and yields `None`; a bucket with spans on only one side
/// scores zero on the other by the denominators' zero convention.
pub fn bucket_prf(
    partition: &Partition,
    gold: &[Span],
    pred: &[Span],
    pred_buckets: &[usize],
) -> Vec<Option<BucketScore>> {
    debug_assert_eq!(pred.len(), pred_buckets.len());
    // One-to-one multiset matching, identical to micro_f1's.
    let mut gold_remaining: HashMap<(usize, usize, usize, &str), Vec<usize>> = HashMap::new();
    for (i, span) in gold.iter().enumerate() {
        gold_remaining.entry(span.key()).or_default().push(i);
    }
    let mut gold_is_matched = vec![false; gold.len()];
    let mut pred_is_matched = vec![false; pred.len()];
    for (i, span) in pred.iter().enumerate() {
        if let Some(stack) = gold_remaining.get_mut(&span.key()) {
            if let Some(g) = stack.pop() {
                gold_is_matched[g] = true;
                pred_is_matched[i] = true;
            }
        }
    }

    let buckets = partition.plan.len();
    let mut gold_count = vec![0u64; buckets];
    let mut gold_matched = vec![0u64; buckets];
    for (k, members) in partition.members.iter().enumerate() {
        gold_count[k] = members.len() as u64;
        gold_matched[k] = members.iter().filter(|&&g| gold_is_matched[g]).count() as u64;
    }
    let mut pred_count = vec![0u64; buckets];
    let mut pred_matched = vec![0u64; buckets];
    for (i, &k) in pred_buckets.iter().enumerate() {
        pred_count[k] += 1;
        if pred_is_matched[i] {
            pred_matched[k] += 1;
        }
    }

    (0..buckets)
        .map(|k| {
            if gold_count[k] == 0 && pred_count[k] == 0 {
                None
            } else {
                Some(BucketScore::from_counts(
                    gold_count[k],
                    pred_count[k],
                    gold_matched[k],
                    pred_matched[k],
                ))
            }
        })
        .collect()
}

/// Token-level micro-F1 per bucket over a partition of token positions.
///
/// `gold_labels` / `pred_labels` give each token's category (`"O"` when
/// outside every span) in the same flat order the partition was built from.
/// A token counts toward recall when its gold label is not `O`, toward
/// precision when its predicted label is not `O`, and as a true positive
/// when the two agree and are not `O`.
pub fn token_bucket_accuracy(
    partition: &Partition,
    gold_labels: &[&str],
    pred_labels: &[&str],
) -> Vec<Option<Prf>> {
    debug_assert_eq!(gold_labels.len(), pred_labels.len());
    partition
        .members
        .iter()
        .map(|members| {
            let mut tp = 0u64;
            let mut gold = 0u64;
            let mut predicted = 0u64;
            for &i in members {
                let g = gold_labels[i];
                let p = pred_labels[i];
                if g != "O" {
                    gold += 1;
                }
                if p != "O" {
                    predicted += 1;
                    if p == g {
                        tp += 1;
                    }
                }
            }
            if gold == 0 && predicted == 0 && members.is_empty() {
                None
            } else if gold == 0 && predicted == 0 {
                // Tokens exist but none are entities on either side: the
                // bucket is all-O and scores a vacuous zero.
                Some(Prf::from_counts(0, 0, 0))
            } else {
                Some(Prf::from_counts(tp, predicted, gold))
            }
        })
        .collect()
}
