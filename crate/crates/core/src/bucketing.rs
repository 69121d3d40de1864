//! Interval planning and bucket assignment.
//!
//! Test items are grouped into buckets along each attribute so that
//! performance can be compared across the attribute's range. The partition
//! strategy depends on the attribute:
//!
//! * **eCon / tCon** (`isolate-both-ends`): the exact values 0 (unseen) and
//!   1 (perfectly consistent) are categorically different from anything in
//!   between, so each gets its own bucket; the remainder is split into
//!   `m - 2` equal-population buckets.
//! * **eFre / tFre / oDen** (`isolate-zero`): 0 gets its own bucket, the
//!   rest is split into `m - 1` equal-population buckets.
//! * **sLen / eDen** (`equal-population`): plain `m`-way equal-population
//!   split.
//! * **eLen** (`fixed-lengths`): fixed buckets {1}, {2}, {3}, {>=4} —
//!   entity lengths concentrate on tiny integers, where equal-population
//!   cuts are meaningless.
//!
//! Equal-population cuts fall between distinct sorted values, so ties are
//! never split across buckets. Plans are fitted on the gold-side values of
//! the test set and reused verbatim for predicted spans. Intervals are
//! contiguous `[lo, hi)` with the last interval closed; a value equal to an
//! interior boundary falls in the higher bucket. When fewer distinct values
//! exist than requested buckets, the plan simply has fewer buckets and is
//! flagged `reduced` — an empty bucket is never produced at planning time.

use crate::attributes::{AttributeContext, AttributeId};
use crate::corpus::Span;
use crate::numfmt::format_number;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Errors raised while planning buckets.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BucketError {
    #[error("bucket count must be at least 2, got {0}")]
    InvalidBucketCount(usize),
    #[error("cannot plan buckets over an empty value list")]
    NoValues,
    #[error("attribute {0} is span-native and cannot bucket single tokens")]
    SpanNative(AttributeId),
}

/// Partition strategy, determined by the attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    IsolateBothEnds,
    IsolateZero,
    EqualPopulation,
    FixedLengths,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::IsolateBothEnds => "isolate-both-ends",
            Strategy::IsolateZero => "isolate-zero",
            Strategy::EqualPopulation => "equal-population",
            Strategy::FixedLengths => "fixed-lengths",
        }
    }

    pub fn for_attribute(attr: AttributeId) -> Strategy {
        match attr {
            AttributeId::EntityConsistency | AttributeId::TokenConsistency => {
                Strategy::IsolateBothEnds
            }
            AttributeId::EntityFrequency
            | AttributeId::TokenFrequency
            | AttributeId::OovDensity => Strategy::IsolateZero,
            AttributeId::SentenceLength | AttributeId::EntityDensity => Strategy::EqualPopulation,
            AttributeId::EntityLength => Strategy::FixedLengths,
        }
    }
}

/// One bucket's interval. Intervals are contiguous: each `hi` equals the
/// next interval's `lo`; the final `hi` is the largest observed value (the
/// final interval is closed) or infinity for the open-ended length bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    #[serde(with = "nullable_infinity")]
    pub hi: f64,
}

mod nullable_infinity {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// A fitted bucket plan for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketPlan {
    pub attribute: AttributeId,
    pub strategy: Strategy,
    pub intervals: Vec<Interval>,
    pub labels: Vec<String>,
    /// True when fewer buckets than requested could be formed without
    /// leaving one empty.
    pub reduced: bool,
}

impl BucketPlan {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Bucket index for a value. Total: values below the planned range go to
    /// the first bucket, values above it to the last (plans may be reused on
    /// data they were not fitted on; see [`BucketPlan::out_of_range`]).
    pub fn assign(&self, value: f64) -> usize {
        self.intervals[1..]
            .iter()
            .take_while(|iv| value >= iv.lo)
            .count()
    }

    /// Whether a value lies outside the planned range and would be clamped.
    pub fn out_of_range(&self, value: f64) -> bool {
        let last = self.intervals[self.intervals.len() - 1];
        value < self.intervals[0].lo || (last.hi.is_finite() && value > last.hi)
    }

    /// Human-readable form of one interval, e.g. `[0.25, 0.5)`, `>=4`, or a
    /// bare `0` / `1` for the isolated endpoint buckets.
    pub fn display_interval(&self, k: usize) -> String {
        let iv = self.intervals[k];
        let last = k + 1 == self.intervals.len();
        match self.strategy {
            Strategy::FixedLengths => {
                if iv.hi.is_infinite() {
                    format!(">={}", format_number(iv.lo))
                } else {
                    format_number(iv.lo)
                }
            }
            Strategy::IsolateZero | Strategy::IsolateBothEnds if k == 0 && iv.lo == 0.0 => {
                "0".to_owned()
            }
            Strategy::IsolateBothEnds if last && iv.lo == 1.0 => "1".to_owned(),
            _ if last => format!("[{}, {}]", format_number(iv.lo), format_number(iv.hi)),
            _ => format!("[{}, {})", format_number(iv.lo), format_number(iv.hi)),
        }
    }
}

/// Display names for `k` buckets: the size scale for four, `B1..Bk` else.
fn bucket_labels(k: usize) -> Vec<String> {
    if k == 4 {
        ["XS", "S", "L", "XL"].iter().map(|s| (*s).to_owned()).collect()
    } else {
        (1..=k).map(|i| format!("B{i}")).collect()
    }
}

/// Distinct ascending values with their multiplicities.
struct Grouped {
    values: Vec<f64>,
    cum: Vec<usize>,
}

impl Grouped {
    fn new(mut values: Vec<f64>) -> Grouped {
        values.sort_by(f64::total_cmp);
        let mut distinct = Vec::new();
        let mut cum = Vec::new();
        let mut count = 0usize;
        for v in values {
            count += 1;
            if distinct.last() == Some(&v) {
                *cum.last_mut().unwrap() = count;
            } else {
                distinct.push(v);
                cum.push(count);
            }
        }
        Grouped { values: distinct, cum }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn total(&self) -> usize {
        self.cum.last().copied().unwrap_or(0)
    }
}

/// Splits distinct value groups into at most `q` population-balanced ranges.
/// Returns `(lo value, hi observed value)` seeds; never an empty range.
fn equal_population(groups: &Grouped, q: usize) -> Vec<(f64, f64)> {
    let d = groups.len();
    let q = q.min(d);
    if q == 0 {
        return Vec::new();
    }
    let n = groups.total() as f64;
    let mut seeds = Vec::with_capacity(q);
    let mut consumed = 0usize; // groups already assigned
    for k in 1..=q {
        let end = if k == q {
            d
        } else {
            // Cut as close to the ideal cumulative count as ties permit:
            // candidate boundaries leave enough groups for later buckets.
            let ideal = k as f64 * n / q as f64;
            let lo_i = consumed + 1;
            let hi_i = d - (q - k);
            let mut best = lo_i;
            let mut best_gap = f64::INFINITY;
            for i in lo_i..=hi_i {
                let gap = (groups.cum[i - 1] as f64 - ideal).abs();
                if gap < best_gap {
                    best_gap = gap;
                    best = i;
                }
            }
            best
        };
        seeds.push((groups.values[consumed], groups.values[end - 1]));
        consumed = end;
    }
    seeds
}

/// Fits a bucket plan for an attribute over the observed (gold-side) values.
pub fn plan_buckets(attr: AttributeId, values: &[f64], m: usize) -> Result<BucketPlan, BucketError> {
    if m < 2 {
        return Err(BucketError::InvalidBucketCount(m));
    }
    if values.is_empty() {
        return Err(BucketError::NoValues);
    }
    let strategy = Strategy::for_attribute(attr);

    if strategy == Strategy::FixedLengths {
        let intervals = vec![
            Interval { lo: 1.0, hi: 2.0 },
            Interval { lo: 2.0, hi: 3.0 },
            Interval { lo: 3.0, hi: 4.0 },
            Interval { lo: 4.0, hi: f64::INFINITY },
        ];
        return Ok(BucketPlan {
            attribute: attr,
            strategy,
            labels: bucket_labels(intervals.len()),
            intervals,
            reduced: false,
        });
    }

    let has_zero = values.contains(&0.0);
    let has_one = values.contains(&1.0);
    // (lo, observed hi) seeds in ascending order.
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    match strategy {
        Strategy::IsolateBothEnds => {
            let mid: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0 && *v < 1.0).collect();
            if has_zero {
                seeds.push((0.0, 0.0));
            }
            seeds.extend(equal_population(&Grouped::new(mid), m.saturating_sub(2)));
            if has_one {
                seeds.push((1.0, 1.0));
            }
        }
        Strategy::IsolateZero => {
            let rest: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
            if has_zero {
                seeds.push((0.0, 0.0));
            }
            seeds.extend(equal_population(&Grouped::new(rest), m - 1));
        }
        Strategy::EqualPopulation => {
            seeds.extend(equal_population(&Grouped::new(values.to_vec()), m));
        }
        Strategy::FixedLengths => unreachable!(),
    }
    debug_assert!(!seeds.is_empty());

    let intervals: Vec<Interval> = seeds
        .iter()
        .enumerate()
        .map(|(k, &(lo, observed_hi))| Interval {
            lo,
            hi: if k + 1 < seeds.len() { seeds[k + 1].0 } else { observed_hi },
        })
        .collect();
    Ok(BucketPlan {
        attribute: attr,
        strategy,
        labels: bucket_labels(intervals.len()),
        reduced: intervals.len() < m,
        intervals,
    })
}

/// A plan together with the item indices assigned to each bucket.
#[derive(Debug, Clone)]
pub struct Partition {
    pub plan: BucketPlan,
    /// Per bucket, indices into the value/item slice the partition was built
    /// from.
    pub members: Vec<Vec<usize>>,
}

impl Partition {
    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

/// Assigns values under an existing plan.
pub fn partition_with_plan(plan: BucketPlan, values: &[f64]) -> Partition {
    let mut members = vec![Vec::new(); plan.len()];
    for (i, v) in values.iter().enumerate() {
        members[plan.assign(*v)].push(i);
    }
    Partition { plan, members }
}

/// Plans on the values and assigns them in one step.
pub fn bucket_values(attr: AttributeId, values: &[f64], m: usize) -> Result<Partition, BucketError> {
    Ok(partition_with_plan(plan_buckets(attr, values, m)?, values))
}

/// Buckets test-set spans by an attribute, planning on their (gold-side)
/// values. Partition members index into `spans`.
pub fn bucket_spans(
    spans: &[Span],
    attr: AttributeId,
    ctx: &AttributeContext<'_>,
    m: usize,
) -> Result<Partition, BucketError> {
    let values: Vec<f64> = spans.iter().map(|s| ctx.span_value(s, attr)).collect();
    bucket_values(attr, &values, m)
}

/// Buckets every token of the test corpus by a token-applicable attribute.
/// Returns the partition plus the `(sentence, token)` id for each item
/// index.
pub fn bucket_tokens(
    ctx: &AttributeContext<'_>,
    attr: AttributeId,
    m: usize,
) -> Result<(Partition, Vec<(usize, usize)>), BucketError> {
    if !attr.applies_to_tokens() {
        return Err(BucketError::SpanNative(attr));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (s, sentence) in ctx.corpus.sentences.iter().enumerate() {
        for t in 0..sentence.len() {
            ids.push((s, t));
            values.push(ctx.token_value(s, t, attr).expect("checked applicability"));
        }
    }
    Ok((bucket_values(attr, &values, m)?, ids))
}

/// Requested bucket counts: a default plus per-attribute overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketConfig {
    pub default_m: usize,
    pub per_attribute: BTreeMap<AttributeId, usize>,
}

impl Default for BucketConfig {
    fn default() -> BucketConfig {
        BucketConfig {
            default_m: 4,
            per_attribute: BTreeMap::new(),
        }
    }
}

impl BucketConfig {
    pub fn m_for(&self, attr: AttributeId) -> usize {
        self.per_attribute.get(&attr).copied().unwrap_or(self.default_m)
    }
}

/// A persistable set of fitted plans, one per attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSet {
    pub version: u32,
    pub plans: BTreeMap<AttributeId, BucketPlan>,
}

pub const PLAN_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_length_plan_is_fixed() {
        let plan = plan_buckets(AttributeId::EntityLength, &[1.0, 2.0, 2.0, 3.0, 5.0, 7.0], 4)
            .unwrap();
        assert_eq!(plan.strategy, Strategy::FixedLengths);
        assert_eq!(plan.labels, vec!["XS", "S", "L", "XL"]);
        assert!(!plan.reduced);
        let partition = partition_with_plan(plan.clone(), &[1.0, 2.0, 2.0, 3.0, 5.0, 7.0]);
        assert_eq!(partition.sizes(), vec![1, 2, 1, 2]);
        assert_eq!(plan.display_interval(0), "1");
        assert_eq!(plan.display_interval(3), ">=4");
    }

    #[test]
    fn consistency_plan_isolates_both_ends() {
        let values = [0.0, 0.0, 0.4, 0.6, 1.0, 1.0];
        let partition = bucket_values(AttributeId::EntityConsistency, &values, 4).unwrap();
        assert_eq!(partition.sizes(), vec![2, 1, 1, 2]);
        assert_eq!(partition.plan.display_interval(0), "0");
        assert_eq!(partition.plan.display_interval(1), "[0.4, 0.6)");
        assert_eq!(partition.plan.display_interval(3), "1");
        assert!(!partition.plan.reduced);
    }

    #[test]
    fn frequency_plan_isolates_zero() {
        // Twelve distinct nonzero values plus three zeros.
        let mut values = vec![0.0, 0.0, 0.0];
        values.extend((1..=12).map(|i| i as f64 / 100.0));
        let partition = bucket_values(AttributeId::EntityFrequency, &values, 4).unwrap();
        assert_eq!(partition.sizes(), vec![3, 4, 4, 4]);
        assert_eq!(partition.plan.display_interval(0), "0");
    }

    #[test]
    fn boundary_value_falls_in_the_next_bucket() {
        let values: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0 - 0.125).collect();
        let plan = plan_buckets(AttributeId::EntityDensity, &values, 4).unwrap();
        for k in 1..plan.len() {
            let boundary = plan.intervals[k].lo;
            assert_eq!(plan.intervals[k - 1].hi, boundary, "intervals are contiguous");
            assert_eq!(plan.assign(boundary), k, "hi belongs to the next bucket");
        }
    }

    #[test]
    fn too_few_distinct_values_reduces_the_plan() {
        let values = [5.0, 5.0, 9.0, 9.0, 9.0];
        let partition = bucket_values(AttributeId::SentenceLength, &values, 4).unwrap();
        assert!(partition.plan.reduced);
        assert_eq!(partition.sizes(), vec![2, 3]);
        assert_eq!(partition.plan.labels, vec!["B1", "B2"]);
    }

    #[test]
    fn consistency_plan_with_no_middle_values() {
        let values = [0.0, 1.0, 1.0];
        let partition = bucket_values(AttributeId::TokenConsistency, &values, 4).unwrap();
        assert!(partition.plan.reduced);
        assert_eq!(partition.sizes(), vec![1, 2]);
        assert_eq!(partition.plan.display_interval(0), "0");
        assert_eq!(partition.plan.display_interval(1), "1");
    }

    #[test]
    fn equal_population_never_splits_ties() {
        let values = [1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let partition = bucket_values(AttributeId::SentenceLength, &values, 4).unwrap();
        // The four tied 1s stay together whatever the cut positions.
        let bucket_of_first = partition.plan.assign(1.0);
        assert_eq!(
            partition.members[bucket_of_first].len() >= 4,
            true,
            "tied values share a bucket"
        );
        let total: usize = partition.sizes().iter().sum();
        assert_eq!(total, values.len());
    }

    #[test]
    fn plans_are_deterministic_under_permutation() {
        let mut values: Vec<f64> = (0..40).map(|i| (i % 7) as f64 + 0.5).collect();
        let plan_a = plan_buckets(AttributeId::SentenceLength, &values, 5).unwrap();
        values.reverse();
        values.rotate_left(13);
        let plan_b = plan_buckets(AttributeId::SentenceLength, &values, 5).unwrap();
        assert_eq!(plan_a, plan_b);
    }

    #[test]
    fn assignment_is_total_and_clamps() {
        let plan = plan_buckets(AttributeId::EntityDensity, &[0.2, 0.4, 0.6, 0.8], 2).unwrap();
        assert_eq!(plan.assign(-5.0), 0);
        assert!(plan.out_of_range(-5.0));
        assert_eq!(plan.assign(99.0), plan.len() - 1);
        assert!(plan.out_of_range(99.0));
        assert!(!plan.out_of_range(0.5));
    }

    #[test]
    fn invalid_requests_error() {
        assert_eq!(
            plan_buckets(AttributeId::SentenceLength, &[], 4),
            Err(BucketError::NoValues)
        );
        assert_eq!(
            plan_buckets(AttributeId::SentenceLength, &[1.0], 1),
            Err(BucketError::InvalidBucketCount(1))
        );
    }

    #[test]
    fn plan_round_trips_through_json_including_open_interval() {
        let plan = plan_buckets(AttributeId::EntityLength, &[1.0, 4.0], 4).unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        assert!(text.contains("\"hi\":null"), "open end serializes as null: {text}");
        let back: BucketPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
    }
}
