//! The (system x attribute x bucket) performance tensor and the measures
//! and diagnoses computed from it.
//!
//! Model-wise measures describe one system's sensitivity to an attribute:
//! the Spearman correlation between bucket F1 and bucket order (rank 1 =
//! lowest interval), and the population standard deviation of the bucket
//! F1s. Attribute-wise measures describe the attribute itself: its mean
//! value over the test set and the mean absolute correlation across
//! systems. Diagnoses pick out the best and worst buckets of a single
//! system, or the buckets where two systems diverge the most.

use crate::attributes::{AttributeContext, AttributeId};
use crate::bucketing::{
    partition_with_plan, plan_buckets, BucketConfig, BucketError, BucketPlan, PlanSet,
};
use crate::corpus::{extract_spans, Corpus, CorpusError, Span, SpanSource};
use crate::metrics::{bucket_prf, micro_f1, BucketScore, Prf};
use crate::stats::{friedman_test, population_std, spearman_rho, TestResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or querying the tensor.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("attribute {attribute}: {source}")]
    Bucketing {
        attribute: AttributeId,
        source: BucketError,
    },
    #[error("no attributes requested")]
    NoAttributes,
}

/// One attribute's bucket plan and gold-side bucket populations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeAxis {
    pub attribute: AttributeId,
    pub plan: BucketPlan,
    pub gold_population: Vec<u64>,
}

/// Bucket scores for every (system, attribute, bucket) triple, plus overall
/// corpus scores. `cells[i][j][k]` is `None` when bucket `k` of attribute
/// `j` holds neither gold nor predicted spans for system `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerformanceTensor {
    pub version: u32,
    pub systems: Vec<String>,
    pub attributes: Vec<AttributeId>,
    pub axes: Vec<AttributeAxis>,
    pub cells: Vec<Vec<Vec<Option<BucketScore>>>>,
    pub overall: Vec<Prf>,
}

pub const TENSOR_VERSION: u32 = 1;

impl PerformanceTensor {
    pub fn system_index(&self, name: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == name)
    }

    pub fn attribute_index(&self, attr: AttributeId) -> Option<usize> {
        self.attributes.iter().position(|a| *a == attr)
    }

    /// F1 of one cell, if the bucket is populated for that system.
    pub fn f1(&self, system: usize, attribute: usize, bucket: usize) -> Option<f64> {
        self.cells[system][attribute][bucket].map(|s| s.f1)
    }
}

/// Builds the tensor: plans buckets per attribute on the gold-side values
/// (or reuses `plans` when provided), assigns both gold and predicted spans
/// under the same plan, and scores each bucket for each system.
pub fn build_tensor(
    test: &Corpus,
    ctx: &AttributeContext<'_>,
    attributes: &[AttributeId],
    buckets: &BucketConfig,
    plans: Option<&PlanSet>,
) -> Result<PerformanceTensor, AnalysisError> {
    if attributes.is_empty() {
        return Err(AnalysisError::NoAttributes);
    }
    let gold = extract_spans(test, SpanSource::Gold)?;
    let predictions: Vec<Vec<Span>> = test
        .systems
        .iter()
        .map(|name| extract_spans(test, SpanSource::System(name)))
        .collect::<Result<_, _>>()?;

    let mut axes = Vec::with_capacity(attributes.len());
    let mut cells: Vec<Vec<Vec<Option<BucketScore>>>> =
        vec![Vec::with_capacity(attributes.len()); test.systems.len()];
    for &attr in attributes {
        let values: Vec<f64> = gold.iter().map(|s| ctx.span_value(s, attr)).collect();
        let plan = match plans.and_then(|set| set.plans.get(&attr)) {
            Some(plan) => plan.clone(),
            None => plan_buckets(attr, &values, buckets.m_for(attr))
                .map_err(|source| AnalysisError::Bucketing { attribute: attr, source })?,
        };
        let partition = partition_with_plan(plan, &values);
        axes.push(AttributeAxis {
            attribute: attr,
            plan: partition.plan.clone(),
            gold_population: partition.sizes().iter().map(|&n| n as u64).collect(),
        });
        for (i, preds) in predictions.iter().enumerate() {
            let pred_buckets: Vec<usize> = preds
                .iter()
                .map(|s| partition.plan.assign(ctx.span_value(s, attr)))
                .collect();
            cells[i].push(bucket_prf(&partition, &gold, preds, &pred_buckets));
        }
    }
    let overall = predictions.iter().map(|preds| micro_f1(&gold, preds)).collect();
    Ok(PerformanceTensor {
        version: TENSOR_VERSION,
        systems: test.systems.clone(),
        attributes: attributes.to_vec(),
        axes,
        cells,
        overall,
    })
}

/// Model-wise measures for one (system, attribute) pair. Either measure is
/// absent when too few buckets are populated (correlation needs 3, standard
/// deviation 2) or when the F1s are all tied (correlation undefined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelWise {
    pub spearman: Option<f64>,
    pub std_dev: Option<f64>,
}

/// Computes the model-wise measures. Absent buckets are dropped pairwise:
/// a missing bucket removes both its F1 and its rank from the correlation.
pub fn model_wise(tensor: &PerformanceTensor, system: usize, attribute: usize) -> ModelWise {
    let mut ranks = Vec::new();
    let mut f1s = Vec::new();
    for (k, cell) in tensor.cells[system][attribute].iter().enumerate() {
        if let Some(score) = cell {
            ranks.push((k + 1) as f64);
            f1s.push(score.f1);
        }
    }
    ModelWise {
        spearman: if f1s.len() >= 3 {
            spearman_rho(&f1s, &ranks).ok()
        } else {
            None
        },
        std_dev: if f1s.len() >= 2 {
            population_std(&f1s).ok()
        } else {
            None
        },
    }
}

/// Mean attribute value over test spans (the entity-lifted form).
pub fn attribute_zeta(spans: &[Span], attr: AttributeId, ctx: &AttributeContext<'_>) -> f64 {
    debug_assert!(!spans.is_empty());
    spans.iter().map(|s| ctx.span_value(s, attr)).sum::<f64>() / spans.len() as f64
}

/// Mean attribute value over all test tokens; `None` for span-native
/// attributes.
pub fn attribute_zeta_tokens(ctx: &AttributeContext<'_>, attr: AttributeId) -> Option<f64> {
    if !attr.applies_to_tokens() {
        return None;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (s, sentence) in ctx.corpus.sentences.iter().enumerate() {
        for t in 0..sentence.len() {
            sum += ctx.token_value(s, t, attr).expect("checked applicability");
            count += 1;
        }
    }
    Some(sum / count as f64)
}

/// Mean absolute Spearman correlation across systems; `None` when no system
/// has a defined correlation for this attribute.
pub fn attribute_rho(tensor: &PerformanceTensor, attribute: usize) -> Option<f64> {
    let rhos: Vec<f64> = (0..tensor.systems.len())
        .filter_map(|i| model_wise(tensor, i, attribute).spearman)
        .map(f64::abs)
        .collect();
    if rhos.is_empty() {
        None
    } else {
        Some(rhos.iter().sum::<f64>() / rhos.len() as f64)
    }
}

/// Friedman test for one attribute: systems are the blocks, populated
/// buckets the treatments. Only buckets populated for *every* system enter
/// (the test needs complete blocks); `None` when fewer than 3 such buckets
/// or fewer than 2 systems remain.
pub fn attribute_friedman(tensor: &PerformanceTensor, attribute: usize) -> Option<TestResult> {
    let n_systems = tensor.systems.len();
    if n_systems < 2 {
        return None;
    }
    let n_buckets = tensor.axes[attribute].plan.len();
    let complete: Vec<usize> = (0..n_buckets)
        .filter(|&k| (0..n_systems).all(|i| tensor.cells[i][attribute][k].is_some()))
        .collect();
    if complete.len() < 3 {
        return None;
    }
    let rows: Vec<Vec<f64>> = (0..n_systems)
        .map(|i| {
            complete
                .iter()
                .map(|&k| tensor.f1(i, attribute, k).unwrap())
                .collect()
        })
        .collect();
    friedman_test(&rows).ok()
}

/// Best and worst buckets of one system for one attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfDiagnosis {
    pub attribute: AttributeId,
    pub best_bucket: usize,
    pub best_f1: f64,
    pub worst_bucket: usize,
    pub worst_f1: f64,
    /// `best_f1 - worst_f1`.
    pub gap: f64,
    pub tied_best: bool,
    pub tied_worst: bool,
}

/// Finds each attribute's best and worst populated buckets for a system.
/// Ties resolve to the lower bucket index and are flagged. Attributes with
/// no populated bucket are skipped.
pub fn self_diagnose(
    tensor: &PerformanceTensor,
    system: &str,
) -> Result<Vec<SelfDiagnosis>, CorpusError> {
    let i = tensor
        .system_index(system)
        .ok_or_else(|| CorpusError::UnknownSystem(system.to_owned()))?;
    let mut result = Vec::new();
    for j in 0..tensor.attributes.len() {
        let present: Vec<(usize, f64)> = tensor.cells[i][j]
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.map(|s| (k, s.f1)))
            .collect();
        if present.is_empty() {
            continue;
        }
        let (best_bucket, best_f1, tied_best) = extreme(&present, true);
        let (worst_bucket, worst_f1, tied_worst) = extreme(&present, false);
        result.push(SelfDiagnosis {
            attribute: tensor.attributes[j],
            best_bucket,
            best_f1,
            worst_bucket,
            worst_f1,
            gap: best_f1 - worst_f1,
            tied_best,
            tied_worst,
        });
    }
    Ok(result)
}

/// First-index extremum with a tie flag.
fn extreme(present: &[(usize, f64)], max: bool) -> (usize, f64, bool) {
    let mut best = present[0];
    for &(k, v) in &present[1..] {
        if (max && v > best.1) || (!max && v < best.1) {
            best = (k, v);
        }
    }
    let tied = present.iter().filter(|(_, v)| *v == best.1).count() > 1;
    (best.0, best.1, tied)
}

/// Signed performance gaps between two systems along one attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparativeEntry {
    pub attribute: AttributeId,
    /// Per bucket, `f1(A) - f1(B)` where both systems are populated.
    pub gaps: Vec<Option<f64>>,
    pub max_gap_bucket: usize,
    pub max_gap: f64,
    pub min_gap_bucket: usize,
    pub min_gap: f64,
    pub tied_max: bool,
    pub tied_min: bool,
}

/// A full comparative diagnosis between two systems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub system_a: String,
    pub system_b: String,
    pub entries: Vec<ComparativeEntry>,
}

/// Diagnoses where system `a` beats or trails system `b` the most, per
/// attribute, over buckets populated for both. Swapping the systems negates
/// every gap and swaps the max/min roles exactly.
pub fn comparative_diagnose(
    tensor: &PerformanceTensor,
    a: &str,
    b: &str,
) -> Result<Comparison, CorpusError> {
    let ia = tensor
        .system_index(a)
        .ok_or_else(|| CorpusError::UnknownSystem(a.to_owned()))?;
    let ib = tensor
        .system_index(b)
        .ok_or_else(|| CorpusError::UnknownSystem(b.to_owned()))?;
    let mut entries = Vec::new();
    for j in 0..tensor.attributes.len() {
        let gaps: Vec<Option<f64>> = (0..tensor.axes[j].plan.len())
            .map(|k| match (tensor.f1(ia, j, k), tensor.f1(ib, j, k)) {
                (Some(fa), Some(fb)) => Some(fa - fb),
                _ => None,
            })
            .collect();
        let present: Vec<(usize, f64)> = gaps
            .iter()
            .enumerate()
            .filter_map(|(k, g)| g.map(|v| (k, v)))
            .collect();
        if present.is_empty() {
            continue;
        }
        let (max_gap_bucket, max_gap, tied_max) = extreme(&present, true);
        let (min_gap_bucket, min_gap, tied_min) = extreme(&present, false);
        entries.push(ComparativeEntry {
            attribute: tensor.attributes[j],
            gaps,
            max_gap_bucket,
            max_gap,
            min_gap_bucket,
            min_gap,
            tied_max,
            tied_min,
        });
    }
    Ok(Comparison {
        system_a: a.to_owned(),
        system_b: b.to_owned(),
        entries,
    })
}
