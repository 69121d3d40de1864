//! Report assembly and serialization.
//!
//! A [`ReportBundle`] is the complete, self-contained result of one analysis
//! run. The emitters here turn it into a stable JSON document (floats
//! rounded to six significant digits, keys sorted, no timestamps — two runs
//! over the same inputs produce byte-identical output), a human-readable
//! markdown report, or chart-ready data files. Bundles from repeated runs
//! (e.g. training restarts) can be merged by averaging.

use crate::analysis::{ComparativeEntry, SelfDiagnosis};
use crate::attributes::AttributeId;
use crate::metrics::{BucketScore, Prf};
use crate::numfmt::{format_number, round_sig};
use crate::stats::{population_std, spearman_rho, TestResult};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("JSON serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV serialization failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("the report has no comparative section")]
    NoComparativeSection,
    #[error("cannot merge reports: {0}")]
    MergeMismatch(String),
    #[error("cannot merge an empty list of reports")]
    EmptyMerge,
}

/// Run provenance: tool identity, input digests, and the effective
/// configuration. Deliberately excludes wall-clock information so reports
/// are reproducible byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    /// Input path -> SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    pub config: ConfigEcho,
}

/// The effective configuration after defaults and overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub scheme: String,
    pub attributes: Vec<AttributeId>,
    pub alpha: f64,
    pub lowercase: bool,
    pub buckets_default: usize,
    pub bucket_overrides: BTreeMap<AttributeId, usize>,
}

/// Whole-test-set scores for one system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemScore {
    pub system: String,
    #[serde(flatten)]
    pub score: Prf,
}

/// The fitted bucket layout of one attribute, in display form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeBuckets {
    pub attribute: AttributeId,
    pub strategy: String,
    pub labels: Vec<String>,
    pub intervals: Vec<String>,
    pub gold_population: Vec<u64>,
    pub reduced: bool,
}

/// Per-bucket scores of one system along one attribute. `None` marks a
/// bucket with neither gold nor predicted spans for this system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemAttributeScores {
    pub system: String,
    pub attribute: AttributeId,
    pub scores: Vec<Option<BucketScore>>,
}

/// One system's sensitivity to one attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelWiseRow {
    pub system: String,
    pub attribute: AttributeId,
    pub spearman: Option<f64>,
    pub std_dev: Option<f64>,
}

/// Dataset-level description of one attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributeWiseRow {
    pub attribute: AttributeId,
    /// Mean attribute value over test entities.
    pub zeta: f64,
    /// Mean over test tokens, for token-applicable attributes.
    pub zeta_tokens: Option<f64>,
    /// `zeta` scaled by the largest `zeta` of this attribute across the
    /// reports being combined; 1.0 for a single run.
    pub zeta_normalized: f64,
    /// Mean absolute rank correlation across systems.
    pub rho: Option<f64>,
}

/// Friedman gate for one attribute: are the bucket scores distinguishable
/// across systems at all?
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub attribute: AttributeId,
    pub test: Option<TestResult>,
    pub significant: bool,
}

/// Best/worst buckets of one system across all attributes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDiagnosis {
    pub system: String,
    pub entries: Vec<SelfDiagnosis>,
}

/// Which of the two compared systems leads where, with a paired test on the
/// highlighted buckets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparativeSection {
    pub system_a: String,
    pub system_b: String,
    pub entries: Vec<ComparativeEntry>,
    pub tests: Vec<HighlightTest>,
}

/// Paired significance test for one highlighted bucket of the comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HighlightTest {
    pub attribute: AttributeId,
    pub bucket: usize,
    /// `"max_gap"` or `"min_gap"`.
    pub kind: String,
    pub test: Option<TestResult>,
    pub significant: bool,
}

/// Everything one analysis run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub overall: Vec<SystemScore>,
    pub buckets: Vec<AttributeBuckets>,
    pub bucket_scores: Vec<SystemAttributeScores>,
    pub model_wise: Vec<ModelWiseRow>,
    pub attribute_wise: Vec<AttributeWiseRow>,
    pub significance: Vec<SignificanceRow>,
    pub self_diagnosis: Vec<SystemDiagnosis>,
    pub comparative: Option<ComparativeSection>,
}

/// Chart-data flavors for [`emit_chart_data`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    /// Attribute radar: zeta / normalized zeta / mean |correlation| per axis.
    Radar,
    /// Bar-chart rows: worst bucket and gap per (system, attribute).
    DiagnosisBars,
    /// Comparative gap matrix (requires a comparative section).
    Heatmap,
}

impl ReportBundle {
    fn buckets_for(&self, attr: AttributeId) -> &AttributeBuckets {
        self.buckets
            .iter()
            .find(|b| b.attribute == attr)
            .expect("every reported attribute has a bucket layout")
    }

    fn significant(&self, attr: AttributeId) -> bool {
        self.significance
            .iter()
            .find(|s| s.attribute == attr)
            .map(|s| s.significant)
            .unwrap_or(false)
    }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

/// Serializes the bundle to pretty-printed JSON with all floats rounded to
/// six significant digits and object keys sorted. The output is a fixed
/// point: parsing and re-emitting it reproduces the same bytes.
pub fn emit_json(bundle: &ReportBundle) -> Result<String, ReportError> {
    let mut value = serde_json::to_value(bundle)?;
    round_floats(&mut value);
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Rounds every float in the tree to six significant digits. Integers are
/// left exact.
fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                let rounded = round_sig(n.as_f64().expect("checked"), 6);
                *value = serde_json::Number::from_f64(rounded)
                    .map(Value::Number)
                    .unwrap_or(Value::Null);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Markdown
// ---------------------------------------------------------------------------

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn pct_signed(x: f64) -> String {
    format!("{:+.1}", 100.0 * x)
}

fn strike_unless(significant: bool, text: String) -> String {
    if significant {
        text
    } else {
        format!("~~{text}~~")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_else(|| "n/a".to_owned())
}

fn tie_mark(label: &str, tied: bool) -> String {
    if tied {
        format!("{label} (tie)")
    } else {
        label.to_owned()
    }
}

/// Renders the bundle as a markdown report. Scores appear as percentages
/// with one decimal; correlations whose attribute fails the significance
/// gate, and comparative gaps whose paired test fails it, are struck
/// through.
pub fn emit_markdown(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let w = &mut out;

    writeln!(w, "# Bucketed NER evaluation").unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "Generated by {} {}.",
        bundle.metadata.tool, bundle.metadata.version
    )
    .unwrap();
    writeln!(w).unwrap();

    writeln!(w, "## Inputs").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "| file | sha256 |").unwrap();
    writeln!(w, "|---|---|").unwrap();
    for (path, digest) in &bundle.metadata.inputs {
        writeln!(w, "| {path} | `{digest}` |").unwrap();
    }
    writeln!(w).unwrap();
    let cfg = &bundle.metadata.config;
    writeln!(
        w,
        "Scheme {}, alpha {}, lowercase {}, default bucket count {}.",
        cfg.scheme,
        format_number(cfg.alpha),
        cfg.lowercase,
        cfg.buckets_default
    )
    .unwrap();
    writeln!(w).unwrap();

    writeln!(w, "## Overall scores").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "| system | precision | recall | F1 |").unwrap();
    writeln!(w, "|---|---:|---:|---:|").unwrap();
    for row in &bundle.overall {
        writeln!(
            w,
            "| {} | {} | {} | {} |",
            row.system,
            pct(row.score.precision),
            pct(row.score.recall),
            pct(row.score.f1)
        )
        .unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Bucket layouts").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "| attribute | strategy | buckets | gold population |").unwrap();
    writeln!(w, "|---|---|---|---|").unwrap();
    for b in &bundle.buckets {
        let buckets: Vec<String> = b
            .labels
            .iter()
            .zip(&b.intervals)
            .map(|(label, interval)| format!("{label} {interval}"))
            .collect();
        let population: Vec<String> =
            b.gold_population.iter().map(u64::to_string).collect();
        let note = if b.reduced { " (reduced)" } else { "" };
        writeln!(
            w,
            "| {} | {}{} | {} | {} |",
            b.attribute.as_str(),
            b.strategy,
            note,
            buckets.join(" / "),
            population.join(" / ")
        )
        .unwrap();
    }
    writeln!(w).unwrap();

    for b in &bundle.buckets {
        writeln!(w, "## Bucket F1: {}", b.attribute.as_str()).unwrap();
        writeln!(w).unwrap();
        write!(w, "| system |").unwrap();
        for label in &b.labels {
            write!(w, " {label} |").unwrap();
        }
        writeln!(w).unwrap();
        write!(w, "|---|").unwrap();
        for _ in &b.labels {
            write!(w, "---:|").unwrap();
        }
        writeln!(w).unwrap();
        for scores in bundle
            .bucket_scores
            .iter()
            .filter(|s| s.attribute == b.attribute)
        {
            write!(w, "| {} |", scores.system).unwrap();
            for cell in &scores.scores {
                match cell {
                    Some(score) => write!(w, " {} |", pct(score.f1)).unwrap(),
                    None => write!(w, " n/a |").unwrap(),
                }
            }
            writeln!(w).unwrap();
        }
        writeln!(w).unwrap();
    }

    writeln!(w, "## Model-wise measures").unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "Struck-through correlations belong to attributes that fail the significance gate below."
    )
    .unwrap();
    writeln!(w).unwrap();
    writeln!(w, "| system | attribute | Spearman | std. dev. |").unwrap();
    writeln!(w, "|---|---|---:|---:|").unwrap();
    for row in &bundle.model_wise {
        let significant = bundle.significant(row.attribute);
        let spearman = match row.spearman {
            Some(r) => strike_unless(significant, format_number(r)),
            None => "n/a".to_owned(),
        };
        writeln!(
            w,
            "| {} | {} | {} | {} |",
            row.system,
            row.attribute.as_str(),
            spearman,
            fmt_opt(row.std_dev)
        )
        .unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Attribute-wise measures").unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "| attribute | mean value | token-level mean | normalized | mean abs. correlation |"
    )
    .unwrap();
    writeln!(w, "|---|---:|---:|---:|---:|").unwrap();
    for row in &bundle.attribute_wise {
        writeln!(
            w,
            "| {} | {} | {} | {} | {} |",
            row.attribute.as_str(),
            format_number(row.zeta),
            fmt_opt(row.zeta_tokens),
            format_number(row.zeta_normalized),
            fmt_opt(row.rho)
        )
        .unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Significance").unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "Friedman test across systems over the buckets populated for every system."
    )
    .unwrap();
    writeln!(w).unwrap();
    writeln!(w, "| attribute | statistic | p | blocks | method | significant |").unwrap();
    writeln!(w, "|---|---:|---:|---:|---|---|").unwrap();
    for row in &bundle.significance {
        match &row.test {
            Some(test) => writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} |",
                row.attribute.as_str(),
                format_number(test.statistic),
                format_number(test.p_value),
                test.n,
                method_name(test),
                if row.significant { "yes" } else { "no" }
            )
            .unwrap(),
            None => writeln!(
                w,
                "| {} | n/a | n/a | n/a | n/a | no |",
                row.attribute.as_str()
            )
            .unwrap(),
        }
    }
    writeln!(w).unwrap();

    writeln!(w, "## Self-diagnosis").unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "| system | attribute | worst bucket | worst F1 | best bucket | best F1 | gap |"
    )
    .unwrap();
    writeln!(w, "|---|---|---|---:|---|---:|---:|").unwrap();
    for diag in &bundle.self_diagnosis {
        for entry in &diag.entries {
            let layout = bundle.buckets_for(entry.attribute);
            writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} | {} |",
                diag.system,
                entry.attribute.as_str(),
                tie_mark(&layout.labels[entry.worst_bucket], entry.tied_worst),
                pct(entry.worst_f1),
                tie_mark(&layout.labels[entry.best_bucket], entry.tied_best),
                pct(entry.best_f1),
                pct(entry.gap)
            )
            .unwrap();
        }
    }
    writeln!(w).unwrap();

    if let Some(cmp) = &bundle.comparative {
        writeln!(
            w,
            "## Comparative diagnosis: {} vs {}",
            cmp.system_a, cmp.system_b
        )
        .unwrap();
        writeln!(w).unwrap();
        writeln!(
            w,
            "Gaps are F1({}) minus F1({}) in percentage points. Struck-through gaps fail the paired sentence-level test.",
            cmp.system_a, cmp.system_b
        )
        .unwrap();
        writeln!(w).unwrap();
        writeln!(
            w,
            "| attribute | largest lead | gap | p | largest deficit | gap | p |"
        )
        .unwrap();
        writeln!(w, "|---|---|---:|---:|---|---:|---:|").unwrap();
        for entry in &cmp.entries {
            let layout = bundle.buckets_for(entry.attribute);
            let (max_p, max_sig) = highlight_test(cmp, entry.attribute, "max_gap");
            let (min_p, min_sig) = highlight_test(cmp, entry.attribute, "min_gap");
            writeln!(
                w,
                "| {} | {} | {} | {} | {} | {} | {} |",
                entry.attribute.as_str(),
                tie_mark(&layout.labels[entry.max_gap_bucket], entry.tied_max),
                strike_unless(max_sig, pct_signed(entry.max_gap)),
                max_p,
                tie_mark(&layout.labels[entry.min_gap_bucket], entry.tied_min),
                strike_unless(min_sig, pct_signed(entry.min_gap)),
                min_p
            )
            .unwrap();
        }
        writeln!(w).unwrap();
    }

    out
}

fn method_name(test: &TestResult) -> &'static str {
    use crate::stats::TestMethod::*;
    match test.method {
        Exact => "exact",
        Approximate => "approximate",
        AllZeroDifferences => "all-zero differences",
    }
}

fn highlight_test(cmp: &ComparativeSection, attr: AttributeId, kind: &str) -> (String, bool) {
    match cmp
        .tests
        .iter()
        .find(|t| t.attribute == attr && t.kind == kind)
    {
        Some(t) => (
            t.test
                .as_ref()
                .map(|r| format_number(r.p_value))
                .unwrap_or_else(|| "n/a".to_owned()),
            t.significant,
        ),
        None => ("n/a".to_owned(), false),
    }
}

// ---------------------------------------------------------------------------
// Chart data
// ---------------------------------------------------------------------------

/// Emits chart-ready data: the radar chart as JSON, the diagnosis bars and
/// the comparative heatmap as CSV. [`ChartKind::Heatmap`] requires a
/// comparative section.
pub fn emit_chart_data(bundle: &ReportBundle, kind: ChartKind) -> Result<String, ReportError> {
    match kind {
        ChartKind::Radar => {
            let axes: Vec<Value> = bundle
                .attribute_wise
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "attribute": row.attribute.as_str(),
                        "zeta": row.zeta,
                        "zeta_normalized": row.zeta_normalized,
                        "rho": row.rho,
                    })
                })
                .collect();
            let mut value = serde_json::json!({ "kind": "radar", "axes": axes });
            round_floats(&mut value);
            let mut text = serde_json::to_string_pretty(&value)?;
            text.push('\n');
            Ok(text)
        }
        ChartKind::DiagnosisBars => {
            let mut writer = csv_writer();
            writer.write_record([
                "system",
                "attribute",
                "worst_bucket",
                "worst_f1",
                "gap",
                "best_bucket",
                "best_f1",
            ])?;
            for diag in &bundle.self_diagnosis {
                for entry in &diag.entries {
                    let layout = bundle.buckets_for(entry.attribute);
                    writer.write_record([
                        diag.system.as_str(),
                        entry.attribute.as_str(),
                        layout.labels[entry.worst_bucket].as_str(),
                        &format_number(round_sig(entry.worst_f1, 6)),
                        &format_number(round_sig(entry.gap, 6)),
                        layout.labels[entry.best_bucket].as_str(),
                        &format_number(round_sig(entry.best_f1, 6)),
                    ])?;
                }
            }
            finish_csv(writer)
        }
        ChartKind::Heatmap => {
            let cmp = bundle
                .comparative
                .as_ref()
                .ok_or(ReportError::NoComparativeSection)?;
            let width = cmp
                .entries
                .iter()
                .map(|e| e.gaps.len())
                .max()
                .unwrap_or(0);
            let mut writer = csv_writer();
            let mut header = vec!["attribute".to_owned()];
            header.extend((1..=width).map(|k| format!("B{k}")));
            writer.write_record(&header)?;
            for entry in &cmp.entries {
                let mut record = vec![entry.attribute.as_str().to_owned()];
                for k in 0..width {
                    record.push(match entry.gaps.get(k).copied().flatten() {
                        Some(gap) => format_number(round_sig(gap, 6)),
                        None => String::new(),
                    });
                }
                writer.write_record(&record)?;
            }
            finish_csv(writer)
        }
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = writer
        .into_inner()
        .expect("flushing an in-memory CSV writer cannot fail");
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

// ---------------------------------------------------------------------------
// Merging
// ---------------------------------------------------------------------------

/// Averages several runs of the same experiment (typically training
/// restarts) into one bundle.
///
/// The runs must agree on systems, attributes, and bucket layouts. Scores
/// are averaged cell-wise over the runs where the cell is populated;
/// model-wise measures and diagnoses are recomputed from the averaged
/// scores; significance tests are dropped (they describe individual runs).
/// Input digests are unioned.
pub fn merge(bundles: &[ReportBundle]) -> Result<ReportBundle, ReportError> {
    let first = bundles.first().ok_or(ReportError::EmptyMerge)?;
    if bundles.len() == 1 {
        return Ok(first.clone());
    }
    for other in &bundles[1..] {
        let systems = |b: &ReportBundle| -> Vec<String> {
            b.overall.iter().map(|s| s.system.clone()).collect()
        };
        if systems(other) != systems(first) {
            return Err(ReportError::MergeMismatch("system lists differ".into()));
        }
        let layouts = |b: &ReportBundle| -> Vec<(AttributeId, Vec<String>)> {
            b.buckets
                .iter()
                .map(|x| (x.attribute, x.labels.clone()))
                .collect()
        };
        if layouts(other) != layouts(first) {
            return Err(ReportError::MergeMismatch(
                "bucket layouts differ (fit plans once and reuse them across runs)".into(),
            ));
        }
        if other.metadata.config.alpha != first.metadata.config.alpha
            || other.metadata.config.scheme != first.metadata.config.scheme
        {
            return Err(ReportError::MergeMismatch("configurations differ".into()));
        }
    }

    let mut metadata = first.metadata.clone();
    for other in &bundles[1..] {
        for (path, digest) in &other.metadata.inputs {
            metadata.inputs.insert(path.clone(), digest.clone());
        }
    }

    // Overall: average the rates, sum the counts.
    let overall: Vec<SystemScore> = first
        .overall
        .iter()
        .enumerate()
        .map(|(i, base)| {
            let n = bundles.len() as f64;
            let mut score = Prf {
                true_positives: 0,
                predicted: 0,
                gold: 0,
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
            };
            for b in bundles {
                let s = &b.overall[i].score;
                score.true_positives += s.true_positives;
                score.predicted += s.predicted;
                score.gold += s.gold;
                score.precision += s.precision / n;
                score.recall += s.recall / n;
                score.f1 += s.f1 / n;
            }
            SystemScore {
                system: base.system.clone(),
                score,
            }
        })
        .collect();

    // Bucket scores: average P/R/F1 over the runs where the cell is
    // populated; counts are summed over the same runs.
    let bucket_scores: Vec<SystemAttributeScores> = first
        .bucket_scores
        .iter()
        .enumerate()
        .map(|(idx, base)| {
            let scores: Vec<Option<BucketScore>> = (0..base.scores.len())
                .map(|k| {
                    let cells: Vec<BucketScore> = bundles
                        .iter()
                        .filter_map(|b| b.bucket_scores[idx].scores[k])
                        .collect();
                    if cells.is_empty() {
                        return None;
                    }
                    let n = cells.len() as f64;
                    Some(BucketScore {
                        gold: cells.iter().map(|c| c.gold).sum(),
                        predicted: cells.iter().map(|c| c.predicted).sum(),
                        gold_matched: cells.iter().map(|c| c.gold_matched).sum(),
                        pred_matched: cells.iter().map(|c| c.pred_matched).sum(),
                        precision: cells.iter().map(|c| c.precision).sum::<f64>() / n,
                        recall: cells.iter().map(|c| c.recall).sum::<f64>() / n,
                        f1: cells.iter().map(|c| c.f1).sum::<f64>() / n,
                    })
                })
                .collect();
            SystemAttributeScores {
                system: base.system.clone(),
                attribute: base.attribute,
                scores,
            }
        })
        .collect();

    // Model-wise: recompute from the averaged bucket F1s.
    let model_wise: Vec<ModelWiseRow> = bucket_scores
        .iter()
        .map(|row| {
            let mut ranks = Vec::new();
            let mut f1s = Vec::new();
            for (k, cell) in row.scores.iter().enumerate() {
                if let Some(score) = cell {
                    ranks.push((k + 1) as f64);
                    f1s.push(score.f1);
                }
            }
            ModelWiseRow {
                system: row.system.clone(),
                attribute: row.attribute,
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
        })
        .collect();

    // Attribute-wise: average zeta; recompute rho from the merged
    // model-wise rows; renormalize.
    let mut attribute_wise: Vec<AttributeWiseRow> = first
        .attribute_wise
        .iter()
        .enumerate()
        .map(|(idx, base)| {
            let n = bundles.len() as f64;
            let zeta = bundles
                .iter()
                .map(|b| b.attribute_wise[idx].zeta)
                .sum::<f64>()
                / n;
            let tokens: Vec<f64> = bundles
                .iter()
                .filter_map(|b| b.attribute_wise[idx].zeta_tokens)
                .collect();
            let rhos: Vec<f64> = model_wise
                .iter()
                .filter(|m| m.attribute == base.attribute)
                .filter_map(|m| m.spearman)
                .map(f64::abs)
                .collect();
            AttributeWiseRow {
                attribute: base.attribute,
                zeta,
                zeta_tokens: if tokens.is_empty() {
                    None
                } else {
                    Some(tokens.iter().sum::<f64>() / tokens.len() as f64)
                },
                zeta_normalized: 1.0,
                rho: if rhos.is_empty() {
                    None
                } else {
                    Some(rhos.iter().sum::<f64>() / rhos.len() as f64)
                },
            }
        })
        .collect();
    let max_zeta = attribute_wise
        .iter()
        .map(|r| r.zeta.abs())
        .fold(0.0_f64, f64::max);
    if max_zeta > 0.0 {
        for row in &mut attribute_wise {
            row.zeta_normalized = row.zeta / max_zeta;
        }
    }

    // Self-diagnosis: recompute extremes from the averaged scores.
    let mut self_diagnosis: Vec<SystemDiagnosis> = Vec::new();
    for system in first.overall.iter().map(|s| &s.system) {
        let mut entries = Vec::new();
        for layout in &first.buckets {
            let row = bucket_scores
                .iter()
                .find(|r| &r.system == system && r.attribute == layout.attribute);
            let Some(row) = row else { continue };
            let present: Vec<(usize, f64)> = row
                .scores
                .iter()
                .enumerate()
                .filter_map(|(k, c)| c.map(|s| (k, s.f1)))
                .collect();
            if present.is_empty() {
                continue;
            }
            let best = present
                .iter()
                .fold(present[0], |acc, &(k, v)| if v > acc.1 { (k, v) } else { acc });
            let worst = present
                .iter()
                .fold(present[0], |acc, &(k, v)| if v < acc.1 { (k, v) } else { acc });
            entries.push(SelfDiagnosis {
                attribute: layout.attribute,
                best_bucket: best.0,
                best_f1: best.1,
                worst_bucket: worst.0,
                worst_f1: worst.1,
                gap: best.1 - worst.1,
                tied_best: present.iter().filter(|(_, v)| *v == best.1).count() > 1,
                tied_worst: present.iter().filter(|(_, v)| *v == worst.1).count() > 1,
            });
        }
        self_diagnosis.push(SystemDiagnosis {
            system: system.clone(),
            entries,
        });
    }

    let significance = first
        .significance
        .iter()
        .map(|row| SignificanceRow {
            attribute: row.attribute,
            test: None,
            significant: false,
        })
        .collect();

    Ok(ReportBundle {
        schema_version: SCHEMA_VERSION,
        metadata,
        overall,
        buckets: first.buckets.clone(),
        bucket_scores,
        model_wise,
        attribute_wise,
        significance,
        self_diagnosis,
        comparative: None,
    })
}
