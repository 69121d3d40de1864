//! End-to-end orchestration: read the corpora, build (or reload) the
//! training statistics, bucket plans, and performance tensor, and assemble
//! the report bundle. This is the layer the command-line binary and the
//! C bindings call into.

use crate::analysis::{
    attribute_friedman, attribute_rho, attribute_zeta, attribute_zeta_tokens, build_tensor,
    comparative_diagnose, model_wise, self_diagnose, AnalysisError, PerformanceTensor,
    TENSOR_VERSION,
};
use crate::attributes::{AttributeContext, AttributeId, TrainingStats, STATS_VERSION};
use crate::bucketing::{BucketConfig, PlanSet, PLAN_VERSION};
use crate::corpus::{
    extract_spans, parse_conll, ColumnSpec, Corpus, CorpusError, CorpusRole, Scheme, Span,
    SpanSource,
};
use crate::metrics::micro_f1;
use crate::report::{
    AttributeBuckets, AttributeWiseRow, ComparativeSection, ConfigEcho, HighlightTest, Metadata,
    ModelWiseRow, ReportBundle, ReportError, SignificanceRow, SystemAttributeScores,
    SystemDiagnosis, SystemScore, SCHEMA_VERSION,
};
use crate::stats::wilcoxon_signed_rank;
use sha2::{Digest, Sha256};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Where one system's predictions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictionSource {
    /// A column of the test file (0-based).
    Column(usize),
    /// A separate file aligned with the test file, last column read as the
    /// predicted tag.
    File(PathBuf),
}

/// Everything one run needs. Paths for the optional artifacts
/// (`stats_path`, `plan_path`, `tensor_path`) are read when the file exists
/// and written otherwise, so repeated runs can share fitted state.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: PathBuf,
    pub test: PathBuf,
    /// `(system name, source)` in report order.
    pub predictions: Vec<(String, PredictionSource)>,
    pub scheme: Scheme,
    pub attributes: Vec<AttributeId>,
    pub buckets: BucketConfig,
    /// Significance level for every test in the report.
    pub alpha: f64,
    pub stats_path: Option<PathBuf>,
    pub plan_path: Option<PathBuf>,
    pub tensor_path: Option<PathBuf>,
    /// Lowercase surfaces before frequency/consistency lookups.
    pub lowercase: bool,
}

impl RunConfig {
    pub fn new(train: impl Into<PathBuf>, test: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            train: train.into(),
            test: test.into(),
            predictions: Vec::new(),
            scheme: Scheme::Bio,
            attributes: AttributeId::ALL.to_vec(),
            buckets: BucketConfig::default(),
            alpha: 0.05,
            stats_path: None,
            plan_path: None,
            tensor_path: None,
            lowercase: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: CorpusError,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("artifact {path} cannot be used: {message}")]
    Artifact { path: PathBuf, message: String },
}

/// The result of a run: the assembled report plus the tensor it was built
/// from, and any non-fatal notes collected along the way.
#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub bundle: ReportBundle,
    pub tensor: PerformanceTensor,
    pub warnings: Vec<String>,
}

/// Runs the full analysis: corpora in, report bundle out.
pub fn run_analyze(cfg: &RunConfig) -> Result<AnalysisOutput, PipelineError> {
    let mut prep = prepare(cfg)?;
    let (bundle, tensor) = analyze(cfg, &mut prep)?;
    Ok(AnalysisOutput {
        bundle,
        tensor,
        warnings: prep.warnings,
    })
}

/// Runs the full analysis and adds a comparative section for systems `a`
/// and `b`, including a paired sentence-level test on each highlighted
/// bucket.
pub fn run_compare(cfg: &RunConfig, a: &str, b: &str) -> Result<AnalysisOutput, PipelineError> {
    let mut prep = prepare(cfg)?;
    let (mut bundle, tensor) = analyze(cfg, &mut prep)?;
    bundle.comparative = Some(comparative(cfg, &prep, &tensor, a, b)?);
    Ok(AnalysisOutput {
        bundle,
        tensor,
        warnings: prep.warnings,
    })
}

/// Fits (or reloads) the bucket plans and describes them as plain text, one
/// attribute per paragraph.
pub fn run_buckets(cfg: &RunConfig) -> Result<String, PipelineError> {
    let mut prep = prepare(cfg)?;
    let tensor = tensor_for(cfg, &mut prep)?;
    let mut out = String::new();
    for axis in &tensor.axes {
        let plan = &axis.plan;
        out.push_str(&format!(
            "{} ({}): {} buckets{}\n",
            axis.attribute.as_str(),
            plan.strategy.as_str(),
            plan.len(),
            if plan.reduced { ", reduced" } else { "" }
        ));
        for k in 0..plan.len() {
            out.push_str(&format!(
                "  {:<4} {:<16} {} gold spans\n",
                plan.labels[k],
                plan.display_interval(k),
                axis.gold_population[k]
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Internals
// ---------------------------------------------------------------------------

struct Prepared {
    stats: TrainingStats,
    test: Corpus,
    inputs: BTreeMap<String, String>,
    warnings: Vec<String>,
}

fn validate(cfg: &RunConfig) -> Result<(), PipelineError> {
    if cfg.attributes.is_empty() {
        return Err(PipelineError::Config("no attributes selected".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(PipelineError::Config(format!(
            "alpha must lie strictly between 0 and 1, got {}",
            cfg.alpha
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (name, _) in &cfg.predictions {
        if name.is_empty() {
            return Err(PipelineError::Config("empty system name".into()));
        }
        if !seen.insert(name) {
            return Err(PipelineError::Config(format!(
                "system '{name}' is listed twice"
            )));
        }
    }
    let mut dedup = std::collections::BTreeSet::new();
    for attr in &cfg.attributes {
        if !dedup.insert(attr) {
            return Err(PipelineError::Config(format!(
                "attribute '{}' is listed twice",
                attr.as_str()
            )));
        }
    }
    Ok(())
}

fn read_file(path: &Path, inputs: &mut BTreeMap<String, String>) -> Result<String, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Read {
        path: path.to_owned(),
        source,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    inputs.insert(
        path.to_string_lossy().into_owned(),
        format!("{:x}", hasher.finalize()),
    );
    Ok(text)
}

fn load_artifact<T: DeserializeOwned>(
    path: &Path,
    inputs: &mut BTreeMap<String, String>,
) -> Result<T, PipelineError> {
    let text = read_file(path, inputs)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Artifact {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

fn save_artifact<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize to JSON");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| PipelineError::Write {
        path: path.to_owned(),
        source,
    })
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, PipelineError> {
    validate(cfg)?;
    let mut inputs = BTreeMap::new();
    let mut warnings = Vec::new();

    // Training statistics: reload the artifact when present, otherwise
    // count from the training file (and persist if a path was given).
    let stats = match &cfg.stats_path {
        Some(path) if path.exists() => {
            let stats: TrainingStats = load_artifact(path, &mut inputs)?;
            if stats.version != STATS_VERSION {
                return Err(PipelineError::Artifact {
                    path: path.clone(),
                    message: format!(
                        "statistics version {} is not the supported version {}",
                        stats.version, STATS_VERSION
                    ),
                });
            }
            if stats.lowercase != cfg.lowercase {
                return Err(PipelineError::Artifact {
                    path: path.clone(),
                    message: format!(
                        "statistics were counted with lowercase={} but the run wants lowercase={}",
                        stats.lowercase, cfg.lowercase
                    ),
                });
            }
            stats
        }
        maybe_path => {
            let text = read_file(&cfg.train, &mut inputs)?;
            let train = parse_conll(&text, &ColumnSpec::simple(cfg.scheme), CorpusRole::Train)
                .map_err(|source| PipelineError::Parse {
                    path: cfg.train.clone(),
                    source,
                })?;
            let stats = TrainingStats::build(&train, cfg.lowercase);
            if let Some(path) = maybe_path {
                save_artifact(path, &stats)?;
            }
            stats
        }
    };

    // Test corpus: column-sourced systems parse with the file, file-sourced
    // systems attach afterwards (column systems therefore come first in the
    // report when the two kinds are mixed).
    let spec = ColumnSpec {
        token_column: 0,
        gold_column: 1,
        prediction_columns: cfg
            .predictions
            .iter()
            .filter_map(|(name, source)| match source {
                PredictionSource::Column(idx) => Some((name.clone(), *idx)),
                PredictionSource::File(_) => None,
            })
            .collect(),
        scheme: cfg.scheme,
    };
    let text = read_file(&cfg.test, &mut inputs)?;
    let mut test =
        parse_conll(&text, &spec, CorpusRole::Test).map_err(|source| PipelineError::Parse {
            path: cfg.test.clone(),
            source,
        })?;
    for (name, source) in &cfg.predictions {
        if let PredictionSource::File(path) = source {
            let text = read_file(path, &mut inputs)?;
            test.attach_prediction_file(name, &text)
                .map_err(|source| PipelineError::Parse {
                    path: path.clone(),
                    source,
                })?;
        }
    }
    for name in &test.systems {
        let spans = extract_spans(&test, SpanSource::System(name))
            .expect("system names come from the corpus");
        if spans.is_empty() {
            warnings.push(format!("system '{name}' predicts no spans"));
        }
    }

    Ok(Prepared {
        stats,
        test,
        inputs,
        warnings,
    })
}

/// Builds the tensor, honoring the plan and tensor artifacts.
fn tensor_for(
    cfg: &RunConfig,
    prep: &mut Prepared,
) -> Result<PerformanceTensor, PipelineError> {
    if let Some(path) = &cfg.tensor_path {
        if path.exists() {
            let tensor: PerformanceTensor = load_artifact(path, &mut prep.inputs)?;
            if tensor.version != TENSOR_VERSION {
                return Err(PipelineError::Artifact {
                    path: path.clone(),
                    message: format!(
                        "tensor version {} is not the supported version {}",
                        tensor.version, TENSOR_VERSION
                    ),
                });
            }
            if tensor.systems != prep.test.systems {
                return Err(PipelineError::Artifact {
                    path: path.clone(),
                    message: "tensor systems do not match the configured predictions".into(),
                });
            }
            if tensor.attributes != cfg.attributes {
                return Err(PipelineError::Artifact {
                    path: path.clone(),
                    message: "tensor attributes do not match the configured attributes".into(),
                });
            }
            return Ok(tensor);
        }
    }

    let plans: Option<PlanSet> = match &cfg.plan_path {
        Some(path) if path.exists() => {
            let set: PlanSet = load_artifact(path, &mut prep.inputs)?;
            if set.version != PLAN_VERSION {
                return Err(PipelineError::Artifact {
                    path: path.clone(),
                    message: format!(
                        "plan version {} is not the supported version {}",
                        set.version, PLAN_VERSION
                    ),
                });
            }
            Some(set)
        }
        _ => None,
    };

    let ctx = AttributeContext::new(&prep.test, &prep.stats);
    let tensor = build_tensor(
        &prep.test,
        &ctx,
        &cfg.attributes,
        &cfg.buckets,
        plans.as_ref(),
    )?;
    for axis in &tensor.axes {
        if axis.plan.reduced {
            prep.warnings.push(format!(
                "attribute {} produced {} buckets instead of the requested count \
                 (not enough distinct values)",
                axis.attribute.as_str(),
                axis.plan.len()
            ));
        }
    }

    if let Some(path) = &cfg.plan_path {
        if !path.exists() {
            let set = PlanSet {
                version: PLAN_VERSION,
                plans: tensor
                    .axes
                    .iter()
                    .map(|axis| (axis.attribute, axis.plan.clone()))
                    .collect(),
            };
            save_artifact(path, &set)?;
        }
    }
    if let Some(path) = &cfg.tensor_path {
        save_artifact(path, &tensor)?;
    }
    Ok(tensor)
}

fn analyze(
    cfg: &RunConfig,
    prep: &mut Prepared,
) -> Result<(ReportBundle, PerformanceTensor), PipelineError> {
    let tensor = tensor_for(cfg, prep)?;
    let ctx = AttributeContext::new(&prep.test, &prep.stats);
    let gold = extract_spans(&prep.test, SpanSource::Gold).expect("gold spans always extract");

    let overall: Vec<SystemScore> = tensor
        .systems
        .iter()
        .zip(&tensor.overall)
        .map(|(system, score)| SystemScore {
            system: system.clone(),
            score: *score,
        })
        .collect();

    let buckets: Vec<AttributeBuckets> = tensor
        .axes
        .iter()
        .map(|axis| AttributeBuckets {
            attribute: axis.attribute,
            strategy: axis.plan.strategy.as_str().to_owned(),
            labels: axis.plan.labels.clone(),
            intervals: (0..axis.plan.len())
                .map(|k| axis.plan.display_interval(k))
                .collect(),
            gold_population: axis.gold_population.clone(),
            reduced: axis.plan.reduced,
        })
        .collect();

    let mut bucket_scores = Vec::new();
    let mut model_rows = Vec::new();
    for (i, system) in tensor.systems.iter().enumerate() {
        for (j, &attribute) in tensor.attributes.iter().enumerate() {
            bucket_scores.push(SystemAttributeScores {
                system: system.clone(),
                attribute,
                scores: tensor.cells[i][j].clone(),
            });
            let mw = model_wise(&tensor, i, j);
            model_rows.push(ModelWiseRow {
                system: system.clone(),
                attribute,
                spearman: mw.spearman,
                std_dev: mw.std_dev,
            });
        }
    }

    let attribute_wise: Vec<AttributeWiseRow> = tensor
        .attributes
        .iter()
        .enumerate()
        .map(|(j, &attribute)| AttributeWiseRow {
            attribute,
            zeta: attribute_zeta(&gold, attribute, &ctx),
            zeta_tokens: attribute_zeta_tokens(&ctx, attribute),
            // Normalization is relative to the largest mean across the
            // reports being combined; a single run is its own maximum.
            zeta_normalized: 1.0,
            rho: attribute_rho(&tensor, j),
        })
        .collect();

    let significance: Vec<SignificanceRow> = tensor
        .attributes
        .iter()
        .enumerate()
        .map(|(j, &attribute)| {
            let test = attribute_friedman(&tensor, j);
            let significant = test
                .as_ref()
                .map(|t| t.p_value < cfg.alpha)
                .unwrap_or(false);
            SignificanceRow {
                attribute,
                test,
                significant,
            }
        })
        .collect();

    let self_diagnosis: Vec<SystemDiagnosis> = tensor
        .systems
        .iter()
        .map(|system| SystemDiagnosis {
            system: system.clone(),
            entries: self_diagnose(&tensor, system).expect("system names come from the tensor"),
        })
        .collect();

    let bundle = ReportBundle {
        schema_version: SCHEMA_VERSION,
        metadata: Metadata {
            tool: "nerdiag".to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            inputs: prep.inputs.clone(),
            config: ConfigEcho {
                scheme: cfg.scheme.as_str().to_owned(),
                attributes: cfg.attributes.clone(),
                alpha: cfg.alpha,
                lowercase: cfg.lowercase,
                buckets_default: cfg.buckets.default_m,
                bucket_overrides: cfg.buckets.per_attribute.clone(),
            },
        },
        overall,
        buckets,
        bucket_scores,
        model_wise: model_rows,
        attribute_wise,
        significance,
        self_diagnosis,
        comparative: None,
    };
    Ok((bundle, tensor))
}

/// Builds the comparative section: diagnosis entries plus a Wilcoxon
/// signed-rank test over per-sentence F1 pairs within each highlighted
/// bucket.
fn comparative(
    cfg: &RunConfig,
    prep: &Prepared,
    tensor: &PerformanceTensor,
    a: &str,
    b: &str,
) -> Result<ComparativeSection, PipelineError> {
    let comparison = comparative_diagnose(tensor, a, b)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let ctx = AttributeContext::new(&prep.test, &prep.stats);
    let gold = extract_spans(&prep.test, SpanSource::Gold).expect("gold spans always extract");
    let preds_a = extract_spans(&prep.test, SpanSource::System(a))
        .expect("system checked by comparative_diagnose");
    let preds_b = extract_spans(&prep.test, SpanSource::System(b))
        .expect("system checked by comparative_diagnose");

    let mut tests = Vec::new();
    for entry in &comparison.entries {
        let j = tensor
            .attribute_index(entry.attribute)
            .expect("entry attributes come from the tensor");
        let plan = &tensor.axes[j].plan;
        let assign =
            |spans: &[Span]| -> Vec<usize> {
                spans
                    .iter()
                    .map(|s| plan.assign(ctx.span_value(s, entry.attribute)))
                    .collect()
            };
        let gold_assign = assign(&gold);
        let a_assign = assign(&preds_a);
        let b_assign = assign(&preds_b);
        for (kind, bucket) in [
            ("max_gap", entry.max_gap_bucket),
            ("min_gap", entry.min_gap_bucket),
        ] {
            let pairs = sentence_pairs(
                prep.test.sentences.len(),
                bucket,
                (&gold, &gold_assign),
                (&preds_a, &a_assign),
                (&preds_b, &b_assign),
            );
            let test = if pairs.is_empty() {
                None
            } else {
                wilcoxon_signed_rank(&pairs).ok()
            };
            let significant = test
                .as_ref()
                .map(|t| t.p_value < cfg.alpha)
                .unwrap_or(false);
            tests.push(HighlightTest {
                attribute: entry.attribute,
                bucket,
                kind: kind.to_owned(),
                test,
                significant,
            });
        }
    }

    Ok(ComparativeSection {
        system_a: comparison.system_a,
        system_b: comparison.system_b,
        entries: comparison.entries,
        tests,
    })
}

/// Per-sentence F1 pairs of two systems, restricted to spans assigned to
/// one bucket. Sentences where neither gold nor either system has a span in
/// the bucket are skipped.
fn sentence_pairs(
    sentence_count: usize,
    bucket: usize,
    gold: (&[Span], &[usize]),
    a: (&[Span], &[usize]),
    b: (&[Span], &[usize]),
) -> Vec<(f64, f64)> {
    let select = |(spans, assign): (&[Span], &[usize]), sentence: usize| -> Vec<Span> {
        spans
            .iter()
            .zip(assign)
            .filter(|(span, &k)| span.sentence_index == sentence && k == bucket)
            .map(|(span, _)| span.clone())
            .collect()
    };
    let mut pairs = Vec::new();
    for sentence in 0..sentence_count {
        let g = select(gold, sentence);
        let sa = select(a, sentence);
        let sb = select(b, sentence);
        if g.is_empty() && sa.is_empty() && sb.is_empty() {
            continue;
        }
        pairs.push((micro_f1(&g, &sa).f1, micro_f1(&g, &sb).f1));
    }
    pairs
}
