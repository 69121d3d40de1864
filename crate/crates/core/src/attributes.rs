//! Attribute functions over test spans and tokens.
//!
//! Eight attributes describe why an entity might be easy or hard:
//!
//! | id   | meaning                                              | unit   |
//! |------|------------------------------------------------------|--------|
//! | eLen | entity length in tokens                              | tokens |
//! | sLen | length of the containing sentence                    | tokens |
//! | eDen | gold entities in the sentence / sentence length      | ratio  |
//! | oDen | out-of-vocabulary tokens in the sentence / length    | ratio  |
//! | eCon | training label consistency of the entity surface     | ratio  |
//! | tCon | training label consistency of the token surface      | ratio  |
//! | eFre | training frequency of the entity surface             | ratio  |
//! | tFre | training frequency of the token surface              | ratio  |
//!
//! Consistency and frequency are fractions of matching items among the
//! training occurrences of the same surface form (consistency) or among all
//! training items (frequency); a surface never seen in training scores 0 on
//! both. Token-native attributes lift to spans as the unweighted mean over
//! the span's tokens. Density attributes always count *gold* entities, so a
//! predicted span's context is described by the same number as a gold span
//! in the same sentence.

use crate::corpus::{Corpus, CorpusRole, Span, SpanSource};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Identifier of one of the eight attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttributeId {
    #[serde(rename = "eDen")]
    EntityDensity,
    #[serde(rename = "oDen")]
    OovDensity,
    #[serde(rename = "sLen")]
    SentenceLength,
    #[serde(rename = "eCon")]
    EntityConsistency,
    #[serde(rename = "tCon")]
    TokenConsistency,
    #[serde(rename = "eFre")]
    EntityFrequency,
    #[serde(rename = "tFre")]
    TokenFrequency,
    #[serde(rename = "eLen")]
    EntityLength,
}

impl AttributeId {
    /// All eight attributes in report order.
    pub const ALL: [AttributeId; 8] = [
        AttributeId::EntityDensity,
        AttributeId::OovDensity,
        AttributeId::SentenceLength,
        AttributeId::EntityConsistency,
        AttributeId::TokenConsistency,
        AttributeId::EntityFrequency,
        AttributeId::TokenFrequency,
        AttributeId::EntityLength,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeId::EntityDensity => "eDen",
            AttributeId::OovDensity => "oDen",
            AttributeId::SentenceLength => "sLen",
            AttributeId::EntityConsistency => "eCon",
            AttributeId::TokenConsistency => "tCon",
            AttributeId::EntityFrequency => "eFre",
            AttributeId::TokenFrequency => "tFre",
            AttributeId::EntityLength => "eLen",
        }
    }

    pub fn parse(text: &str) -> Option<AttributeId> {
        AttributeId::ALL
            .iter()
            .copied()
            .find(|a| a.as_str().eq_ignore_ascii_case(text))
    }

    /// Ratio-valued attributes are bounded to `[0, 1]`; the two length
    /// attributes count tokens.
    pub fn is_ratio(self) -> bool {
        !matches!(self, AttributeId::EntityLength | AttributeId::SentenceLength)
    }

    /// Attributes that are meaningful for a single token (everything except
    /// the three that need a span: its length, and surface consistency /
    /// frequency of the whole span).
    pub fn applies_to_tokens(self) -> bool {
        !matches!(
            self,
            AttributeId::EntityLength | AttributeId::EntityConsistency | AttributeId::EntityFrequency
        )
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Occurrence counts for one surface form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceCounts {
    pub total: u64,
    /// Per-category counts; values sum to `total`.
    pub labels: BTreeMap<String, u64>,
}

impl SurfaceCounts {
    fn bump(&mut self, label: &str) {
        self.total += 1;
        *self.labels.entry(label.to_owned()).or_insert(0) += 1;
    }
}

/// Training-set counts backing the consistency, frequency, and vocabulary
/// attributes. Persistable as versioned JSON so repeated runs can skip the
/// counting pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingStats {
    pub version: u32,
    /// Whether surfaces were lowercased before counting (and are lowercased
    /// again on lookup).
    pub lowercase: bool,
    pub total_entities: u64,
    pub total_tokens: u64,
    /// Gold entity surfaces -> counts by entity category.
    pub entities: BTreeMap<String, SurfaceCounts>,
    /// Token surfaces -> counts by token-level category (the category of the
    /// covering gold span, or `O`).
    pub tokens: BTreeMap<String, SurfaceCounts>,
    /// All distinct token surfaces seen in training.
    pub vocabulary: BTreeSet<String>,
}

pub const STATS_VERSION: u32 = 1;

impl TrainingStats {
    /// Counts entity and token statistics over a training corpus.
    pub fn build(train: &Corpus, lowercase: bool) -> TrainingStats {
        debug_assert_eq!(train.role, CorpusRole::Train);
        let key = |surface: &str| -> String {
            if lowercase {
                surface.to_lowercase()
            } else {
                surface.to_owned()
            }
        };

        let mut stats = TrainingStats {
            version: STATS_VERSION,
            lowercase,
            total_entities: 0,
            total_tokens: 0,
            entities: BTreeMap::new(),
            tokens: BTreeMap::new(),
            vocabulary: BTreeSet::new(),
        };

        let spans = crate::corpus::extract_spans(train, SpanSource::Gold)
            .expect("gold extraction cannot fail");
        for span in &spans {
            stats.total_entities += 1;
            stats
                .entities
                .entry(key(&span.surface))
                .or_default()
                .bump(&span.label);
        }

        let token_labels = train
            .token_labels(SpanSource::Gold)
            .expect("gold extraction cannot fail");
        for (sentence, labels) in train.sentences.iter().zip(&token_labels) {
            for (token, label) in sentence.tokens.iter().zip(labels) {
                stats.total_tokens += 1;
                let k = key(&token.surface);
                stats.tokens.entry(k.clone()).or_default().bump(label);
                stats.vocabulary.insert(k);
            }
        }
        stats
    }

    fn lookup_key(&self, surface: &str) -> String {
        if self.lowercase {
            surface.to_lowercase()
        } else {
            surface.to_owned()
        }
    }

    pub fn in_vocabulary(&self, surface: &str) -> bool {
        self.vocabulary.contains(&self.lookup_key(surface))
    }

    /// Fraction of training occurrences of this entity surface that carry
    /// the given label; 0 for unseen surfaces.
    pub fn entity_consistency(&self, surface: &str, label: &str) -> f64 {
        match self.entities.get(&self.lookup_key(surface)) {
            Some(c) if c.total > 0 => {
                *c.labels.get(label).unwrap_or(&0) as f64 / c.total as f64
            }
            _ => 0.0,
        }
    }

    /// Fraction of all training entities with this surface; 0 if unseen.
    pub fn entity_frequency(&self, surface: &str) -> f64 {
        if self.total_entities == 0 {
            return 0.0;
        }
        match self.entities.get(&self.lookup_key(surface)) {
            Some(c) => c.total as f64 / self.total_entities as f64,
            None => 0.0,
        }
    }

    /// Fraction of training occurrences of this token surface whose
    /// token-level category is the given label; 0 for unseen surfaces.
    pub fn token_consistency(&self, surface: &str, label: &str) -> f64 {
        match self.tokens.get(&self.lookup_key(surface)) {
            Some(c) if c.total > 0 => {
                *c.labels.get(label).unwrap_or(&0) as f64 / c.total as f64
            }
            _ => 0.0,
        }
    }

    /// Fraction of all training tokens with this surface; 0 if unseen.
    pub fn token_frequency(&self, surface: &str) -> f64 {
        if self.total_tokens == 0 {
            return 0.0;
        }
        match self.tokens.get(&self.lookup_key(surface)) {
            Some(c) => c.total as f64 / self.total_tokens as f64,
            None => 0.0,
        }
    }
}

/// Precomputed per-sentence context for attribute evaluation over one test
/// corpus: gold entity counts and out-of-vocabulary token counts.
pub struct AttributeContext<'a> {
    pub corpus: &'a Corpus,
    pub stats: &'a TrainingStats,
    gold_entity_count: Vec<usize>,
    oov_count: Vec<usize>,
    gold_token_labels: Vec<Vec<String>>,
}

impl<'a> AttributeContext<'a> {
    pub fn new(corpus: &'a Corpus, stats: &'a TrainingStats) -> AttributeContext<'a> {
        let mut gold_entity_count = vec![0usize; corpus.sentences.len()];
        for span in crate::corpus::extract_spans(corpus, SpanSource::Gold)
            .expect("gold extraction cannot fail")
        {
            gold_entity_count[span.sentence_index] += 1;
        }
        let oov_count = corpus
            .sentences
            .iter()
            .map(|s| {
                s.tokens
                    .iter()
                    .filter(|t| !stats.in_vocabulary(&t.surface))
                    .count()
            })
            .collect();
        let gold_token_labels = corpus
            .token_labels(SpanSource::Gold)
            .expect("gold extraction cannot fail");
        AttributeContext {
            corpus,
            stats,
            gold_entity_count,
            oov_count,
            gold_token_labels,
        }
    }

    fn sentence_len(&self, sentence: usize) -> f64 {
        self.corpus.sentences[sentence].len() as f64
    }

    /// Gold entities in the sentence divided by its length.
    pub fn entity_density(&self, sentence: usize) -> f64 {
        self.gold_entity_count[sentence] as f64 / self.sentence_len(sentence)
    }

    /// Out-of-vocabulary tokens in the sentence divided by its length.
    pub fn oov_density(&self, sentence: usize) -> f64 {
        self.oov_count[sentence] as f64 / self.sentence_len(sentence)
    }

    /// Attribute value for a span. Token-native attributes (tCon, tFre) are
    /// the unweighted mean over the span's tokens; sentence-derived ones
    /// read the containing sentence.
    pub fn span_value(&self, span: &Span, attr: AttributeId) -> f64 {
        let tokens = || {
            self.corpus.sentences[span.sentence_index].tokens[span.start..span.end]
                .iter()
                .map(|t| t.surface.as_str())
        };
        match attr {
            AttributeId::EntityLength => (span.end - span.start) as f64,
            AttributeId::SentenceLength => self.sentence_len(span.sentence_index),
            AttributeId::EntityDensity => self.entity_density(span.sentence_index),
            AttributeId::OovDensity => self.oov_density(span.sentence_index),
            AttributeId::EntityConsistency => {
                self.stats.entity_consistency(&span.surface, &span.label)
            }
            AttributeId::EntityFrequency => self.stats.entity_frequency(&span.surface),
            AttributeId::TokenConsistency => {
                mean(tokens().map(|t| self.stats.token_consistency(t, &span.label)))
            }
            AttributeId::TokenFrequency => {
                mean(tokens().map(|t| self.stats.token_frequency(t)))
            }
        }
    }

    /// Attribute value for a single token, using its gold token-level label
    /// for consistency. `None` for span-native attributes.
    pub fn token_value(&self, sentence: usize, token: usize, attr: AttributeId) -> Option<f64> {
        if !attr.applies_to_tokens() {
            return None;
        }
        let surface = &self.corpus.sentences[sentence].tokens[token].surface;
        Some(match attr {
            AttributeId::SentenceLength => self.sentence_len(sentence),
            AttributeId::EntityDensity => self.entity_density(sentence),
            AttributeId::OovDensity => self.oov_density(sentence),
            AttributeId::TokenConsistency => self
                .stats
                .token_consistency(surface, &self.gold_token_labels[sentence][token]),
            AttributeId::TokenFrequency => self.stats.token_frequency(surface),
            _ => unreachable!(),
        })
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    debug_assert!(count > 0, "spans are never empty");
    sum / count as f64
}
