//! Column-format corpora and entity-span decoding.
//!
//! Input files follow the whitespace-separated column convention used by
//! sequence-labeling shared tasks: one token per line, columns separated by
//! runs of spaces or tabs, blank lines between sentences, and tags written as
//! `PREFIX-CATEGORY` (or a bare `O`). Lines starting with `-DOCSTART-` are
//! document markers and are skipped.
//!
//! Decoding is deliberately lenient: real system output contains malformed
//! transitions (an `I-X` with nothing open, a run that never sees its `E-X`,
//! ...), and rejecting those would bias every downstream score. Malformed
//! sequences are repaired on the fly and never produce an error.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Errors raised while parsing or combining corpora.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: expected at least {required} columns, found {found}")]
    RaggedRow {
        line: usize,
        required: usize,
        found: usize,
    },
    #[error("line {line}: malformed tag `{text}`")]
    BadTag { line: usize, text: String },
    #[error("input contains no sentences")]
    EmptyCorpus,
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("system `{0}` registered twice")]
    DuplicateSystem(String),
    #[error("column {0} used more than once in the column layout")]
    DuplicateColumn(usize),
    #[error(
        "prediction input does not align with the test corpus at line {line}: \
         expected `{expected}`, found `{found}`"
    )]
    AlignmentMismatch {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("a training corpus cannot carry prediction columns")]
    TrainWithPredictions,
}

/// Tagging scheme declared for a corpus file.
///
/// The scheme is an input declaration, never sniffed from the data: a BIO
/// file that happens to contain no `I` tags is indistinguishable from a
/// BIOES file with no multi-token entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Bio,
    Bioes,
}

impl Scheme {
    pub fn parse(text: &str) -> Option<Scheme> {
        match text.to_ascii_lowercase().as_str() {
            "bio" => Some(Scheme::Bio),
            "bioes" => Some(Scheme::Bioes),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Bio => "bio",
            Scheme::Bioes => "bioes",
        }
    }
}

/// Positional prefix of a tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TagPrefix {
    B,
    I,
    O,
    E,
    S,
}

/// A single column tag: a positional prefix plus an entity category.
///
/// The category is empty if and only if the prefix is `O`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag {
    prefix: TagPrefix,
    category: String,
}

impl Tag {
    /// The `O` (outside) tag.
    pub fn outside() -> Tag {
        Tag {
            prefix: TagPrefix::O,
            category: String::new(),
        }
    }

    /// A labeled tag. Returns `None` when the category is empty or the
    /// prefix is `O` (use [`Tag::outside`] for that).
    pub fn labeled(prefix: TagPrefix, category: &str) -> Option<Tag> {
        if category.is_empty() || prefix == TagPrefix::O {
            return None;
        }
        Some(Tag {
            prefix,
            category: category.to_owned(),
        })
    }

    /// Parses `O` or `PREFIX-CATEGORY`. Anything else is `None`.
    pub fn parse(text: &str) -> Option<Tag> {
        if text == "O" {
            return Some(Tag::outside());
        }
        let (prefix, category) = text.split_once('-')?;
        let prefix = match prefix {
            "B" => TagPrefix::B,
            "I" => TagPrefix::I,
            "E" => TagPrefix::E,
            "S" => TagPrefix::S,
            _ => return None,
        };
        Tag::labeled(prefix, category)
    }

    pub fn prefix(&self) -> TagPrefix {
        self.prefix
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn is_outside(&self) -> bool {
        self.prefix == TagPrefix::O
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prefix {
            TagPrefix::O => f.write_str("O"),
            TagPrefix::B => write!(f, "B-{}", self.category),
            TagPrefix::I => write!(f, "I-{}", self.category),
            TagPrefix::E => write!(f, "E-{}", self.category),
            TagPrefix::S => write!(f, "S-{}", self.category),
        }
    }
}

/// One token of a sentence: its surface form, gold tag, and one predicted
/// tag per registered system (in corpus system order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub gold: Tag,
    pub predictions: Vec<Tag>,
}

/// A non-empty token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Whether a corpus provides training counts or is under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusRole {
    Train,
    Test,
}

/// An entity span: token interval `[start, end)` within one sentence.
///
/// `surface` is the space-joined surface of the covered tokens; `label` is
/// the gold category for gold spans and the predicted category for system
/// spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub surface: String,
}

impl Span {
    /// Number of tokens covered.
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Identity used for exact matching: position and label, not surface.
    pub fn key(&self) -> (usize, usize, usize, &str) {
        (self.sentence_index, self.start, self.end, &self.label)
    }
}

/// A decoded span without its sentence context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanFragment {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Where to read labels from when extracting spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanSource<'a> {
    Gold,
    System(&'a str),
}

/// A parsed corpus: sentences plus the names of any prediction systems.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub systems: Vec<String>,
    pub role: CorpusRole,
    pub scheme: Scheme,
}

/// Which columns of a file hold what.
///
/// Column indices are zero-based positions after whitespace splitting and
/// must be pairwise distinct.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub token_column: usize,
    pub gold_column: usize,
    /// `(system name, column index)` pairs for inline prediction columns.
    pub prediction_columns: Vec<(String, usize)>,
    pub scheme: Scheme,
}

impl ColumnSpec {
    /// Two-column layout (`token gold`) with no inline predictions.
    pub fn simple(scheme: Scheme) -> ColumnSpec {
        ColumnSpec {
            token_column: 0,
            gold_column: 1,
            prediction_columns: Vec::new(),
            scheme,
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = vec![self.token_column, self.gold_column];
        seen.extend(self.prediction_columns.iter().map(|(_, c)| *c));
        seen.sort_unstable();
        for pair in seen.windows(2) {
            if pair[0] == pair[1] {
                return Err(CorpusError::DuplicateColumn(pair[0]));
            }
        }
        Ok(())
    }

    fn required_columns(&self) -> usize {
        let mut max = self.token_column.max(self.gold_column);
        for (_, c) in &self.prediction_columns {
            max = max.max(*c);
        }
        max + 1
    }
}

impl Corpus {
    /// Builds a corpus directly from sentences, validating the invariants
    /// that [`parse_conll`] guarantees. Intended for programmatic
    /// construction in simulations and tests.
    pub fn from_sentences(
        role: CorpusRole,
        scheme: Scheme,
        systems: Vec<String>,
        mut sentences: Vec<Sentence>,
    ) -> Result<Corpus, CorpusError> {
        if role == CorpusRole::Train && !systems.is_empty() {
            return Err(CorpusError::TrainWithPredictions);
        }
        sentences.retain(|s| !s.is_empty());
        if sentences.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        for (i, sentence) in sentences.iter_mut().enumerate() {
            sentence.index = i;
            for token in &sentence.tokens {
                assert_eq!(
                    token.predictions.len(),
                    systems.len(),
                    "every token must carry one prediction per system"
                );
            }
        }
        let mut sorted = systems.clone();
        sorted.sort();
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(CorpusError::DuplicateSystem(pair[0].clone()));
            }
        }
        Ok(Corpus {
            sentences,
            systems,
            role,
            scheme,
        })
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn system_index(&self, name: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == name)
    }

    /// Attaches a single-system prediction file to this corpus.
    ///
    /// The file must mirror the corpus sentence-by-sentence and line-by-line.
    /// The last column of each line is the predicted tag; when a line has two
    /// or more columns the first must repeat the token surface, and any
    /// mismatch is an alignment error rather than a silent misalignment.
    pub fn attach_prediction_file(&mut self, name: &str, text: &str) -> Result<(), CorpusError> {
        if self.systems.iter().any(|s| s == name) {
            return Err(CorpusError::DuplicateSystem(name.to_owned()));
        }
        let mut sentence_iter = self.sentences.iter().enumerate();
        let mut current: Option<(usize, usize)> = None; // (sentence, next token)
        let mut tags: Vec<Vec<Tag>> = vec![Vec::new(); self.sentences.len()];

        for (line_no, raw) in text.lines().enumerate() {
            let line_no = line_no + 1;
            let line = raw.trim_end_matches('\r');
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.is_empty() {
                if let Some((s, next)) = current {
                    if next < self.sentences[s].len() {
                        return Err(CorpusError::AlignmentMismatch {
                            line: line_no,
                            expected: self.sentences[s].tokens[next].surface.clone(),
                            found: "<end of sentence>".to_owned(),
                        });
                    }
                    current = None;
                }
                continue;
            }
            if cols[0].starts_with("-DOCSTART-") {
                continue;
            }
            let (s, next) = match current {
                Some(state) => state,
                None => match sentence_iter.next() {
                    Some((s, _)) => (s, 0),
                    None => {
                        return Err(CorpusError::AlignmentMismatch {
                            line: line_no,
                            expected: "<end of corpus>".to_owned(),
                            found: cols[0].to_owned(),
                        })
                    }
                },
            };
            if next >= self.sentences[s].len() {
                return Err(CorpusError::AlignmentMismatch {
                    line: line_no,
                    expected: "<end of sentence>".to_owned(),
                    found: cols[0].to_owned(),
                });
            }
            if cols.len() >= 2 && cols[0] != self.sentences[s].tokens[next].surface {
                return Err(CorpusError::AlignmentMismatch {
                    line: line_no,
                    expected: self.sentences[s].tokens[next].surface.clone(),
                    found: cols[0].to_owned(),
                });
            }
            let tag_text = cols[cols.len() - 1];
            let tag = Tag::parse(tag_text).ok_or_else(|| CorpusError::BadTag {
                line: line_no,
                text: tag_text.to_owned(),
            })?;
            tags[s].push(tag);
            current = Some((s, next + 1));
        }
        if let Some((s, next)) = current {
            if next < self.sentences[s].len() {
                return Err(CorpusError::AlignmentMismatch {
                    line: text.lines().count() + 1,
                    expected: self.sentences[s].tokens[next].surface.clone(),
                    found: "<end of input>".to_owned(),
                });
            }
        }
        if let Some((s, _)) = sentence_iter.next() {
            return Err(CorpusError::AlignmentMismatch {
                line: text.lines().count() + 1,
                expected: self.sentences[s].tokens[0].surface.clone(),
                found: "<end of input>".to_owned(),
            });
        }

        for (sentence, sentence_tags) in self.sentences.iter_mut().zip(tags) {
            debug_assert_eq!(sentence.len(), sentence_tags.len());
            for (token, tag) in sentence.tokens.iter_mut().zip(sentence_tags) {
                token.predictions.push(tag);
            }
        }
        self.systems.push(name.to_owned());
        Ok(())
    }

    /// Per-token category labels from the given source: the category of the
    /// covering span, or `"O"` for tokens outside every span.
    pub fn token_labels(&self, source: SpanSource<'_>) -> Result<Vec<Vec<String>>, CorpusError> {
        let spans = extract_spans(self, source)?;
        let mut labels: Vec<Vec<String>> = self
            .sentences
            .iter()
            .map(|s| vec!["O".to_owned(); s.len()])
            .collect();
        for span in spans {
            for pos in span.start..span.end {
                labels[span.sentence_index][pos] = span.label.clone();
            }
        }
        Ok(labels)
    }
}

/// Parses a whitespace-column file into a corpus.
///
/// Blank lines (including whitespace-only lines) separate sentences; runs of
/// blank lines collapse. The declared role decides whether prediction
/// columns are allowed: training corpora never carry predictions.
pub fn parse_conll(text: &str, spec: &ColumnSpec, role: CorpusRole) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    if role == CorpusRole::Train && !spec.prediction_columns.is_empty() {
        return Err(CorpusError::TrainWithPredictions);
    }
    let required = spec.required_columns();
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();

    let flush = |tokens: &mut Vec<Token>, sentences: &mut Vec<Sentence>| {
        if !tokens.is_empty() {
            sentences.push(Sentence {
                index: sentences.len(),
                tokens: std::mem::take(tokens),
            });
        }
    };

    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim_end_matches('\r');
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            flush(&mut tokens, &mut sentences);
            continue;
        }
        if cols[0].starts_with("-DOCSTART-") {
            flush(&mut tokens, &mut sentences);
            continue;
        }
        if cols.len() < required {
            return Err(CorpusError::RaggedRow {
                line: line_no,
                required,
                found: cols.len(),
            });
        }
        let parse_tag = |idx: usize| -> Result<Tag, CorpusError> {
            Tag::parse(cols[idx]).ok_or_else(|| CorpusError::BadTag {
                line: line_no,
                text: cols[idx].to_owned(),
            })
        };
        let gold = parse_tag(spec.gold_column)?;
        let mut predictions = Vec::with_capacity(spec.prediction_columns.len());
        for (_, col) in &spec.prediction_columns {
            predictions.push(parse_tag(*col)?);
        }
        tokens.push(Token {
            surface: cols[spec.token_column].to_owned(),
            gold,
            predictions,
        });
    }
    flush(&mut tokens, &mut sentences);

    if sentences.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus {
        sentences,
        systems: spec
            .prediction_columns
            .iter()
            .map(|(name, _)| name.clone())
            .collect(),
        role,
        scheme: spec.scheme,
    })
}

/// Decodes a tag sequence into entity spans, repairing malformed input.
///
/// Shared rules: `B-X` always starts a span (closing any open one), `I-X`
/// continues an open span of category `X` and otherwise starts a new one,
/// and `O` closes. A span still open at the end of the sentence is closed
/// there. Under BIOES, `S-X` is a singleton and `E-X` closes a matching open
/// span (or stands alone as a singleton). Under BIO, where `S`/`E` are not
/// part of the scheme, they are read as the nearest legal tag (`S` as `B`,
/// `E` as `I`).
pub fn decode_spans(tags: &[Tag], scheme: Scheme) -> Vec<SpanFragment> {
    let mut spans = Vec::new();
    // (start, category) of the currently open span.
    let mut open: Option<(usize, String)> = None;

    let close = |open: &mut Option<(usize, String)>, end: usize, spans: &mut Vec<SpanFragment>| {
        if let Some((start, label)) = open.take() {
            spans.push(SpanFragment { start, end, label });
        }
    };

    for (pos, tag) in tags.iter().enumerate() {
        let prefix = match (scheme, tag.prefix()) {
            (Scheme::Bio, TagPrefix::S) => TagPrefix::B,
            (Scheme::Bio, TagPrefix::E) => TagPrefix::I,
            (_, p) => p,
        };
        match prefix {
            TagPrefix::O => close(&mut open, pos, &mut spans),
            TagPrefix::B => {
                close(&mut open, pos, &mut spans);
                open = Some((pos, tag.category().to_owned()));
            }
            TagPrefix::S => {
                close(&mut open, pos, &mut spans);
                spans.push(SpanFragment {
                    start: pos,
                    end: pos + 1,
                    label: tag.category().to_owned(),
                });
            }
            TagPrefix::I => match &open {
                Some((_, label)) if label == tag.category() => {}
                _ => {
                    close(&mut open, pos, &mut spans);
                    open = Some((pos, tag.category().to_owned()));
                }
            },
            TagPrefix::E => match &open {
                Some((_, label)) if label == tag.category() => {
                    close(&mut open, pos + 1, &mut spans);
                }
                _ => {
                    close(&mut open, pos, &mut spans);
                    spans.push(SpanFragment {
                        start: pos,
                        end: pos + 1,
                        label: tag.category().to_owned(),
                    });
                }
            },
        }
    }
    close(&mut open, tags.len(), &mut spans);
    spans
}

/// Encodes spans back into a tag sequence of the given length.
///
/// Spans must be sorted, in-bounds, and non-overlapping; this is the inverse
/// of [`decode_spans`] for well-formed input.
pub fn encode_spans(spans: &[SpanFragment], len: usize, scheme: Scheme) -> Vec<Tag> {
    let mut tags = vec![Tag::outside(); len];
    for span in spans {
        assert!(span.start < span.end && span.end <= len, "span out of bounds");
        match scheme {
            Scheme::Bio => {
                tags[span.start] = Tag::labeled(TagPrefix::B, &span.label).unwrap();
                for pos in span.start + 1..span.end {
                    tags[pos] = Tag::labeled(TagPrefix::I, &span.label).unwrap();
                }
            }
            Scheme::Bioes => {
                if span.end - span.start == 1 {
                    tags[span.start] = Tag::labeled(TagPrefix::S, &span.label).unwrap();
                } else {
                    tags[span.start] = Tag::labeled(TagPrefix::B, &span.label).unwrap();
                    for pos in span.start + 1..span.end - 1 {
                        tags[pos] = Tag::labeled(TagPrefix::I, &span.label).unwrap();
                    }
                    tags[span.end - 1] = Tag::labeled(TagPrefix::E, &span.label).unwrap();
                }
            }
        }
    }
    tags
}

/// Extracts all spans of a corpus from the gold column or a named system.
pub fn extract_spans(corpus: &Corpus, source: SpanSource<'_>) -> Result<Vec<Span>, CorpusError> {
    let system_idx = match source {
        SpanSource::Gold => None,
        SpanSource::System(name) => Some(
            corpus
                .system_index(name)
                .ok_or_else(|| CorpusError::UnknownSystem(name.to_owned()))?,
        ),
    };
    let mut spans = Vec::new();
    let mut tags: Vec<Tag> = Vec::new();
    for sentence in &corpus.sentences {
        tags.clear();
        tags.extend(sentence.tokens.iter().map(|t| match system_idx {
            None => t.gold.clone(),
            Some(i) => t.predictions[i].clone(),
        }));
        for fragment in decode_spans(&tags, corpus.scheme) {
            let surface = sentence.tokens[fragment.start..fragment.end]
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            spans.push(Span {
                sentence_index: sentence.index,
                start: fragment.start,
                end: fragment.end,
                label: fragment.label,
                surface,
            });
        }
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(texts: &[&str]) -> Vec<Tag> {
        texts.iter().map(|t| Tag::parse(t).unwrap()).collect()
    }

    fn frags(spec: &[(usize, usize, &str)]) -> Vec<SpanFragment> {
        spec.iter()
            .map(|&(start, end, label)| SpanFragment {
                start,
                end,
                label: label.to_owned(),
            })
            .collect()
    }

    #[test]
    fn tag_grammar_round_trips() {
        for text in ["O", "B-PER", "I-LOC", "E-ORG", "S-MISC", "B-LOC-SUB"] {
            let tag = Tag::parse(text).unwrap();
            assert_eq!(tag.to_string(), text);
        }
    }

    #[test]
    fn tag_grammar_rejects_malformed_text() {
        for text in ["", "B", "B-", "X-PER", "o", "OB", "-PER"] {
            assert!(Tag::parse(text).is_none(), "{text:?} should not parse");
        }
    }

    #[test]
    fn all_outside_decodes_to_no_spans() {
        assert_eq!(decode_spans(&tags(&["O", "O", "O"]), Scheme::Bio), vec![]);
    }

    #[test]
    fn well_formed_bio_decodes() {
        assert_eq!(
            decode_spans(&tags(&["B-PER", "I-PER", "O", "B-LOC"]), Scheme::Bio),
            frags(&[(0, 2, "PER"), (3, 4, "LOC")])
        );
    }

    #[test]
    fn dangling_i_starts_a_new_span() {
        assert_eq!(
            decode_spans(&tags(&["I-LOC", "I-LOC", "B-LOC"]), Scheme::Bio),
            frags(&[(0, 2, "LOC"), (2, 3, "LOC")])
        );
    }

    #[test]
    fn category_switch_inside_a_run_splits_the_span() {
        assert_eq!(
            decode_spans(&tags(&["B-PER", "I-LOC", "I-LOC"]), Scheme::Bio),
            frags(&[(0, 1, "PER"), (1, 3, "LOC")])
        );
    }

    #[test]
    fn bioes_singletons_and_ends() {
        assert_eq!(
            decode_spans(
                &tags(&["S-PER", "B-LOC", "I-LOC", "E-LOC", "O", "E-ORG"]),
                Scheme::Bioes
            ),
            frags(&[(0, 1, "PER"), (1, 4, "LOC"), (5, 6, "ORG")])
        );
    }

    #[test]
    fn bioes_unclosed_run_is_closed_at_sentence_end() {
        assert_eq!(
            decode_spans(&tags(&["B-LOC", "I-LOC"]), Scheme::Bioes),
            frags(&[(0, 2, "LOC")])
        );
    }

    #[test]
    fn bioes_tag_after_e_starts_fresh() {
        assert_eq!(
            decode_spans(&tags(&["B-LOC", "E-LOC", "I-LOC"]), Scheme::Bioes),
            frags(&[(0, 2, "LOC"), (2, 3, "LOC")])
        );
    }

    #[test]
    fn encode_then_decode_is_identity() {
        let spans = frags(&[(1, 3, "PER"), (4, 5, "LOC")]);
        for scheme in [Scheme::Bio, Scheme::Bioes] {
            let encoded = encode_spans(&spans, 6, scheme);
            assert_eq!(decode_spans(&encoded, scheme), spans);
        }
    }

    const SMALL: &str = "\
New B-LOC B-LOC
York I-LOC O
is O O
big O B-ORG
. O O

-DOCSTART- O O

Jim B-PER B-PER
left O O
. O O
";

    fn small_spec() -> ColumnSpec {
        ColumnSpec {
            token_column: 0,
            gold_column: 1,
            prediction_columns: vec![("sys".to_owned(), 2)],
            scheme: Scheme::Bio,
        }
    }

    #[test]
    fn parses_sentences_and_systems() {
        let corpus = parse_conll(SMALL, &small_spec(), CorpusRole::Test).unwrap();
        assert_eq!(corpus.sentences.len(), 2);
        assert_eq!(corpus.sentences[0].len(), 5);
        assert_eq!(corpus.sentences[1].len(), 3);
        assert_eq!(corpus.systems, vec!["sys".to_owned()]);
        assert_eq!(corpus.token_count(), 8);
    }

    #[test]
    fn extracts_gold_and_system_spans() {
        let corpus = parse_conll(SMALL, &small_spec(), CorpusRole::Test).unwrap();
        let gold = extract_spans(&corpus, SpanSource::Gold).unwrap();
        assert_eq!(gold.len(), 2);
        assert_eq!(gold[0].surface, "New York");
        assert_eq!(gold[0].key(), (0, 0, 2, "LOC"));
        assert_eq!(gold[1].key(), (1, 0, 1, "PER"));

        let sys = extract_spans(&corpus, SpanSource::System("sys")).unwrap();
        assert_eq!(sys.len(), 3);
        assert_eq!(sys[0].key(), (0, 0, 1, "LOC"));
        assert_eq!(sys[1].key(), (0, 3, 4, "ORG"));

        assert!(matches!(
            extract_spans(&corpus, SpanSource::System("nope")),
            Err(CorpusError::UnknownSystem(_))
        ));
    }

    #[test]
    fn token_labels_follow_covering_spans() {
        let corpus = parse_conll(SMALL, &small_spec(), CorpusRole::Test).unwrap();
        let labels = corpus.token_labels(SpanSource::Gold).unwrap();
        assert_eq!(labels[0], vec!["LOC", "LOC", "O", "O", "O"]);
        assert_eq!(labels[1], vec!["PER", "O", "O"]);
    }

    #[test]
    fn blank_line_runs_collapse() {
        let text = "a O\n\n\n\nb O\n\n";
        let corpus = parse_conll(text, &ColumnSpec::simple(Scheme::Bio), CorpusRole::Train).unwrap();
        assert_eq!(corpus.sentences.len(), 2);
    }

    #[test]
    fn crlf_input_parses() {
        let text = "a O\r\nb B-X\r\n\r\nc O\r\n";
        let corpus = parse_conll(text, &ColumnSpec::simple(Scheme::Bio), CorpusRole::Train).unwrap();
        assert_eq!(corpus.sentences.len(), 2);
        assert_eq!(corpus.sentences[0].tokens[1].gold, Tag::parse("B-X").unwrap());
    }

    #[test]
    fn ragged_row_is_an_error_with_line_number() {
        let err = parse_conll("a O\nb\n", &ColumnSpec::simple(Scheme::Bio), CorpusRole::Train)
            .unwrap_err();
        match err {
            CorpusError::RaggedRow { line, required, found } => {
                assert_eq!((line, required, found), (2, 2, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_tag_is_an_error_with_line_number() {
        let err = parse_conll("a O\nb Q-LOC\n", &ColumnSpec::simple(Scheme::Bio), CorpusRole::Train)
            .unwrap_err();
        match err {
            CorpusError::BadTag { line, text } => {
                assert_eq!(line, 2);
                assert_eq!(text, "Q-LOC");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            parse_conll("\n\n", &ColumnSpec::simple(Scheme::Bio), CorpusRole::Train),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn train_role_rejects_prediction_columns() {
        assert!(matches!(
            parse_conll(SMALL, &small_spec(), CorpusRole::Train),
            Err(CorpusError::TrainWithPredictions)
        ));
    }

    #[test]
    fn duplicate_columns_are_rejected() {
        let spec = ColumnSpec {
            token_column: 0,
            gold_column: 0,
            prediction_columns: vec![],
            scheme: Scheme::Bio,
        };
        assert!(matches!(
            parse_conll("a O\n", &spec, CorpusRole::Train),
            Err(CorpusError::DuplicateColumn(0))
        ));
    }

    #[test]
    fn prediction_file_attaches_and_aligns() {
        let mut corpus =
            parse_conll(SMALL, &small_spec(), CorpusRole::Test).unwrap();
        let preds = "\
New B-ORG
York I-ORG
is O
big O
. O

Jim O
left O
. O
";
        corpus.attach_prediction_file("other", preds).unwrap();
        assert_eq!(corpus.systems, vec!["sys".to_owned(), "other".to_owned()]);
        let spans = extract_spans(&corpus, SpanSource::System("other")).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].key(), (0, 0, 2, "ORG"));
    }

    #[test]
    fn tag_only_prediction_file_attaches() {
        let mut corpus = parse_conll(SMALL, &small_spec(), CorpusRole::Test).unwrap();
        let preds = "B-LOC\nI-LOC\nO\nO\nO\n\nB-PER\nO\nO\n";
        corpus.attach_prediction_file("tags", preds).unwrap();
        let spans = extract_spans(&corpus, SpanSource::System("tags")).unwrap();
        assert_eq!(spans.len(), 2);
    }

    #[test]
    fn misaligned_prediction_file_is_an_error() {
        let mut corpus = parse_conll(SMALL, &small_spec(), CorpusRole::Test).unwrap();
        let preds = "\
New B-ORG
Old I-ORG
is O
big O
. O

Jim O
left O
. O
";
        let err = corpus.attach_prediction_file("other", preds).unwrap_err();
        match err {
            CorpusError::AlignmentMismatch { line, expected, found } => {
                assert_eq!(line, 2);
                assert_eq!(expected, "York");
                assert_eq!(found, "Old");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn short_prediction_file_is_an_error() {
        let mut corpus = parse_conll(SMALL, &small_spec(), CorpusRole::Test).unwrap();
        let preds = "New O\nYork O\nis O\nbig O\n. O\n";
        assert!(matches!(
            corpus.attach_prediction_file("other", preds),
            Err(CorpusError::AlignmentMismatch { .. })
        ));
    }
}
