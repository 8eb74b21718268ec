//! Ranking source sentences against summary units, hint selection, and
//! recall@k evaluation of rankings against gold alignments.
//!
//! Lexical scorers work on sentence granularity: for BM25 each source
//! sentence is a document and the document's sentences are the collection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{read_jsonl, Corpus, CorpusError, SourceDocument};
use crate::segment::{FineUnit, SegmentConfig};
use crate::text::{tokenize, TokenizerConfig};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("row {row}: unknown unit {key}")]
    DanglingUnit { row: usize, key: UnitKey },
    #[error("row {row}: sentence {sentence_index} out of range for unit {key}")]
    DanglingSentence {
        row: usize,
        key: UnitKey,
        sentence_index: usize,
    },
    #[error("no predictions for unit {0}")]
    MissingPredictions(UnitKey),
    #[error("gold alignment for unit {0} is empty")]
    EmptyGold(UnitKey),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("nothing to evaluate")]
    Empty,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Identifies a unit across the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitKey {
    pub summary_id: String,
    pub unit_index: usize,
}

impl UnitKey {
    pub fn new(summary_id: impl Into<String>, unit_index: usize) -> Self {
        UnitKey {
            summary_id: summary_id.into(),
            unit_index,
        }
    }

    pub fn of(unit: &FineUnit) -> Self {
        UnitKey::new(unit.summary_id.clone(), unit.unit_index)
    }
}

impl std::fmt::Display for UnitKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.summary_id, self.unit_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCandidate {
    pub summary_id: String,
    pub unit_index: usize,
    pub sentence_index: usize,
    pub score: f64,
}

impl AlignmentCandidate {
    pub fn key(&self) -> UnitKey {
        UnitKey::new(self.summary_id.clone(), self.unit_index)
    }
}

/// Descending score, ascending sentence index on ties.
fn rank(mut candidates: Vec<AlignmentCandidate>) -> Vec<AlignmentCandidate> {
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.sentence_index.cmp(&b.sentence_index))
    });
    candidates
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Okapi BM25 of the unit's tokens against every sentence of `doc`.
///
/// IDF is `ln(1 + (N - n + 0.5) / (n + 0.5))`, which stays positive for
/// terms occurring in most sentences.
pub fn bm25_rank(
    unit: &FineUnit,
    doc: &SourceDocument,
    params: Bm25Params,
    tokenizer: TokenizerConfig,
) -> Vec<AlignmentCandidate> {
    let sentences: Vec<Vec<String>> = doc
        .sentences
        .iter()
        .map(|s| tokenize(&s.text, tokenizer))
        .collect();
    let n = sentences.len() as f64;
    let avgdl = sentences.iter().map(Vec::len).sum::<usize>() as f64 / n.max(1.0);

    let query: BTreeSet<String> = tokenize(&unit.text, tokenizer).into_iter().collect();
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for s in &sentences {
        let distinct: BTreeSet<&str> = s.iter().map(String::as_str).collect();
        for t in distinct {
            *doc_freq.entry(t).or_default() += 1;
        }
    }

    let candidates = sentences
        .iter()
        .enumerate()
        .map(|(sentence_index, tokens)| {
            let mut tf: HashMap<&str, usize> = HashMap::new();
            for t in tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            let dl = tokens.len() as f64;
            let score = if avgdl == 0.0 {
                0.0
            } else {
                query
                    .iter()
                    .filter_map(|q| {
                        let f = *tf.get(q.as_str())? as f64;
                        let df = doc_freq[q.as_str()] as f64;
                        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                        Some(idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * dl / avgdl)))
                    })
                    .fold(0.0, |acc, x| acc + x)
            };
            AlignmentCandidate {
                summary_id: unit.summary_id.clone(),
                unit_index: unit.unit_index,
                sentence_index,
                score,
            }
        })
        .collect();
    rank(candidates)
}

/// Clipped unigram-overlap F1 between `a` and `b` token bags.
pub(crate) fn overlap_f1(a: &[String], b: &[String]) -> (f64, f64, f64) {
    if a.is_empty() || b.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in b {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in a {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    let p = overlap as f64 / a.len() as f64;
    let r = overlap as f64 / b.len() as f64;
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Unigram-overlap F1 between the unit and each sentence, stopwords removed.
pub fn rouge1_rank(unit: &FineUnit, doc: &SourceDocument, tokenizer: TokenizerConfig) -> Vec<AlignmentCandidate> {
    let unit_tokens = tokenize(&unit.text, tokenizer);
    let candidates = doc
        .sentences
        .iter()
        .map(|s| {
            let (_, _, f1) = overlap_f1(&unit_tokens, &tokenize(&s.text, tokenizer));
            AlignmentCandidate {
                summary_id: unit.summary_id.clone(),
                unit_index: unit.unit_index,
                sentence_index: s.index,
                score: f1,
            }
        })
        .collect();
    rank(candidates)
}

/// Known units and sentence counts, used to reject dangling external rows.
#[derive(Debug, Clone, Default)]
pub struct AlignmentUniverse {
    /// unit -> number of sentences in its source document
    units: HashMap<UnitKey, usize>,
}

impl AlignmentUniverse {
    pub fn from_corpus(corpus: &Corpus, segment: &SegmentConfig) -> Self {
        let mut units = HashMap::new();
        for s in corpus.summaries() {
            let n_sentences = corpus.source_of(s).sentences.len();
            for u in s.units(segment) {
                units.insert(UnitKey::of(&u), n_sentences);
            }
        }
        AlignmentUniverse { units }
    }

    pub fn insert(&mut self, key: UnitKey, n_sentences: usize) {
        self.units.insert(key, n_sentences);
    }
}

#[derive(Debug, Deserialize)]
struct ExternalRow {
    summary_id: String,
    unit_index: String,
    sentence_index: String,
    score: String,
}

/// Reads precomputed aligner scores, CSV header
/// `summary_id,unit_index,sentence_index,score`.
pub fn ingest_external_scores<R: Read>(
    reader: R,
    universe: Option<&AlignmentUniverse>,
) -> Result<Vec<AlignmentCandidate>, AlignError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ExternalRow>().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| AlignError::Row {
            row: row_no,
            message: e.to_string(),
        })?;
        let bad = |message: String| AlignError::Row { row: row_no, message };
        if row.summary_id.is_empty() || row.unit_index.is_empty() {
            return Err(bad("missing unit key".into()));
        }
        let unit_index: usize = row
            .unit_index
            .parse()
            .map_err(|_| bad(format!("unit_index {:?} is not an integer", row.unit_index)))?;
        let sentence_index: usize = row
            .sentence_index
            .parse()
            .map_err(|_| bad(format!("sentence_index {:?} is not an integer", row.sentence_index)))?;
        let score: f64 = row
            .score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| bad(format!("score {:?} is not a number", row.score)))?;
        let key = UnitKey::new(row.summary_id.clone(), unit_index);
        if let Some(universe) = universe {
            let n_sentences = *universe
                .units
                .get(&key)
                .ok_or_else(|| AlignError::DanglingUnit {
                    row: row_no,
                    key: key.clone(),
                })?;
            if sentence_index >= n_sentences {
                return Err(AlignError::DanglingSentence {
                    row: row_no,
                    key,
                    sentence_index,
                });
            }
        }
        out.push(AlignmentCandidate {
            summary_id: row.summary_id,
            unit_index,
            sentence_index,
            score,
        });
    }
    Ok(out)
}

/// Highlighted source sentences for one unit, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintSet {
    pub summary_id: String,
    pub unit_index: usize,
    pub highlights: Vec<usize>,
    pub scores: Vec<f64>,
    pub scorer_name: String,
    pub threshold: f64,
}

pub const MAX_HINTS: usize = 5;
pub const SUPERPAL_THRESHOLD: f64 = 0.3;

/// Default cut-off for a scorer: 0.3 on the SuperPAL scale, 0 otherwise.
pub fn default_threshold(scorer_name: &str) -> f64 {
    if scorer_name.eq_ignore_ascii_case("superpal") {
        SUPERPAL_THRESHOLD
    } else {
        0.0
    }
}

/// Keeps candidates scoring at least `threshold`, best first, at most
/// `max_hints` of them. `candidates` must all belong to `key`; others are
/// ignored.
pub fn select_hints(
    key: &UnitKey,
    candidates: &[AlignmentCandidate],
    scorer_name: &str,
    threshold: Option<f64>,
    max_hints: usize,
) -> HintSet {
    let threshold = threshold.unwrap_or_else(|| default_threshold(scorer_name));
    let kept = rank(
        candidates
            .iter()
            .filter(|c| c.summary_id == key.summary_id && c.unit_index == key.unit_index)
            .filter(|c| c.score >= threshold)
            .cloned()
            .collect(),
    );
    let kept = &kept[..kept.len().min(max_hints)];
    HintSet {
        summary_id: key.summary_id.clone(),
        unit_index: key.unit_index,
        highlights: kept.iter().map(|c| c.sentence_index).collect(),
        scores: kept.iter().map(|c| c.score).collect(),
        scorer_name: scorer_name.to_string(),
        threshold,
    }
}

/// Sentence indices per unit in rank order.
pub type Ranking = BTreeMap<UnitKey, Vec<usize>>;

/// Groups candidates per unit and orders each group by score.
pub fn ranking_from_candidates(candidates: &[AlignmentCandidate]) -> Ranking {
    let mut grouped: BTreeMap<UnitKey, Vec<AlignmentCandidate>> = BTreeMap::new();
    for c in candidates {
        grouped.entry(c.key()).or_default().push(c.clone());
    }
    grouped
        .into_iter()
        .map(|(k, v)| (k, rank(v).into_iter().map(|c| c.sentence_index).collect()))
        .collect()
}

/// Gold supporting sentences per unit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldAlignment {
    pub units: BTreeMap<UnitKey, BTreeSet<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GoldRecord {
    summary_id: String,
    unit_index: usize,
    sentences: Vec<usize>,
}

impl GoldAlignment {
    pub fn insert(&mut self, key: UnitKey, sentences: impl IntoIterator<Item = usize>) -> Result<(), AlignError> {
        let set: BTreeSet<usize> = sentences.into_iter().collect();
        if set.is_empty() {
            return Err(AlignError::EmptyGold(key));
        }
        self.units.entry(key).or_default().extend(set);
        Ok(())
    }

    /// JSONL records `{"summary_id", "unit_index", "sentences": [..]}`.
    pub fn read_jsonl<R: Read>(reader: R, origin: &str) -> Result<Self, AlignError> {
        let mut gold = GoldAlignment::default();
        for (_, rec) in read_jsonl::<GoldRecord, _>(reader, origin)? {
            gold.insert(UnitKey::new(rec.summary_id, rec.unit_index), rec.sentences)?;
        }
        Ok(gold)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

/// Fraction of gold units whose top-`k` predictions contain any gold sentence.
pub fn recall_at_k(ranking: &Ranking, gold: &GoldAlignment, k: usize) -> Result<f64, AlignError> {
    if k == 0 {
        return Err(AlignError::ZeroK);
    }
    if gold.is_empty() {
        return Err(AlignError::Empty);
    }
    let mut hits = 0usize;
    for (key, sentences) in &gold.units {
        if sentences.is_empty() {
            return Err(AlignError::EmptyGold(key.clone()));
        }
        let predicted = ranking
            .get(key)
            .ok_or_else(|| AlignError::MissingPredictions(key.clone()))?;
        if predicted.iter().take(k).any(|s| sentences.contains(s)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / gold.len() as f64)
}
