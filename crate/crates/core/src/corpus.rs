//! Documents, summaries and externally computed metric scores.
//!
//! Interchange is one JSON object per line:
//!
//! * documents: `{"doc_id", "text", "sentences"?}`
//! * summaries: `{"summary_id", "doc_id", "system_id", "text", "units"?}`
//!
//! `sentences` / `units`, when present, are taken verbatim (after
//! normalization) instead of running the splitters. Metric scores are CSV
//! with header `summary_id,<metric_name>`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::{FineUnit, SegmentConfig};
use crate::text::{self, Span};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("summary {summary_id} references missing document {doc_id}")]
    DanglingDocument { summary_id: String, doc_id: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{kind} {id}: segment {index} not found in text")]
    SegmentNotFound {
        kind: &'static str,
        id: String,
        index: usize,
    },
    #[error("metric table row {row}: score {value:?} is not a number")]
    NonNumericScore { row: usize, value: String },
    #[error("metric table: {0}")]
    MetricFormat(String),
    #[error("metric table references unknown summaries: {0:?}")]
    UnknownSummaries(Vec<String>),
    #[error("metric table is missing scores for: {0:?}")]
    MissingScores(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSentence {
    pub index: usize,
    pub text: String,
    pub span: Span,
}

/// Serialized as its JSONL record: `{"doc_id", "text", "sentences"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DocumentRecord", into = "DocumentRecord")]
pub struct SourceDocument {
    pub doc_id: String,
    pub text: String,
    pub sentences: Vec<SourceSentence>,
}

impl SourceDocument {
    /// Builds a document, splitting sentences unless `sentences` is given.
    pub fn new(
        doc_id: impl Into<String>,
        text: &str,
        sentences: Option<&[String]>,
    ) -> Result<Self, CorpusError> {
        let doc_id = doc_id.into();
        let text = text::normalize(text);
        let sentences = match sentences {
            Some(given) => locate_segments(&text, given, "document", &doc_id)?
                .into_iter()
                .enumerate()
                .map(|(index, (text, span))| SourceSentence { index, text, span })
                .collect(),
            None => SegmentConfig::default()
                .split_sentences(&text)
                .into_iter()
                .enumerate()
                .map(|(index, (text, span))| SourceSentence { index, text, span })
                .collect(),
        };
        Ok(SourceDocument {
            doc_id,
            text,
            sentences,
        })
    }
}

/// Serialized as its JSONL record; `units` is a list of unit texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SummaryRecord", into = "SummaryRecord")]
pub struct Summary {
    pub summary_id: String,
    pub doc_id: String,
    pub system_id: String,
    pub text: String,
    /// Pre-segmented units, if the input supplied them.
    pub units: Option<Vec<FineUnit>>,
}

impl Summary {
    /// The summary's fine units: the supplied segmentation if present,
    /// otherwise the rule-based one.
    pub fn units(&self, config: &SegmentConfig) -> Vec<FineUnit> {
        match &self.units {
            Some(units) => units.clone(),
            None => config.segment_summary(&self.summary_id, &self.text),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRecord {
    doc_id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryRecord {
    summary_id: String,
    doc_id: String,
    system_id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<Vec<String>>,
}

impl TryFrom<DocumentRecord> for SourceDocument {
    type Error = CorpusError;

    fn try_from(rec: DocumentRecord) -> Result<Self, CorpusError> {
        SourceDocument::new(rec.doc_id, &rec.text, rec.sentences.as_deref())
    }
}

impl From<SourceDocument> for DocumentRecord {
    fn from(doc: SourceDocument) -> Self {
        DocumentRecord {
            doc_id: doc.doc_id,
            text: doc.text,
            sentences: Some(doc.sentences.into_iter().map(|s| s.text).collect()),
        }
    }
}

impl TryFrom<SummaryRecord> for Summary {
    type Error = CorpusError;

    fn try_from(rec: SummaryRecord) -> Result<Self, CorpusError> {
        let text = text::normalize(&rec.text);
        let units = match &rec.units {
            Some(given) => Some(
                locate_segments(&text, given, "summary", &rec.summary_id)?
                    .into_iter()
                    .enumerate()
                    .map(|(unit_index, (text, span))| FineUnit {
                        summary_id: rec.summary_id.clone(),
                        unit_index,
                        text,
                        span,
                    })
                    .collect(),
            ),
            None => None,
        };
        Ok(Summary {
            summary_id: rec.summary_id,
            doc_id: rec.doc_id,
            system_id: rec.system_id,
            text,
            units,
        })
    }
}

impl From<Summary> for SummaryRecord {
    fn from(s: Summary) -> Self {
        SummaryRecord {
            summary_id: s.summary_id,
            doc_id: s.doc_id,
            system_id: s.system_id,
            text: s.text,
            units: s.units.map(|u| u.into_iter().map(|u| u.text).collect()),
        }
    }
}

/// Locates each segment in order; segments must appear in `text` without
/// overlapping.
fn locate_segments(
    text: &str,
    segments: &[String],
    kind: &'static str,
    id: &str,
) -> Result<Vec<(String, Span)>, CorpusError> {
    let chars: Vec<char> = text.chars().collect();
    let mut cursor = 0;
    let mut out = Vec::with_capacity(segments.len());
    for (index, segment) in segments.iter().enumerate() {
        let normalized = text::normalize(segment);
        let needle: Vec<char> = normalized.trim().chars().collect();
        let span = text::find_from(&chars, &needle, cursor).ok_or_else(|| {
            CorpusError::SegmentNotFound {
                kind,
                id: id.to_string(),
                index,
            }
        })?;
        cursor = span.end;
        out.push((needle.iter().collect(), span));
    }
    Ok(out)
}

/// Validated, immutable set of documents and summaries.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: IndexMap<String, SourceDocument>,
    summaries: IndexMap<String, Summary>,
}

impl Corpus {
    pub fn new(
        documents: impl IntoIterator<Item = SourceDocument>,
        summaries: impl IntoIterator<Item = Summary>,
    ) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for doc in documents {
            if corpus.documents.contains_key(&doc.doc_id) {
                return Err(CorpusError::DuplicateId {
                    kind: "document",
                    id: doc.doc_id,
                });
            }
            corpus.documents.insert(doc.doc_id.clone(), doc);
        }
        for summary in summaries {
            if corpus.summaries.contains_key(&summary.summary_id) {
                return Err(CorpusError::DuplicateId {
                    kind: "summary",
                    id: summary.summary_id,
                });
            }
            if !corpus.documents.contains_key(&summary.doc_id) {
                return Err(CorpusError::DanglingDocument {
                    summary_id: summary.summary_id,
                    doc_id: summary.doc_id,
                });
            }
            corpus.summaries.insert(summary.summary_id.clone(), summary);
        }
        Ok(corpus)
    }

    pub fn documents(&self) -> impl Iterator<Item = &SourceDocument> {
        self.documents.values()
    }

    pub fn summaries(&self) -> impl Iterator<Item = &Summary> {
        self.summaries.values()
    }

    pub fn document(&self, doc_id: &str) -> Option<&SourceDocument> {
        self.documents.get(doc_id)
    }

    pub fn summary(&self, summary_id: &str) -> Option<&Summary> {
        self.summaries.get(summary_id)
    }

    /// Source document of a summary.
    pub fn source_of(&self, summary: &Summary) -> &SourceDocument {
        &self.documents[summary.doc_id.as_str()]
    }

    pub fn n_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn n_summaries(&self) -> usize {
        self.summaries.len()
    }

    /// Summary ids per system, in ingest order.
    pub fn systems(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for s in self.summaries.values() {
            out.entry(s.system_id.clone())
                .or_default()
                .push(s.summary_id.clone());
        }
        out
    }

    /// summary_id -> system_id.
    pub fn system_grouping(&self) -> BTreeMap<String, String> {
        self.summaries
            .values()
            .map(|s| (s.summary_id.clone(), s.system_id.clone()))
            .collect()
    }

    pub fn read_documents<R: Read>(reader: R, origin: &str) -> Result<Vec<SourceDocument>, CorpusError> {
        read_jsonl::<DocumentRecord, _>(reader, origin)?
            .into_iter()
            .map(|(_, rec)| SourceDocument::try_from(rec))
            .collect()
    }

    pub fn read_summaries<R: Read>(reader: R, origin: &str) -> Result<Vec<Summary>, CorpusError> {
        read_jsonl::<SummaryRecord, _>(reader, origin)?
            .into_iter()
            .map(|(_, rec)| Summary::try_from(rec))
            .collect()
    }

    /// Canonical documents JSONL: sentences always present.
    pub fn write_documents<W: Write>(&self, mut w: W) -> io::Result<()> {
        for doc in self.documents.values() {
            serde_json::to_writer(&mut w, doc)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Canonical summaries JSONL: units only when they were supplied.
    pub fn write_summaries<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in self.summaries.values() {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Reads and validates a corpus from a documents file and a summaries file.
pub fn ingest_corpus(doc_path: &Path, summary_path: &Path) -> Result<Corpus, CorpusError> {
    let docs = File::open(doc_path).map_err(|e| CorpusError::io(doc_path, e))?;
    let sums = File::open(summary_path).map_err(|e| CorpusError::io(summary_path, e))?;
    let documents = Corpus::read_documents(docs, &doc_path.display().to_string())?;
    let summaries = Corpus::read_summaries(sums, &summary_path.display().to_string())?;
    Corpus::new(documents, summaries)
}

/// Parses JSON lines, skipping blank ones. Returns `(line_number, record)`.
pub fn read_jsonl<T, R>(reader: R, origin: &str) -> Result<Vec<(usize, T)>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            path: origin.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: origin.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

/// One externally computed metric, one score per summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricScoreTable {
    pub metric_name: String,
    pub scores: IndexMap<String, f64>,
}

impl MetricScoreTable {
    /// Parses `summary_id,<metric>` CSV without checking it against a corpus.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CorpusError::MetricFormat(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "summary_id" {
            return Err(CorpusError::MetricFormat(format!(
                "expected header `summary_id,<metric_name>`, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let metric_name = headers[1].to_string();
        let mut scores = IndexMap::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| CorpusError::MetricFormat(format!("row {row}: {e}")))?;
            let id = record[0].to_string();
            let raw = &record[1];
            let value: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                CorpusError::NonNumericScore {
                    row,
                    value: raw.to_string(),
                }
            })?;
            if scores.insert(id.clone(), value).is_some() {
                return Err(CorpusError::DuplicateId {
                    kind: "metric row",
                    id,
                });
            }
        }
        Ok(MetricScoreTable {
            metric_name,
            scores,
        })
    }

    /// Checks that the table covers exactly the corpus summaries.
    pub fn validate(&self, corpus: &Corpus) -> Result<(), CorpusError> {
        let unknown: Vec<String> = self
            .scores
            .keys()
            .filter(|id| corpus.summary(id).is_none())
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(CorpusError::UnknownSummaries(unknown));
        }
        let present: BTreeSet<&str> = self.scores.keys().map(String::as_str).collect();
        let missing: Vec<String> = corpus
            .summaries()
            .filter(|s| !present.contains(s.summary_id.as_str()))
            .map(|s| s.summary_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(CorpusError::MissingScores(missing));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["summary_id", self.metric_name.as_str()])?;
        for (id, v) in &self.scores {
            wtr.write_record([id.clone(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Reads a metric table and validates it against `corpus`.
pub fn ingest_metric_scores(path: &Path, corpus: &Corpus) -> Result<MetricScoreTable, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let table = MetricScoreTable::read_csv(file)?;
    table.validate(corpus)?;
    Ok(table)
}
