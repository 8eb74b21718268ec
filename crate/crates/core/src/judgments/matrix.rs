use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use super::{summary_score_coarse, summary_score_fine, Judgment, JudgmentError};
use crate::assign::Mode;
use crate::corpus::{Corpus, Summary};
use crate::num::Scalar;
use crate::segment::SegmentConfig;
use crate::stats::ScoreMatrix;

/// Normalized summary scores: one row per summary (sorted by id), one
/// column per annotator slot, values in `[0, 100]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationMatrix<T> {
    summary_ids: Vec<String>,
    scores: ScoreMatrix<T>,
    pub provenance: Mode,
    /// Mean fraction of units judged per cell (1.0 for COARSE).
    pub fraction: f64,
}

impl<T: Scalar> AnnotationMatrix<T> {
    pub fn new(
        summary_ids: Vec<String>,
        scores: ScoreMatrix<T>,
        provenance: Mode,
        fraction: f64,
    ) -> Result<Self, JudgmentError> {
        if summary_ids.len() != scores.n_rows() {
            return Err(JudgmentError::Csv(format!(
                "{} ids for {} rows",
                summary_ids.len(),
                scores.n_rows()
            )));
        }
        for (row, r) in scores.rows().enumerate() {
            if let Some(&v) = r.iter().find(|&&v| v < T::zero() || v > T::lit(100.0)) {
                return Err(JudgmentError::Range { row, value: v.as_f64() });
            }
        }
        Ok(AnnotationMatrix {
            summary_ids,
            scores,
            provenance,
            fraction,
        })
    }

    pub fn summary_ids(&self) -> &[String] {
        &self.summary_ids
    }

    pub fn scores(&self) -> &ScoreMatrix<T> {
        &self.scores
    }

    pub fn n_slots(&self) -> usize {
        self.scores.n_cols()
    }

    /// Rows whose summary id satisfies `keep`, order preserved.
    pub fn filter_rows(&self, keep: impl Fn(&str) -> bool) -> Result<Self, JudgmentError> {
        let rows: Vec<usize> = (0..self.summary_ids.len())
            .filter(|&i| keep(&self.summary_ids[i]))
            .collect();
        if rows.is_empty() {
            return Err(JudgmentError::EmptyMatrix);
        }
        Ok(AnnotationMatrix {
            summary_ids: rows.iter().map(|&i| self.summary_ids[i].clone()).collect(),
            scores: self.scores.select_rows(&rows),
            provenance: self.provenance,
            fraction: self.fraction,
        })
    }

    /// CSV with header `summary_id,slot_0,...,slot_{M-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), JudgmentError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["summary_id".to_string()];
        header.extend((0..self.n_slots()).map(|j| format!("slot_{j}")));
        wtr.write_record(&header).map_err(csv_err)?;
        for (id, row) in self.summary_ids.iter().zip(self.scores.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, provenance: Mode, fraction: f64) -> Result<Self, JudgmentError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let m = header.len().saturating_sub(1);
        let expected = (0..m).map(|j| format!("slot_{j}"));
        if m == 0 || &header[0] != "summary_id" || !header.iter().skip(1).eq(expected.collect::<Vec<_>>().iter().map(String::as_str)) {
            return Err(JudgmentError::Csv("expected header summary_id,slot_0,...".into()));
        }
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            ids.push(rec[0].to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .and_then(T::from_f64)
                        .ok_or_else(|| JudgmentError::Csv(format!("row {}: bad value {v:?}", i + 1)))
                })
                .collect::<Result<Vec<T>, _>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(JudgmentError::EmptyMatrix);
        }
        let scores = ScoreMatrix::from_rows(&rows).map_err(|e| JudgmentError::Csv(e.to_string()))?;
        AnnotationMatrix::new(ids, scores, provenance, fraction)
    }
}

fn csv_err(e: csv::Error) -> JudgmentError {
    JudgmentError::Csv(e.to_string())
}

/// Builds the summary x slot matrix from effective judgments of one mode.
///
/// Rows are the corpus summaries accepted by `filter`, sorted by id; each
/// must have judgments from exactly slots `0..M`, where `M` is the number
/// of distinct slots seen across the selection.
pub fn build_matrix<T: Scalar>(
    corpus: &Corpus,
    judgments: &[Judgment],
    mode: Mode,
    segment: &SegmentConfig,
    filter: impl Fn(&Summary) -> bool,
) -> Result<AnnotationMatrix<T>, JudgmentError> {
    // summary -> slot -> (labels | normalized rating)
    let mut cells: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for j in judgments {
        let summary = corpus
            .summary(j.summary_id())
            .ok_or_else(|| JudgmentError::UnknownSummary(j.summary_id().to_string()))?;
        if !filter(summary) {
            continue;
        }
        let value = match (mode, j) {
            (Mode::Fine, Judgment::Fine(f)) => f.label as f64,
            (Mode::Coarse, Judgment::Coarse(c)) => summary_score_coarse(c.rating, c.scale)?,
            _ => continue,
        };
        cells
            .entry(summary.summary_id.as_str())
            .or_default()
            .entry(j.annotator_slot())
            .or_default()
            .push(value);
    }

    let selected: Vec<&Summary> = {
        let mut s: Vec<&Summary> = corpus.summaries().filter(|s| filter(s)).collect();
        s.sort_by(|a, b| a.summary_id.cmp(&b.summary_id));
        s
    };
    if selected.is_empty() {
        return Err(JudgmentError::EmptyMatrix);
    }
    let slots: BTreeSet<usize> = cells.values().flat_map(|m| m.keys().copied()).collect();
    let m = slots.len();
    if m == 0 {
        return Err(JudgmentError::EmptyMatrix);
    }
    let ragged: Vec<(String, usize)> = selected
        .iter()
        .filter_map(|s| {
            let got = cells.get(s.summary_id.as_str());
            let ok = got.is_some_and(|g| g.len() == m && g.keys().copied().eq(0..m));
            (!ok).then(|| (s.summary_id.clone(), got.map_or(0, |g| g.len())))
        })
        .collect();
    if !ragged.is_empty() {
        return Err(JudgmentError::Ragged(ragged));
    }

    let mut rows = Vec::with_capacity(selected.len());
    let mut coverage = Vec::new();
    for s in &selected {
        let slots = &cells[s.summary_id.as_str()];
        let n_units = match mode {
            Mode::Fine => s.units(segment).len(),
            Mode::Coarse => 0,
        };
        let row = slots
            .values()
            .map(|values| {
                let score = match mode {
                    Mode::Fine => {
                        let labels: Vec<u8> = values.iter().map(|&v| v as u8).collect();
                        if n_units > 0 {
                            coverage.push(labels.len() as f64 / n_units as f64);
                        }
                        summary_score_fine(&labels)?
                    }
                    Mode::Coarse => values.iter().sum::<f64>() / values.len() as f64,
                };
                T::from_f64(score).ok_or(JudgmentError::Range { row: rows.len(), value: score })
            })
            .collect::<Result<Vec<T>, _>>()?;
        rows.push(row);
    }
    let fraction = if coverage.is_empty() {
        1.0
    } else {
        (coverage.iter().sum::<f64>() / coverage.len() as f64).min(1.0)
    };
    let scores = ScoreMatrix::from_rows(&rows).map_err(|e| JudgmentError::Csv(e.to_string()))?;
    AnnotationMatrix::new(
        selected.iter().map(|s| s.summary_id.clone()).collect(),
        scores,
        mode,
        fraction,
    )
}

/// Per system: mean over its summaries of the mean over slots.
pub fn system_score<T: Scalar>(
    matrix: &AnnotationMatrix<T>,
    grouping: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, T>, JudgmentError> {
    let means = matrix.scores().row_means();
    let mut sums: BTreeMap<String, (T, usize)> = BTreeMap::new();
    for (id, mean) in matrix.summary_ids().iter().zip(means) {
        let system = grouping
            .get(id)
            .ok_or_else(|| JudgmentError::Ungrouped(id.clone()))?;
        let e = sums.entry(system.clone()).or_insert((T::zero(), 0));
        e.0 = e.0 + mean;
        e.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / T::from_count(n)))
        .collect())
}
