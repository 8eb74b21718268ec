//! Append-only JSONL judgment log.
//!
//! Records are never rewritten. A correction is a new record whose
//! `supersedes` names the sequence number of the record it replaces; any
//! other record for an existing key is rejected. Each append is flushed to
//! disk before it is acknowledged, and a torn final line left by a crash is
//! truncated on open.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Judgment, JudgmentError, JudgmentKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub received_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u64>,
    #[serde(flatten)]
    pub judgment: Judgment,
}

#[derive(Default)]
struct Log {
    records: Vec<LogRecord>,
    /// Key -> position in `records` of the current judgment.
    current: HashMap<JudgmentKey, usize>,
}

impl Log {
    fn check(&self, judgment: &Judgment, supersedes: Option<u64>) -> Result<(), JudgmentError> {
        judgment.validate()?;
        let key = judgment.key();
        match (self.current.get(&key), supersedes) {
            (None, None) => Ok(()),
            (Some(_), None) => Err(JudgmentError::Duplicate(key)),
            (Some(&pos), Some(s)) if self.records[pos].seq == s => Ok(()),
            (_, Some(s)) => Err(JudgmentError::Supersedes { key, supersedes: s }),
        }
    }

    fn push(&mut self, record: LogRecord) {
        self.current.insert(record.judgment.key(), self.records.len());
        self.records.push(record);
    }

    fn next_seq(&self) -> u64 {
        self.records.last().map_or(0, |r| r.seq + 1)
    }

    fn effective(&self) -> Vec<Judgment> {
        let mut positions: Vec<usize> = self.current.values().copied().collect();
        positions.sort_unstable();
        positions
            .into_iter()
            .map(|p| self.records[p].judgment.clone())
            .collect()
    }

    /// Replays records read from disk, enforcing the same rules as appends.
    fn replay(records: Vec<LogRecord>) -> Result<Self, JudgmentError> {
        let mut log = Log::default();
        for (i, record) in records.into_iter().enumerate() {
            if record.seq != log.next_seq() {
                return Err(JudgmentError::Corrupt {
                    line: i + 1,
                    message: format!("sequence {} out of order", record.seq),
                });
            }
            log.check(&record.judgment, record.supersedes)
                .map_err(|e| JudgmentError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            log.push(record);
        }
        Ok(log)
    }
}

/// Parses a log. A final line without its newline is a torn write: it is
/// dropped and its byte offset returned so the caller can truncate.
fn parse_log<R: BufRead>(mut reader: R) -> Result<(Vec<LogRecord>, Option<u64>), JudgmentError> {
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            return Ok((records, None));
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        if buf.trim().is_empty() {
            offset += n as u64;
            continue;
        }
        if !complete {
            return Ok((records, Some(offset)));
        }
        let record = serde_json::from_str::<LogRecord>(buf.trim_end()).map_err(|e| JudgmentError::Corrupt {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
        offset += n as u64;
    }
}

/// Reads a log file without opening it for writing.
pub fn load_log(path: &Path) -> Result<Vec<LogRecord>, JudgmentError> {
    let (records, _) = parse_log(BufReader::new(File::open(path)?))?;
    Log::replay(records.clone())?;
    Ok(records)
}

/// Current judgment per key, ordered by the sequence number of that judgment.
pub fn effective_judgments(records: &[LogRecord]) -> Result<Vec<Judgment>, JudgmentError> {
    Ok(Log::replay(records.to_vec())?.effective())
}

/// Thread-safe judgment store. Appends are serialized through one lock, so
/// the log order is a linearization of concurrent submissions.
pub struct JudgmentStore {
    inner: Mutex<(Log, Option<File>)>,
}

impl JudgmentStore {
    /// Opens (or creates) a log file and replays it.
    pub fn open(path: &Path) -> Result<Self, JudgmentError> {
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)?;
        file.seek(SeekFrom::Start(0))?;
        let (records, torn_at) = parse_log(BufReader::new(&file))?;
        if let Some(offset) = torn_at {
            file.set_len(offset)?;
            file.sync_all()?;
        }
        let log = Log::replay(records)?;
        Ok(JudgmentStore {
            inner: Mutex::new((log, Some(file))),
        })
    }

    pub fn in_memory() -> Self {
        JudgmentStore {
            inner: Mutex::new((Log::default(), None)),
        }
    }

    /// Validates, writes and syncs one record; returns it once durable.
    pub fn append(&self, judgment: Judgment, supersedes: Option<u64>) -> Result<LogRecord, JudgmentError> {
        let mut guard = self.inner.lock().expect("store lock poisoned");
        let (log, file) = &mut *guard;
        log.check(&judgment, supersedes)?;
        let record = LogRecord {
            seq: log.next_seq(),
            received_at: Utc::now(),
            supersedes,
            judgment,
        };
        if let Some(file) = file {
            let mut line = serde_json::to_vec(&record).map_err(std::io::Error::from)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        log.push(record.clone());
        Ok(record)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("store lock poisoned").0.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copy of every record written so far.
    pub fn records(&self) -> Vec<LogRecord> {
        self.inner.lock().expect("store lock poisoned").0.records.clone()
    }

    /// Current judgment per key.
    pub fn effective(&self) -> Vec<Judgment> {
        self.inner.lock().expect("store lock poisoned").0.effective()
    }

    pub fn contains(&self, key: &JudgmentKey) -> bool {
        self.inner
            .lock()
            .expect("store lock poisoned")
            .0
            .current
            .contains_key(key)
    }
}
