use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use faithkit_core::corpus::{ingest_corpus, Corpus};
use faithkit_core::judgments::effective_judgments;
use faithkit_core::{Judgment, LogRecord, SegmentConfig};
use serde::Serialize;

pub fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub fn read_corpus(documents: &Path, summaries: &Path) -> Result<Corpus> {
    ingest_corpus(documents, summaries).context("reading corpus")
}

pub fn segment_config(path: Option<&Path>) -> Result<SegmentConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SegmentConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(SegmentConfig::default()),
    }
}

/// Reads either a service export (log records with `seq`) or plain
/// judgment JSONL. Log corrections are resolved to the current judgment.
pub fn read_judgments(path: &Path) -> Result<Vec<Judgment>> {
    let reader = BufReader::new(open(path)?);
    let mut records = Vec::new();
    let mut plain = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if value.get("seq").is_some() {
            records.push(
                serde_json::from_value::<LogRecord>(value).with_context(|| format!("{}:{}", path.display(), i + 1))?,
            );
        } else {
            plain.push(
                serde_json::from_value::<Judgment>(value).with_context(|| format!("{}:{}", path.display(), i + 1))?,
            );
        }
    }
    match (records.is_empty(), plain.is_empty()) {
        (false, false) => bail!("{} mixes log records and plain judgments", path.display()),
        (false, true) => Ok(effective_judgments(&records)?),
        _ => {
            let mut seen = std::collections::HashSet::new();
            for j in &plain {
                if !seen.insert(j.key()) {
                    bail!("{}: duplicate judgment for {}", path.display(), j.key());
                }
            }
            Ok(plain)
        }
    }
}

pub fn write_jsonl<T: Serialize>(out: Option<&Path>, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(std::io::BufWriter::new(create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV table built row by row.
pub struct Table {
    wtr: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(header)?;
        Ok(Table { wtr })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.wtr.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.wtr.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Where a CSV table + JSON summary pair goes: `<prefix>.csv` and
/// `<prefix>.json`, or stdout (CSV) and stderr (JSON) without a prefix.
pub struct Report {
    pub prefix: Option<PathBuf>,
}

impl Report {
    pub fn emit(&self, table: Table, summary: &impl Serialize) -> Result<()> {
        let csv = table.into_bytes()?;
        let json = serde_json::to_string_pretty(summary)?;
        match &self.prefix {
            Some(prefix) => {
                let csv_path = with_suffix(prefix, "csv");
                let json_path = with_suffix(prefix, "json");
                create(&csv_path)?.write_all(&csv)?;
                writeln!(create(&json_path)?, "{json}")?;
                eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
            }
            None => {
                std::io::stdout().write_all(&csv)?;
                eprintln!("{json}");
            }
        }
        Ok(())
    }
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn write_table(out: Option<&Path>, table: Table) -> Result<()> {
    let bytes = table.into_bytes()?;
    match out {
        Some(p) => create(p)?.write_all(&bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
