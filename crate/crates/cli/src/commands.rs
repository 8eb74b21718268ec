use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use faithkit_core::align::{
    bm25_rank, ingest_external_scores, ranking_from_candidates, recall_at_k, rouge1_rank, select_hints,
    AlignmentUniverse, Bm25Params, MAX_HINTS,
};
use faithkit_core::assign::{make_coarse_assignments, make_fine_assignments};
use faithkit_core::corpus::{ingest_metric_scores, read_jsonl, Corpus};
use faithkit_core::judgments::build_matrix;
use faithkit_core::metrics::{extractiveness, rouge, RougeVariant};
use faithkit_core::text::TokenizerConfig;
use faithkit_core::{AlignmentCandidate, Annotations, Assignment, GoldAlignment, HintSet, Mode, ScaleSpec, UnitKey};
use faithkit_service::ProjectSpec;
use serde::Deserialize;
use serde_json::json;

use crate::io::{self, Table};
use crate::{HintModeArg, ModeArg};

#[derive(Args)]
pub struct CorpusArgs {
    #[arg(long)]
    documents: PathBuf,
    #[arg(long)]
    summaries: PathBuf,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        io::read_corpus(&self.documents, &self.summaries)
    }
}

#[derive(Args)]
pub struct Ingest {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Metric score CSVs (`summary_id,<metric>`) to validate against the corpus.
    #[arg(long = "metric")]
    metrics: Vec<PathBuf>,
    /// Write canonical `documents.jsonl` and `summaries.jsonl` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Ingest {
    pub fn run(self) -> Result<()> {
        let corpus = self.corpus.load()?;
        let mut metric_names = Vec::new();
        for path in &self.metrics {
            let table = ingest_metric_scores(path, &corpus).with_context(|| format!("metric file {}", path.display()))?;
            metric_names.push(table.metric_name);
        }
        if let Some(dir) = &self.out_dir {
            corpus.write_documents(std::io::BufWriter::new(io::create(&dir.join("documents.jsonl"))?))?;
            corpus.write_summaries(std::io::BufWriter::new(io::create(&dir.join("summaries.jsonl"))?))?;
        }
        let systems: BTreeMap<String, usize> = corpus.systems().into_iter().map(|(k, v)| (k, v.len())).collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "n_documents": corpus.n_documents(),
                "n_summaries": corpus.n_summaries(),
                "n_sentences": corpus.documents().map(|d| d.sentences.len()).sum::<usize>(),
                "systems": systems,
                "metrics": metric_names,
            }))?
        );
        Ok(())
    }
}

#[derive(Args)]
pub struct Segment {
    #[arg(long)]
    summaries: PathBuf,
    /// TOML overriding `conjunctions`, `min_unit_tokens`, `abbreviations`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-segment even when summaries carry their own units.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Segment {
    pub fn run(self) -> Result<()> {
        let config = io::segment_config(self.config.as_deref())?;
        let summaries = Corpus::read_summaries(io::open(&self.summaries)?, &self.summaries.display().to_string())?;
        let units = summaries.iter().flat_map(|s| {
            if self.force {
                config.segment_summary(&s.summary_id, &s.text)
            } else {
                s.units(&config)
            }
        });
        io::write_jsonl(self.out.as_deref(), units)
    }
}

/// Rating scale for COARSE assignments.
#[derive(Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    /// 0-5 Likert
    Likert,
    /// 1-100 direct assessment
    Da,
}

#[derive(Args)]
pub struct Assign {
    #[arg(long)]
    summaries: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Fine)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    #[arg(long, default_value_t = 3)]
    annotators: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = HintModeArg::None)]
    hint_mode: HintModeArg,
    #[arg(long, value_enum, default_value_t = ScaleArg::Likert)]
    scale: ScaleArg,
    #[arg(long)]
    segment_config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Assign {
    pub fn run(self) -> Result<()> {
        let config = io::segment_config(self.segment_config.as_deref())?;
        let summaries = Corpus::read_summaries(io::open(&self.summaries)?, &self.summaries.display().to_string())?;
        let scale = match self.scale {
            ScaleArg::Likert => ScaleSpec::LIKERT_0_5,
            ScaleArg::Da => ScaleSpec::DA_1_100,
        };
        let mut all = Vec::new();
        for s in &summaries {
            let batch = match self.mode {
                ModeArg::Fine => make_fine_assignments(
                    &s.summary_id,
                    &s.units(&config),
                    self.annotators,
                    self.fraction,
                    self.seed,
                    self.hint_mode.into(),
                ),
                ModeArg::Coarse => make_coarse_assignments(&s.summary_id, self.annotators, scale, self.seed),
            };
            all.extend(batch.with_context(|| format!("summary {}", s.summary_id))?);
        }
        io::write_jsonl(self.out.as_deref(), all)
    }
}

#[derive(Args)]
pub struct MatrixCmd {
    #[arg(long)]
    judgments: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Fine)]
    mode: ModeArg,
    /// Keep only this system's summaries.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    segment_config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl MatrixCmd {
    pub fn run(self) -> Result<()> {
        let corpus = self.corpus.load()?;
        let segment = io::segment_config(self.segment_config.as_deref())?;
        let judgments = io::read_judgments(&self.judgments)?;
        let matrix: Annotations = build_matrix(&corpus, &judgments, self.mode.into(), &segment, |s| {
            self.system.as_ref().is_none_or(|sys| &s.system_id == sys)
        })?;
        match &self.out {
            Some(p) => matrix.write_csv(io::create(p)?)?,
            None => matrix.write_csv(std::io::stdout().lock())?,
        }
        eprintln!(
            "{} summaries x {} slots, mode {:?}, fraction {:.3}",
            matrix.summary_ids().len(),
            matrix.n_slots(),
            matrix.provenance,
            matrix.fraction
        );
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ScorerArg {
    Bm25,
    Rouge1,
    External,
}

#[derive(Subcommand)]
pub enum Align {
    /// Rank every source sentence for every unit; CSV candidates.
    Rank {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum)]
        scorer: ScorerArg,
        /// Precomputed `summary_id,unit_index,sentence_index,score` CSV
        /// (required for `--scorer external`).
        #[arg(long, required_if_eq("scorer", "external"))]
        scores: Option<PathBuf>,
        #[arg(long)]
        stem: bool,
        #[arg(long)]
        keep_stopwords: bool,
        #[arg(long)]
        segment_config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select up to five highlights per unit from ranked candidates; JSONL.
    Hints {
        #[arg(long)]
        candidates: PathBuf,
        /// Name of the scorer; `superpal` defaults the threshold to 0.3.
        #[arg(long)]
        scorer_name: String,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = MAX_HINTS)]
        max_hints: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recall@k of one or more rankings against gold alignments; CSV.
    Eval {
        /// `NAME=PATH` of a candidates CSV; repeatable.
        #[arg(long = "candidates", required = true)]
        candidates: Vec<String>,
        /// JSONL `{"summary_id", "unit_index", "sentences": [..]}`.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "3,5,10")]
        k: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn candidate_table(candidates: &[AlignmentCandidate]) -> Result<Table> {
    let mut table = Table::new(&["summary_id", "unit_index", "sentence_index", "score", "rank"])?;
    let mut rank_of: HashMap<UnitKey, usize> = HashMap::new();
    for c in candidates {
        let r = rank_of.entry(c.key()).or_insert(0);
        *r += 1;
        table.row([
            c.summary_id.clone(),
            c.unit_index.to_string(),
            c.sentence_index.to_string(),
            c.score.to_string(),
            r.to_string(),
        ])?;
    }
    Ok(table)
}

impl Align {
    pub fn run(self) -> Result<()> {
        match self {
            Align::Rank {
                corpus,
                scorer,
                scores,
                stem,
                keep_stopwords,
                segment_config,
                out,
            } => {
                let corpus = corpus.load()?;
                let segment = io::segment_config(segment_config.as_deref())?;
                let tokenizer = TokenizerConfig {
                    remove_stopwords: !keep_stopwords,
                    stem,
                };
                let mut ranked = Vec::new();
                match scorer {
                    ScorerArg::Bm25 | ScorerArg::Rouge1 => {
                        for s in corpus.summaries() {
                            let doc = corpus.source_of(s);
                            for unit in s.units(&segment) {
                                ranked.extend(match scorer {
                                    ScorerArg::Bm25 => bm25_rank(&unit, doc, Bm25Params::default(), tokenizer),
                                    _ => rouge1_rank(&unit, doc, tokenizer),
                                });
                            }
                        }
                    }
                    ScorerArg::External => {
                        let path = scores.context("--scores is required with --scorer external")?;
                        let universe = AlignmentUniverse::from_corpus(&corpus, &segment);
                        let candidates = ingest_external_scores(io::open(&path)?, Some(&universe))
                            .with_context(|| format!("reading {}", path.display()))?;
                        let mut grouped: BTreeMap<UnitKey, Vec<AlignmentCandidate>> = BTreeMap::new();
                        for c in candidates {
                            grouped.entry(c.key()).or_default().push(c);
                        }
                        for (_, mut group) in grouped {
                            group.sort_by(|a, b| {
                                b.score
                                    .total_cmp(&a.score)
                                    .then(a.sentence_index.cmp(&b.sentence_index))
                            });
                            ranked.extend(group);
                        }
                    }
                }
                io::write_table(out.as_deref(), candidate_table(&ranked)?)
            }
            Align::Hints {
                candidates,
                scorer_name,
                threshold,
                max_hints,
                out,
            } => {
                let all = ingest_external_scores(io::open(&candidates)?, None)
                    .with_context(|| format!("reading {}", candidates.display()))?;
                let mut grouped: BTreeMap<UnitKey, Vec<AlignmentCandidate>> = BTreeMap::new();
                for c in all {
                    grouped.entry(c.key()).or_default().push(c);
                }
                let hints: Vec<HintSet> = grouped
                    .iter()
                    .map(|(key, group)| select_hints(key, group, &scorer_name, threshold, max_hints))
                    .collect();
                io::write_jsonl(out.as_deref(), hints)
            }
            Align::Eval {
                candidates,
                gold,
                k,
                out,
            } => {
                let gold = GoldAlignment::read_jsonl(io::open(&gold)?, &gold.display().to_string())?;
                let mut header = vec!["scorer".to_string(), "n_units".to_string()];
                header.extend(k.iter().map(|k| format!("R@{k}")));
                let mut table = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>())?;
                for spec in &candidates {
                    let Some((name, path)) = spec.split_once('=') else {
                        bail!("--candidates expects NAME=PATH, got {spec}");
                    };
                    let path = PathBuf::from(path);
                    let all = ingest_external_scores(io::open(&path)?, None)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let ranking = ranking_from_candidates(&all);
                    let mut row = vec![name.to_string(), gold.len().to_string()];
                    for &k in &k {
                        row.push(recall_at_k(&ranking, &gold, k).with_context(|| format!("scorer {name}"))?.to_string());
                    }
                    table.row(row)?;
                }
                io::write_table(out.as_deref(), table)
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Rouge1,
    Rouge2,
    RougeL,
}

impl From<VariantArg> for RougeVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Rouge1 => RougeVariant::One,
            VariantArg::Rouge2 => RougeVariant::Two,
            VariantArg::RougeL => RougeVariant::L,
        }
    }
}

#[derive(Deserialize)]
struct ReferenceRecord {
    doc_id: String,
    text: String,
}

#[derive(Subcommand)]
pub enum Metrics {
    /// ROUGE F1 per summary; `summary_id,<variant>` CSV usable as a metric
    /// table, or precision/recall/F1 columns with `--detailed`.
    Rouge {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// JSONL `{"doc_id", "text"}` reference summaries, one per document.
        #[arg(long, required_unless_present = "against_source")]
        references: Option<PathBuf>,
        /// Score against the source document instead of a reference.
        #[arg(long)]
        against_source: bool,
        #[arg(long, value_enum, default_value_t = VariantArg::Rouge1)]
        variant: VariantArg,
        #[arg(long)]
        detailed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fraction of each summary's bigrams found in its source document.
    Extractiveness {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Metrics {
    pub fn run(self) -> Result<()> {
        match self {
            Metrics::Rouge {
                corpus,
                references,
                against_source,
                variant,
                detailed,
                out,
            } => {
                let corpus = corpus.load()?;
                let refs: HashMap<String, String> = match &references {
                    Some(path) if !against_source => {
                        let mut refs = HashMap::new();
                        for (line, r) in read_jsonl::<ReferenceRecord, _>(io::open(path)?, &path.display().to_string())? {
                            if refs.insert(r.doc_id.clone(), r.text).is_some() {
                                bail!("{}:{line}: second reference for document {}", path.display(), r.doc_id);
                            }
                        }
                        refs
                    }
                    _ => HashMap::new(),
                };
                let variant: RougeVariant = variant.into();
                let name = variant.to_string();
                let mut table = if detailed {
                    Table::new(&["summary_id", "precision", "recall", "f1"])?
                } else {
                    Table::new(&["summary_id", &name])?
                };
                for s in corpus.summaries() {
                    let reference = if against_source {
                        corpus.source_of(s).text.as_str()
                    } else {
                        refs.get(&s.doc_id)
                            .with_context(|| format!("no reference for document {}", s.doc_id))?
                            .as_str()
                    };
                    let score = rouge(&s.text, reference, variant);
                    if detailed {
                        table.row([
                            s.summary_id.clone(),
                            score.precision.to_string(),
                            score.recall.to_string(),
                            score.f1.to_string(),
                        ])?;
                    } else {
                        table.row([s.summary_id.clone(), score.f1.to_string()])?;
                    }
                }
                io::write_table(out.as_deref(), table)
            }
            Metrics::Extractiveness { corpus, out } => {
                let corpus = corpus.load()?;
                let mut table = Table::new(&["summary_id", "extractiveness"])?;
                let mut values = Vec::new();
                for s in corpus.summaries() {
                    let e = extractiveness(&s.text, &corpus.source_of(s).text);
                    values.extend(e);
                    table.row([s.summary_id.clone(), io::fmt_opt(e)])?;
                }
                io::write_table(out.as_deref(), table)?;
                if !values.is_empty() {
                    eprintln!(
                        "mean extractiveness {:.4} over {} summaries",
                        values.iter().sum::<f64>() / values.len() as f64,
                        values.len()
                    );
                }
                Ok(())
            }
        }
    }
}

#[derive(Subcommand)]
pub enum ProjectCmd {
    /// Bundle corpus, assignments and hints into a project JSON for
    /// `POST /projects`.
    Build {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        assignments: PathBuf,
        /// HintSet JSONL from `align hints`.
        #[arg(long)]
        hints: Option<PathBuf>,
        #[arg(long)]
        project_id: String,
        /// Plain-text instructions replacing the built-in ones.
        #[arg(long)]
        instructions: Option<PathBuf>,
        /// `SLOT=TOKEN`; repeatable.
        #[arg(long = "slot-token")]
        slot_tokens: Vec<String>,
        /// Keep only summaries that have assignments.
        #[arg(long)]
        prune: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl ProjectCmd {
    pub fn run(self) -> Result<()> {
        let ProjectCmd::Build {
            corpus,
            assignments,
            hints,
            project_id,
            instructions,
            slot_tokens,
            prune,
            out,
        } = self;
        let corpus = corpus.load()?;
        let assignments: Vec<Assignment> = read_jsonl(io::open(&assignments)?, &assignments.display().to_string())?
            .into_iter()
            .map(|(_, a)| a)
            .collect();
        let Some(first) = assignments.first() else {
            bail!("no assignments");
        };
        let mode: Mode = first.mode;
        if assignments.iter().any(|a| a.mode != mode) {
            bail!("assignments mix FINE and COARSE");
        }
        let hints: Vec<HintSet> = match &hints {
            Some(p) => read_jsonl(io::open(p)?, &p.display().to_string())?
                .into_iter()
                .map(|(_, h)| h)
                .collect(),
            None => Vec::new(),
        };
        let mut tokens = BTreeMap::new();
        for spec in &slot_tokens {
            let (slot, token) = spec
                .split_once('=')
                .with_context(|| format!("--slot-token expects SLOT=TOKEN, got {spec}"))?;
            tokens.insert(slot.parse::<usize>().with_context(|| format!("slot in {spec}"))?, token.to_string());
        }
        let assigned: std::collections::HashSet<&str> = assignments.iter().map(|a| a.summary_id.as_str()).collect();
        let summaries: Vec<_> = corpus
            .summaries()
            .filter(|s| !prune || assigned.contains(s.summary_id.as_str()))
            .cloned()
            .collect();
        let used_docs: std::collections::HashSet<&str> = summaries.iter().map(|s| s.doc_id.as_str()).collect();
        let documents = corpus
            .documents()
            .filter(|d| !prune || used_docs.contains(d.doc_id.as_str()))
            .cloned()
            .collect();
        let spec = ProjectSpec {
            project_id,
            mode,
            instructions: instructions
                .map(|p| std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display())))
                .transpose()?,
            documents,
            summaries,
            assignments,
            hints,
            slot_tokens: tokens,
        };
        // Fail here rather than at POST time.
        faithkit_service::Project::new(spec.clone())?;
        let json = serde_json::to_string(&spec)?;
        match &out {
            Some(p) => std::fs::write(p, json).with_context(|| format!("writing {}", p.display()))?,
            None => println!("{json}"),
        }
        Ok(())
    }
}
