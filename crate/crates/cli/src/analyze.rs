use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use faithkit_core::judgments::build_matrix;
use faithkit_core::stats::{
    agreement_report, fine_label_table, interannotator_stddev, learning_curve, mean_system_ci, metric_correlation_ci,
    partial_annotation_curve, perturbation_report, BootstrapConfig, CorrelationMethod, FullFineAnnotations, GoldLabel,
    PartialCurveConfig, PerturbationConfig, StddevDenominator,
};
use faithkit_core::{Annotations, FineJudgment, Judgment, MetricScoreTable, Mode};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::io::{self, fmt_opt, Report, Table};
use crate::ModeArg;

#[derive(Subcommand)]
pub enum Analyze {
    /// Mean per-summary standard deviation across annotator slots.
    Stddev {
        #[command(flatten)]
        input: MatrixInput,
        #[arg(long, value_enum, default_value_t = DenominatorArg::Sample)]
        stddev_denominator: DenominatorArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fleiss and Randolph kappa plus all-agree fraction over FINE labels.
    Kappa {
        #[arg(long)]
        judgments: PathBuf,
        /// With --summaries, also report per system.
        #[arg(long, requires = "summaries")]
        documents: Option<PathBuf>,
        #[arg(long, requires = "documents")]
        summaries: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bootstrap interval for each system's mean score.
    BootstrapMean {
        #[command(flatten)]
        input: MatrixInput,
        #[command(flatten)]
        boot: BootArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bootstrap interval for the correlation of human scores with metrics.
    BootstrapCorr {
        #[command(flatten)]
        input: MatrixInput,
        /// CSV with header `summary_id,<metric_name>`; repeatable.
        #[arg(long = "metric", required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long = "method", value_enum, default_values_t = [MethodArg::Pearson])]
        methods: Vec<MethodArg>,
        #[command(flatten)]
        boot: BootArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Kendall tau and spread of partial-annotation scores against full ones.
    PartialCurve {
        /// FINE judgments with every slot covering every unit.
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        fractions: Vec<f64>,
        /// Random subsets per fraction.
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = DenominatorArg::Sample)]
        stddev_denominator: DenominatorArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Accuracy, agreement and timing on units with known perturbations.
    Perturbation {
        #[arg(long)]
        judgments: PathBuf,
        /// JSONL `{"summary_id", "unit_index", "gold": "perturbed"|"clean"}`.
        #[arg(long)]
        gold: PathBuf,
        /// Per-unit times above this are excluded from the medians.
        #[arg(long, default_value_t = 600_000)]
        time_cap_ms: u64,
        #[arg(long, default_value_t = 5)]
        first_n: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Mean time per unit by decile of position within a summary.
    LearningCurve {
        #[arg(long)]
        judgments: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// Annotation matrix from a CSV export or from judgments plus corpus.
#[derive(Args)]
pub struct MatrixInput {
    /// CSV `summary_id,slot_0,...` (values on 0-100).
    #[arg(long, conflicts_with_all = ["judgments", "documents", "summaries"])]
    matrix: Option<PathBuf>,
    #[arg(long, requires_all = ["documents", "summaries"])]
    judgments: Option<PathBuf>,
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    summaries: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Fine)]
    mode: ModeArg,
    /// Segmentation config used when summaries carry no units.
    #[arg(long)]
    segment_config: Option<PathBuf>,
}

#[derive(Args)]
pub struct BootArgs {
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl BootArgs {
    fn config(&self) -> BootstrapConfig {
        BootstrapConfig {
            iterations: self.k,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
pub struct OutArgs {
    /// Write `<PREFIX>.csv` and `<PREFIX>.json` instead of stdout/stderr.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn report(&self) -> Report {
        Report {
            prefix: self.out.clone(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DenominatorArg {
    Sample,
    Population,
}

impl From<DenominatorArg> for StddevDenominator {
    fn from(d: DenominatorArg) -> Self {
        match d {
            DenominatorArg::Sample => StddevDenominator::Sample,
            DenominatorArg::Population => StddevDenominator::Population,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Pearson,
    Kendall,
}

impl From<MethodArg> for CorrelationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pearson => CorrelationMethod::Pearson,
            MethodArg::Kendall => CorrelationMethod::Kendall,
        }
    }
}

/// Row groups: everything, then each system when the corpus is known.
struct Loaded {
    matrix: Annotations,
    systems: Option<BTreeMap<String, String>>,
}

impl Loaded {
    fn groups(&self) -> Result<Vec<(String, Annotations)>> {
        let mut out = vec![("all".to_string(), self.matrix.clone())];
        if let Some(systems) = &self.systems {
            let names: std::collections::BTreeSet<&String> = systems.values().collect();
            for name in names {
                let m = self.matrix.filter_rows(|id| systems.get(id) == Some(name))?;
                out.push((name.clone(), m));
            }
        }
        Ok(out)
    }
}

impl MatrixInput {
    fn load(&self) -> Result<Loaded> {
        let mode: Mode = self.mode.into();
        if let Some(path) = &self.matrix {
            let matrix = Annotations::read_csv(io::open(path)?, mode, 1.0)
                .with_context(|| format!("reading {}", path.display()))?;
            return Ok(Loaded { matrix, systems: None });
        }
        let (Some(judgments), Some(documents), Some(summaries)) = (&self.judgments, &self.documents, &self.summaries)
        else {
            bail!("give --matrix, or --judgments with --documents and --summaries");
        };
        let corpus = io::read_corpus(documents, summaries)?;
        let segment = io::segment_config(self.segment_config.as_deref())?;
        let js = io::read_judgments(judgments)?;
        let matrix = build_matrix(&corpus, &js, mode, &segment, |_| true).context("building annotation matrix")?;
        Ok(Loaded {
            matrix,
            systems: Some(corpus.system_grouping()),
        })
    }
}

fn fine_only(judgments: Vec<Judgment>) -> Result<Vec<FineJudgment>> {
    let fine: Vec<FineJudgment> = judgments
        .into_iter()
        .filter_map(|j| match j {
            Judgment::Fine(f) => Some(f),
            Judgment::Coarse(_) => None,
        })
        .collect();
    if fine.is_empty() {
        bail!("no FINE judgments in input");
    }
    Ok(fine)
}

#[derive(Deserialize)]
struct GoldRecord {
    summary_id: String,
    unit_index: usize,
    gold: GoldLabel,
}

pub fn run(cmd: Analyze) -> Result<()> {
    match cmd {
        Analyze::Stddev {
            input,
            stddev_denominator,
            out,
        } => {
            let loaded = input.load()?;
            let denominator: StddevDenominator = stddev_denominator.into();
            let mut table = Table::new(&["group", "n_summaries", "n_slots", "stddev"])?;
            let mut groups = Vec::new();
            for (name, m) in loaded.groups()? {
                let sd = interannotator_stddev(m.scores(), denominator)?;
                table.row([name.clone(), m.scores().n_rows().to_string(), m.n_slots().to_string(), sd.to_string()])?;
                groups.push(json!({"group": name, "n_summaries": m.scores().n_rows(), "stddev": sd}));
            }
            out.report().emit(
                table,
                &json!({
                    "statistic": "interannotator_stddev",
                    "denominator": denominator,
                    "mode": loaded.matrix.provenance,
                    "fraction": loaded.matrix.fraction,
                    "n_slots": loaded.matrix.n_slots(),
                    "groups": groups,
                }),
            )
        }
        Analyze::Kappa {
            judgments,
            documents,
            summaries,
            out,
        } => {
            let fine = fine_only(io::read_judgments(&judgments)?)?;
            let mut groups: Vec<(String, Vec<FineJudgment>)> = vec![("all".into(), fine.clone())];
            if let (Some(d), Some(s)) = (&documents, &summaries) {
                let corpus = io::read_corpus(d, s)?;
                let systems = corpus.system_grouping();
                let mut by_system: BTreeMap<String, Vec<FineJudgment>> = BTreeMap::new();
                for j in fine {
                    let system = systems
                        .get(&j.summary_id)
                        .with_context(|| format!("judgment for unknown summary {}", j.summary_id))?;
                    by_system.entry(system.clone()).or_default().push(j);
                }
                groups.extend(by_system);
            }
            let mut table = Table::new(&[
                "group",
                "n_items",
                "n_raters",
                "fleiss_kappa",
                "randolph_kappa",
                "all_agree_fraction",
            ])?;
            let mut reports = Vec::new();
            for (name, js) in groups {
                let Some(labels) = fine_label_table(&js)? else {
                    bail!("group {name}: no unit was judged by two or more slots");
                };
                let r = agreement_report::<f64>(&labels);
                table.row([
                    name.clone(),
                    r.n_items.to_string(),
                    r.n_raters.to_string(),
                    fmt_opt(r.fleiss_kappa),
                    r.randolph_kappa.to_string(),
                    r.all_agree_fraction.to_string(),
                ])?;
                reports.push(json!({"group": name, "report": r}));
            }
            out.report().emit(table, &json!({"statistic": "agreement", "groups": reports}))
        }
        Analyze::BootstrapMean { input, boot, out } => {
            let loaded = input.load()?;
            let config = boot.config();
            let mut table = Table::new(&["group", "n_summaries", "point", "lower", "upper", "alpha", "k", "seed"])?;
            let mut cis = Vec::new();
            for (name, m) in loaded.groups()? {
                let ci = mean_system_ci(m.scores(), &config)?;
                let point = m.scores().mean_of_row_means();
                table.row([
                    name.clone(),
                    m.scores().n_rows().to_string(),
                    point.to_string(),
                    ci.lower.to_string(),
                    ci.upper.to_string(),
                    ci.alpha.to_string(),
                    ci.iterations.to_string(),
                    ci.seed.to_string(),
                ])?;
                cis.push(json!({"group": name, "point": point, "ci": ci}));
            }
            out.report().emit(
                table,
                &json!({"statistic": "mean", "mode": loaded.matrix.provenance, "config": config, "groups": cis}),
            )
        }
        Analyze::BootstrapCorr {
            input,
            metrics,
            methods,
            boot,
            out,
        } => {
            let loaded = input.load()?;
            let config = boot.config();
            let ids = loaded.matrix.summary_ids();
            let mut table = Table::new(&["metric", "method", "n", "point", "lower", "upper", "alpha", "k", "seed"])?;
            let mut cis = Vec::new();
            for path in &metrics {
                let metric = MetricScoreTable::read_csv(io::open(path)?)
                    .with_context(|| format!("reading {}", path.display()))?;
                let values = ids
                    .iter()
                    .map(|id| {
                        metric
                            .scores
                            .get(id)
                            .copied()
                            .with_context(|| format!("{} has no score for {id}", metric.metric_name))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let human = loaded.matrix.scores().row_means();
                for &method in &methods {
                    let method: CorrelationMethod = method.into();
                    let ci = metric_correlation_ci(loaded.matrix.scores(), &values, method, &config)
                        .with_context(|| format!("metric {}", metric.metric_name))?;
                    let point = method.compute(&human, &values)?;
                    table.row([
                        metric.metric_name.clone(),
                        method.name().to_string(),
                        ids.len().to_string(),
                        point.to_string(),
                        ci.lower.to_string(),
                        ci.upper.to_string(),
                        ci.alpha.to_string(),
                        ci.iterations.to_string(),
                        ci.seed.to_string(),
                    ])?;
                    cis.push(json!({"metric": metric.metric_name, "method": method, "point": point, "ci": ci}));
                }
            }
            out.report().emit(
                table,
                &json!({"statistic": "metric_correlation", "config": config, "results": cis}),
            )
        }
        Analyze::PartialCurve {
            judgments,
            fractions,
            k,
            seed,
            stddev_denominator,
            out,
        } => {
            let fine = fine_only(io::read_judgments(&judgments)?)?;
            let data = FullFineAnnotations::from_judgments(&fine)?;
            let config = PartialCurveConfig {
                fractions,
                n_subsets: k,
                seed,
                denominator: stddev_denominator.into(),
            };
            let points = partial_annotation_curve(&data, &config)?;
            let mut table = Table::new(&[
                "fraction",
                "tau_p2_5",
                "tau_p50",
                "tau_p97_5",
                "n_undefined_tau",
                "stddev_p2_5",
                "stddev_p50",
                "stddev_p97_5",
                "mean_stddev",
                "n_subsets",
                "seed",
            ])?;
            for p in &points {
                table.row([
                    p.fraction.to_string(),
                    p.tau.p2_5.to_string(),
                    p.tau.p50.to_string(),
                    p.tau.p97_5.to_string(),
                    p.n_undefined_tau.to_string(),
                    fmt_opt(p.stddev.map(|s| s.p2_5)),
                    fmt_opt(p.stddev.map(|s| s.p50)),
                    fmt_opt(p.stddev.map(|s| s.p97_5)),
                    fmt_opt(p.mean_stddev),
                    p.n_subsets.to_string(),
                    p.seed.to_string(),
                ])?;
            }
            out.report().emit(
                table,
                &json!({
                    "statistic": "partial_annotation_curve",
                    "n_summaries": data.summaries().len(),
                    "n_slots": data.n_slots(),
                    "config": config,
                    "points": points,
                }),
            )
        }
        Analyze::Perturbation {
            judgments,
            gold,
            time_cap_ms,
            first_n,
            out,
        } => {
            let fine = fine_only(io::read_judgments(&judgments)?)?;
            let records = faithkit_core::corpus::read_jsonl::<GoldRecord, _>(io::open(&gold)?, &gold.display().to_string())?;
            let gold: HashMap<(String, usize), GoldLabel> = records
                .into_iter()
                .map(|(_, r)| ((r.summary_id, r.unit_index), r.gold))
                .collect();
            let config = PerturbationConfig { time_cap_ms, first_n };
            let r = perturbation_report(&fine, &gold, &config)?;
            let mut table = Table::new(&[
                "n_judgments",
                "accuracy_2way",
                "fleiss_kappa",
                "n_kappa_units",
                "median_time_all_ms",
                "median_time_first_ms",
                "n_time_excluded",
                "time_cap_ms",
                "first_n",
            ])?;
            table.row([
                r.n_judgments.to_string(),
                r.accuracy_2way.to_string(),
                fmt_opt(r.fleiss_kappa),
                r.n_kappa_units.to_string(),
                fmt_opt(r.median_time_all_ms),
                fmt_opt(r.median_time_first_ms),
                r.n_time_excluded.to_string(),
                r.time_cap_ms.to_string(),
                r.first_n.to_string(),
            ])?;
            out.report().emit(table, &Tagged { statistic: "perturbation", report: &r })
        }
        Analyze::LearningCurve { judgments, out } => {
            let fine = fine_only(io::read_judgments(&judgments)?)?;
            let points = learning_curve(&fine);
            let mut table = Table::new(&["hint_mode", "decile", "mean_elapsed_ms", "n"])?;
            for p in &points {
                table.row([
                    p.hint_mode.to_string(),
                    p.decile.to_string(),
                    p.mean_elapsed_ms.to_string(),
                    p.n.to_string(),
                ])?;
            }
            out.report().emit(table, &json!({"statistic": "learning_curve", "points": points}))
        }
    }
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    statistic: &'static str,
    #[serde(flatten)]
    report: &'a T,
}
