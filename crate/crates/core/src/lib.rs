//! Building blocks for fine-grained human evaluation of summary faithfulness.
//!
//! The crate covers the whole offline pipeline: ingesting documents and
//! summaries, splitting summaries into clause-level units, drawing (partial)
//! annotation assignments, aligning units to source sentences for hints,
//! aggregating judgments into score matrices, and the statistics used to
//! analyze them (annotator bootstrap, kappa agreement, rank correlation,
//! partial-annotation curves, timing reports).
//!
//! Numeric routines are generic over [`Scalar`]; the aliases below pin the
//! common `f64` instantiations.

pub mod align;
pub mod assign;
pub mod corpus;
pub mod judgments;
pub mod metrics;
pub mod num;
pub mod seeding;
pub mod segment;
pub mod stats;
pub mod text;

pub use num::Scalar;

pub use align::{AlignmentCandidate, GoldAlignment, HintSet, UnitKey};
pub use assign::{Assignment, HintMode, Mode, ScaleSpec};
pub use corpus::{Corpus, MetricScoreTable, SourceDocument, SourceSentence, Summary};
pub use judgments::{CoarseJudgment, FineJudgment, Judgment, JudgmentStore, LogRecord};
pub use segment::{FineUnit, SegmentConfig};
pub use text::Span;

/// Score matrix over `f64`.
pub type Matrix = stats::ScoreMatrix<f64>;
/// Annotation matrix over `f64`, the form produced from judgment logs.
pub type Annotations = judgments::AnnotationMatrix<f64>;
/// Bootstrap interval over `f64`.
pub type BootstrapCi = stats::BootstrapCi<f64>;
/// Agreement report over `f64`.
pub type AgreementReport = stats::AgreementReport<f64>;
