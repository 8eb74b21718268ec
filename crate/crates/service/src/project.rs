//! Project definitions, task ordering and submission checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use faithkit_core::corpus::Corpus;
use faithkit_core::judgments::JudgmentKey;
use faithkit_core::{
    Assignment, FineUnit, HintMode, HintSet, Judgment, Mode, ScaleSpec, SegmentConfig, SourceDocument, Span, Summary,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const FINE_INSTRUCTIONS: &str = "\
A span of the summary is highlighted. Decide whether everything it says is \
supported by the source document, then answer Yes (supported) or No (not \
supported). A claim counts as unsupported if the document contradicts it or \
never states or implies it.

Some tasks highlight source sentences that may be relevant. Use Next Hint to \
move between them. The hints come from an automatic aligner and can be wrong, \
so read the document yourself before answering.";

pub const COARSE_INSTRUCTIONS: &str = "\
Read the source document and the whole summary, then rate how faithful the \
summary is to the document on the given scale, where the lowest value means \
mostly unsupported and the highest means fully supported. You may add a \
comment explaining your rating.";

/// Everything a project needs, posted once by an administrator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectSpec {
    pub project_id: String,
    pub mode: Mode,
    #[serde(default)]
    pub instructions: Option<String>,
    pub documents: Vec<SourceDocument>,
    pub summaries: Vec<Summary>,
    pub assignments: Vec<Assignment>,
    #[serde(default)]
    pub hints: Vec<HintSet>,
    /// Optional per-slot access tokens; when present every request for a
    /// slot must carry its token.
    #[serde(default)]
    pub slot_tokens: BTreeMap<usize, String>,
}

/// One unit of work for a slot: a (summary, unit) pair for FINE, a summary
/// for COARSE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TaskRef {
    pub assignment: usize,
    pub unit_index: Option<usize>,
    /// 1-based position within the assignment and the assignment's size.
    pub position: usize,
    pub of: usize,
}

impl TaskRef {
    pub fn key(&self, project: &Project) -> JudgmentKey {
        let a = &project.spec.assignments[self.assignment];
        match self.unit_index {
            Some(unit_index) => JudgmentKey::Fine {
                summary_id: a.summary_id.clone(),
                unit_index,
                annotator_slot: a.annotator_slot,
            },
            None => JudgmentKey::Coarse {
                summary_id: a.summary_id.clone(),
                annotator_slot: a.annotator_slot,
            },
        }
    }
}

/// Validated project with lookup tables.
pub struct Project {
    pub spec: ProjectSpec,
    corpus: Corpus,
    units: HashMap<String, Vec<FineUnit>>,
    hints: HashMap<(String, usize), HintSet>,
    /// slot -> tasks in delivery order
    queues: BTreeMap<usize, Vec<TaskRef>>,
    /// (summary, slot) -> assignment index
    by_key: HashMap<(String, usize), usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HintView {
    pub sentence_index: usize,
    pub span: Span,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Position {
    /// 1-based index of the current task within its summary's assignment.
    pub index: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TaskView {
    pub project_id: String,
    pub mode: Mode,
    pub annotator_slot: usize,
    pub summary_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_index: Option<usize>,
    pub summary_text: String,
    /// Span of the unit to judge within `summary_text` (FINE only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_span: Option<Span>,
    pub source_text: String,
    pub hint_mode: HintMode,
    /// Highlighted source sentences in cycling order, at most five.
    pub hints: Vec<HintView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleSpec>,
    pub position: Position,
    pub instructions: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextTask {
    Task(Box<TaskView>),
    Done { project_id: String, annotator_slot: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SlotProgress {
    pub annotator_slot: usize,
    pub judged: usize,
    pub total: usize,
    pub median_elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Progress {
    pub project_id: String,
    pub slots: Vec<SlotProgress>,
}

fn invalid(msg: impl Into<String>) -> ApiError {
    ApiError::InvalidProject(msg.into())
}

impl Project {
    pub fn new(spec: ProjectSpec) -> Result<Self, ApiError> {
        if spec.project_id.is_empty()
            || !spec
                .project_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(invalid("project_id must be non-empty and use only [A-Za-z0-9_-]"));
        }
        let corpus = Corpus::new(spec.documents.clone(), spec.summaries.clone()).map_err(|e| invalid(e.to_string()))?;
        let segment = SegmentConfig::default();
        let units: HashMap<String, Vec<FineUnit>> = corpus
            .summaries()
            .map(|s| (s.summary_id.clone(), s.units(&segment)))
            .collect();

        let mut by_key = HashMap::new();
        let mut queues: BTreeMap<usize, Vec<TaskRef>> = BTreeMap::new();
        for (i, a) in spec.assignments.iter().enumerate() {
            if a.mode != spec.mode {
                return Err(invalid(format!("assignment {i} is {:?} in a {:?} project", a.mode, spec.mode)));
            }
            let Some(summary_units) = units.get(&a.summary_id) else {
                return Err(invalid(format!("assignment {i} references unknown summary {}", a.summary_id)));
            };
            if by_key.insert((a.summary_id.clone(), a.annotator_slot), i).is_some() {
                return Err(invalid(format!(
                    "summary {} assigned twice to slot {}",
                    a.summary_id, a.annotator_slot
                )));
            }
            let queue = queues.entry(a.annotator_slot).or_default();
            match spec.mode {
                Mode::Fine => {
                    let known: BTreeSet<usize> = summary_units.iter().map(|u| u.unit_index).collect();
                    let assigned: BTreeSet<usize> = a.unit_indices.iter().copied().collect();
                    if assigned.is_empty() || assigned.len() != a.unit_indices.len() {
                        return Err(invalid(format!("assignment {i} has empty or repeated units")));
                    }
                    if let Some(u) = assigned.iter().find(|u| !known.contains(u)) {
                        return Err(invalid(format!("assignment {i} references unknown unit {u}")));
                    }
                    let of = assigned.len();
                    queue.extend(assigned.into_iter().enumerate().map(|(p, u)| TaskRef {
                        assignment: i,
                        unit_index: Some(u),
                        position: p + 1,
                        of,
                    }));
                }
                Mode::Coarse => {
                    if a.scale.is_none() {
                        return Err(invalid(format!("assignment {i} has no rating scale")));
                    }
                    queue.push(TaskRef {
                        assignment: i,
                        unit_index: None,
                        position: 0,
                        of: 0,
                    });
                }
            }
        }
        // COARSE positions count summaries within the slot.
        for queue in queues.values_mut() {
            let n = queue.len();
            for (p, t) in queue.iter_mut().enumerate() {
                if t.unit_index.is_none() {
                    t.position = p + 1;
                    t.of = n;
                }
            }
        }

        let mut hints = HashMap::new();
        for h in &spec.hints {
            let Some(s) = corpus.summary(&h.summary_id) else {
                return Err(invalid(format!("hints reference unknown summary {}", h.summary_id)));
            };
            let n_sentences = corpus.source_of(s).sentences.len();
            if h.highlights.len() > faithkit_core::align::MAX_HINTS {
                return Err(invalid(format!("more than 5 hints for {}#{}", h.summary_id, h.unit_index)));
            }
            if let Some(bad) = h.highlights.iter().find(|&&x| x >= n_sentences) {
                return Err(invalid(format!("hint sentence {bad} out of range for {}", h.summary_id)));
            }
            hints.insert((h.summary_id.clone(), h.unit_index), h.clone());
        }
        for slot in spec.slot_tokens.keys() {
            if !queues.contains_key(slot) {
                return Err(invalid(format!("token given for unassigned slot {slot}")));
            }
        }

        Ok(Project {
            spec,
            corpus,
            units,
            hints,
            queues,
            by_key,
        })
    }

    pub fn id(&self) -> &str {
        &self.spec.project_id
    }

    pub fn check_slot(&self, slot: usize, token: Option<&str>) -> Result<(), ApiError> {
        if !self.queues.contains_key(&slot) {
            return Err(ApiError::UnknownSlot(slot));
        }
        match self.spec.slot_tokens.get(&slot) {
            Some(expected) if token != Some(expected.as_str()) => Err(ApiError::Forbidden(slot)),
            _ => Ok(()),
        }
    }

    /// First task of the slot, in delivery order, without a judgment.
    pub(crate) fn next_open(&self, slot: usize, judged: impl Fn(&JudgmentKey) -> bool) -> Option<&TaskRef> {
        self.queues.get(&slot)?.iter().find(|t| !judged(&t.key(self)))
    }

    pub(crate) fn view(&self, task: &TaskRef) -> TaskView {
        let a = &self.spec.assignments[task.assignment];
        let summary = self.corpus.summary(&a.summary_id).expect("validated summary");
        let source = self.corpus.source_of(summary);
        let active_span = task.unit_index.map(|u| {
            self.units[&a.summary_id]
                .iter()
                .find(|x| x.unit_index == u)
                .expect("validated unit")
                .span
        });
        let hints = match (task.unit_index, a.hint_mode) {
            (Some(u), HintMode::Algorithmic | HintMode::Gold) => self
                .hints
                .get(&(a.summary_id.clone(), u))
                .map(|h| {
                    h.highlights
                        .iter()
                        .zip(&h.scores)
                        .map(|(&i, &score)| HintView {
                            sentence_index: i,
                            span: source.sentences[i].span,
                            score,
                        })
                        .collect()
                })
                .unwrap_or_default(),
            _ => Vec::new(),
        };
        let instructions = self.spec.instructions.clone().unwrap_or_else(|| {
            match self.spec.mode {
                Mode::Fine => FINE_INSTRUCTIONS,
                Mode::Coarse => COARSE_INSTRUCTIONS,
            }
            .to_string()
        });
        TaskView {
            project_id: self.spec.project_id.clone(),
            mode: self.spec.mode,
            annotator_slot: a.annotator_slot,
            summary_id: a.summary_id.clone(),
            unit_index: task.unit_index,
            summary_text: summary.text.clone(),
            active_span,
            source_text: source.text.clone(),
            hint_mode: a.hint_mode,
            hints,
            scale: a.scale,
            position: Position {
                index: task.position,
                total: task.of,
            },
            instructions,
        }
    }

    /// Checks a submission against the slot's assignment and fills in the
    /// fields the server owns (hint mode, rating scale).
    pub fn admit(&self, judgment: &mut Judgment) -> Result<(), ApiError> {
        let slot = judgment.annotator_slot();
        let Some(&i) = self.by_key.get(&(judgment.summary_id().to_string(), slot)) else {
            return Err(ApiError::Unassigned(format!(
                "summary {} is not assigned to slot {slot}",
                judgment.summary_id()
            )));
        };
        let a = &self.spec.assignments[i];
        match judgment {
            Judgment::Fine(j) => {
                if self.spec.mode != Mode::Fine {
                    return Err(ApiError::WrongMode(self.spec.mode));
                }
                if !a.unit_indices.contains(&j.unit_index) {
                    return Err(ApiError::Unassigned(format!(
                        "unit {} of summary {} is not in slot {slot}'s subset",
                        j.unit_index, j.summary_id
                    )));
                }
                j.hint_mode = a.hint_mode;
            }
            Judgment::Coarse(j) => {
                if self.spec.mode != Mode::Coarse {
                    return Err(ApiError::WrongMode(self.spec.mode));
                }
                j.scale = a.scale.expect("validated scale");
            }
        }
        judgment.validate().map_err(ApiError::from)
    }

    pub(crate) fn progress(&self, judgments: &[Judgment]) -> Progress {
        let judged: HashMap<JudgmentKey, u64> = judgments.iter().map(|j| (j.key(), j.elapsed_ms())).collect();
        let slots = self
            .queues
            .iter()
            .map(|(&slot, queue)| {
                let mut elapsed: Vec<f64> = queue
                    .iter()
                    .filter_map(|t| judged.get(&t.key(self)).map(|&ms| ms as f64))
                    .collect();
                elapsed.sort_by(f64::total_cmp);
                SlotProgress {
                    annotator_slot: slot,
                    judged: elapsed.len(),
                    total: queue.len(),
                    median_elapsed_ms: faithkit_core::stats::median(&elapsed).ok(),
                }
            })
            .collect();
        Progress {
            project_id: self.spec.project_id.clone(),
            slots,
        }
    }
}
