//! Sentence splitting and clause-level unit segmentation.
//!
//! Units are produced by pure pattern rules so that the same input always
//! yields the same units:
//!
//! * a comma, semicolon or dash immediately followed by a listed conjunction
//!   or subordinator opens a new unit (the delimiter stays with the left unit);
//! * a semicolon always opens a new unit;
//! * fragments with fewer than `min_unit_tokens` words are merged into the
//!   preceding unit (or the following one when they open the sentence).

use serde::{Deserialize, Serialize};

use crate::text::{self, Span};

pub const DEFAULT_CONJUNCTIONS: &[&str] = &[
    "and", "but", "or", "nor", "so", "yet", "while", "whereas", "because", "although", "which",
    "who", "where", "when",
];

pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "al.", "approx.", "capt.", "cf.", "co.", "col.", "dept.", "dr.", "e.g.", "eq.", "fig.",
    "figs.", "gen.", "i.e.", "inc.", "jr.", "lt.", "ltd.", "mr.", "mrs.", "ms.", "mt.", "no.",
    "pp.", "prof.", "ref.", "rev.", "sgt.", "sr.", "st.", "vol.", "vs.",
];

pub const DEFAULT_MIN_UNIT_TOKENS: usize = 4;

/// Segmentation rules. Loadable from TOML; omitted keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub version: String,
    pub conjunctions: Vec<String>,
    pub min_unit_tokens: usize,
    pub abbreviations: Vec<String>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            version: "1".to_string(),
            conjunctions: DEFAULT_CONJUNCTIONS.iter().map(|s| s.to_string()).collect(),
            min_unit_tokens: DEFAULT_MIN_UNIT_TOKENS,
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SegmentConfig {
    pub fn from_toml(source: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(source)
    }

    fn is_conjunction(&self, word: &str) -> bool {
        self.conjunctions.iter().any(|c| c.eq_ignore_ascii_case(word))
    }

    fn is_abbreviation(&self, token: &str) -> bool {
        self.abbreviations
            .iter()
            .any(|a| a.eq_ignore_ascii_case(token))
    }
}

/// A clause-level summary unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineUnit {
    pub summary_id: String,
    pub unit_index: usize,
    pub text: String,
    pub span: Span,
}

const TERMINATORS: &[char] = &['.', '?', '!'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}', '\u{bb}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '{', '\u{201c}', '\u{2018}', '\u{ab}'];

/// Splits `text` into sentences with the default abbreviation list.
pub fn split_sentences(text: &str) -> Vec<(String, Span)> {
    SegmentConfig::default().split_sentences(text)
}

impl SegmentConfig {
    /// Sentences with char spans into `text`. Spans are trimmed of whitespace;
    /// the gaps between consecutive spans hold only whitespace.
    pub fn split_sentences(&self, text: &str) -> Vec<(String, Span)> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        let mut out = Vec::new();
        let mut push = |span: Span| {
            let span = text::trim_span(&chars, span);
            if !span.is_empty() {
                out.push((chars[span.start..span.end].iter().collect(), span));
            }
        };

        let mut start = 0;
        let mut i = 0;
        while i < n {
            let c = chars[i];
            if TERMINATORS.contains(&c) {
                let mut j = i + 1;
                while j < n && TERMINATORS.contains(&chars[j]) {
                    j += 1;
                }
                while j < n && CLOSERS.contains(&chars[j]) {
                    j += 1;
                }
                let at_break = j == n || chars[j].is_whitespace();
                let abbreviation = c == '.' && j == i + 1 && self.ends_with_abbreviation(&chars, i);
                if at_break && !abbreviation {
                    push(Span::new(start, j));
                    start = j;
                    i = j;
                    continue;
                }
            } else if c == '\n' && blank_line_follows(&chars, i) {
                push(Span::new(start, i));
                start = i;
            }
            i += 1;
        }
        push(Span::new(start, n));
        out
    }

    /// Whether the word ending at the period `chars[period]` is a listed
    /// abbreviation.
    fn ends_with_abbreviation(&self, chars: &[char], period: usize) -> bool {
        let mut k = period;
        while k > 0 && !chars[k - 1].is_whitespace() {
            k -= 1;
        }
        while k < period && OPENERS.contains(&chars[k]) {
            k += 1;
        }
        if k == period {
            return false;
        }
        let token: String = chars[k..=period].iter().collect();
        self.is_abbreviation(&token)
    }

    /// Splits one sentence into units. `sentence_span` locates the sentence in
    /// the summary text; returned spans are relative to the summary text and
    /// unit indices start at zero.
    pub fn segment_units(&self, summary_id: &str, sentence: &str, sentence_span: Span) -> Vec<FineUnit> {
        let chars: Vec<char> = sentence.chars().collect();
        let mut cuts = self.split_points(&chars);
        cuts.push(chars.len());

        let mut fragments: Vec<Span> = Vec::new();
        let mut prev = 0;
        for cut in cuts {
            fragments.push(Span::new(prev, cut));
            prev = cut;
        }

        let short = |span: &Span| {
            let words = word_count(&chars[span.start..span.end]);
            words == 0 || words < self.min_unit_tokens
        };

        let mut merged: Vec<Span> = Vec::new();
        for frag in fragments {
            match merged.last_mut() {
                Some(last) if short(&frag) => last.end = frag.end,
                _ => merged.push(frag),
            }
        }
        if merged.len() > 1 && short(&merged[0]) {
            let first = merged.remove(0);
            merged[0].start = first.start;
        }

        merged
            .into_iter()
            .map(|raw| text::trim_span(&chars, raw))
            .filter(|span| !span.is_empty())
            .enumerate()
            .map(|(unit_index, span)| FineUnit {
                summary_id: summary_id.to_string(),
                unit_index,
                text: chars[span.start..span.end].iter().collect(),
                span: span.shift(sentence_span.start),
            })
            .collect()
    }

    /// Char offsets (exclusive ends of delimiters) where a new unit starts.
    fn split_points(&self, chars: &[char]) -> Vec<usize> {
        let n = chars.len();
        let mut cuts = Vec::new();
        let mut i = 0;
        while i < n {
            let delim_end = match chars[i] {
                ',' | ';' | '\u{2014}' | '\u{2013}' => Some(i + 1),
                '-' if i + 1 < n && chars[i + 1] == '-' => Some(i + 2),
                '-' if i > 0 && chars[i - 1].is_whitespace() && i + 1 < n && chars[i + 1].is_whitespace() => {
                    Some(i + 1)
                }
                _ => None,
            };
            if let Some(end) = delim_end {
                let bare_semicolon = chars[i] == ';';
                let word = next_word(chars, end);
                if (bare_semicolon || self.is_conjunction(&word)) && has_content(&chars[end..]) {
                    cuts.push(end);
                }
                i = end;
            } else {
                i += 1;
            }
        }
        cuts
    }

    /// Units for a whole summary text, indexed in reading order.
    pub fn segment_summary(&self, summary_id: &str, text: &str) -> Vec<FineUnit> {
        let mut units = Vec::new();
        for (sentence, span) in self.split_sentences(text) {
            for mut unit in self.segment_units(summary_id, &sentence, span) {
                unit.unit_index = units.len();
                units.push(unit);
            }
        }
        units
    }
}

fn blank_line_follows(chars: &[char], newline: usize) -> bool {
    chars[newline + 1..]
        .iter()
        .take_while(|c| c.is_whitespace())
        .any(|&c| c == '\n')
}

fn next_word(chars: &[char], from: usize) -> String {
    chars[from..]
        .iter()
        .skip_while(|c| c.is_whitespace())
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase()
}

fn has_content(chars: &[char]) -> bool {
    chars.iter().any(|c| c.is_alphanumeric())
}

/// Whitespace-separated tokens that carry at least one alphanumeric char.
pub fn word_count(chars: &[char]) -> usize {
    let s: String = chars.iter().collect();
    s.split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}
