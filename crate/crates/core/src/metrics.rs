//! Lexical reference metrics: ROUGE-1/2/L and bigram extractiveness.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::text::{tokenize, TokenizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    #[serde(rename = "rouge1")]
    One,
    #[serde(rename = "rouge2")]
    Two,
    #[serde(rename = "rougeL")]
    L,
}

impl std::fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RougeVariant::One => "rouge1",
            RougeVariant::Two => "rouge2",
            RougeVariant::L => "rougeL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub variant: RougeVariant,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(variant: RougeVariant, overlap: usize, n_candidate: usize, n_reference: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(overlap, n_candidate);
        let recall = ratio(overlap, n_reference);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore {
            variant,
            precision,
            recall,
            f1,
        }
    }
}

fn ngrams(tokens: &[String], n: usize) -> Vec<&[String]> {
    if tokens.len() < n {
        Vec::new()
    } else {
        tokens.windows(n).collect()
    }
}

fn counts<'a>(grams: &[&'a [String]]) -> HashMap<&'a [String], usize> {
    let mut m = HashMap::new();
    for g in grams {
        *m.entry(*g).or_insert(0) += 1;
    }
    m
}

/// Clipped n-gram overlap for `n` in {1, 2}. Tokens are lowercased and
/// split on non-alphanumerics; stopwords are kept.
///
/// # Panics
/// If `n` is not 1 or 2.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> RougeScore {
    let variant = match n {
        1 => RougeVariant::One,
        2 => RougeVariant::Two,
        _ => panic!("rouge_n supports n = 1 or 2, got {n}"),
    };
    let c = tokenize(candidate, TokenizerConfig::PLAIN);
    let r = tokenize(reference, TokenizerConfig::PLAIN);
    let cg = ngrams(&c, n);
    let rg = ngrams(&r, n);
    let rc = counts(&rg);
    let overlap = counts(&cg)
        .into_iter()
        .map(|(g, k)| k.min(rc.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(variant, overlap, cg.len(), rg.len())
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest-common-subsequence F-measure.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let c = tokenize(candidate, TokenizerConfig::PLAIN);
    let r = tokenize(reference, TokenizerConfig::PLAIN);
    RougeScore::from_counts(RougeVariant::L, lcs_len(&c, &r), c.len(), r.len())
}

pub fn rouge(candidate: &str, reference: &str, variant: RougeVariant) -> RougeScore {
    match variant {
        RougeVariant::One => rouge_n(candidate, reference, 1),
        RougeVariant::Two => rouge_n(candidate, reference, 2),
        RougeVariant::L => rouge_l(candidate, reference),
    }
}

/// Fraction of the summary's bigram occurrences that also occur in the
/// source. `None` when the summary has fewer than two tokens.
pub fn extractiveness(summary: &str, source: &str) -> Option<f64> {
    let s = tokenize(summary, TokenizerConfig::PLAIN);
    let d = tokenize(source, TokenizerConfig::PLAIN);
    let sg = ngrams(&s, 2);
    if sg.is_empty() {
        return None;
    }
    let dg: std::collections::HashSet<&[String]> = ngrams(&d, 2).into_iter().collect();
    let hit = sg.iter().filter(|g| dg.contains(*g)).count();
    Some(hit as f64 / sg.len() as f64)
}
