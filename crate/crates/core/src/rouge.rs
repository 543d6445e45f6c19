//! ROUGE-1, ROUGE-2 and ROUGE-L on raw tokens (no stemming, no stopword
//! removal). Multi-reference scores are the arithmetic mean of the
//! per-reference scores.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{ReferenceSummary, Token};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl RougeScore {
    /// Builds a score from an overlap count and the two denominators. Empty
    /// denominators give 0 for that component.
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        RougeScore {
            precision,
            recall,
            f: f_measure(precision, recall),
        }
    }

    fn mean(scores: impl ExactSizeIterator<Item = RougeScore>) -> Self {
        let n = scores.len() as f64;
        let sum = scores.fold(RougeScore::default(), |acc, s| RougeScore {
            precision: acc.precision + s.precision,
            recall: acc.recall + s.recall,
            f: acc.f + s.f,
        });
        RougeScore {
            precision: sum.precision / n,
            recall: sum.recall / n,
            f: sum.f / n,
        }
    }
}

/// Balanced harmonic mean; 0 when both inputs are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> Result<HashMap<Vec<&str>, usize>> {
    if n == 0 {
        return Err(Error::Config("n-gram order must be >= 1".into()));
    }
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let gram: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Clipped n-gram overlap. Panics only if `n == 0`.
pub fn rouge_n<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    let cand = ngram_counts(candidate, n).expect("n >= 1");
    let refs = ngram_counts(reference, n).expect("n >= 1");
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(overlap, cand.values().sum(), refs.values().sum())
}

/// Length of a longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> RougeScore {
    let a: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let b: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    RougeScore::from_counts(lcs_len(&a, &b), a.len(), b.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeTriple {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
}

impl RougeTriple {
    pub fn compute<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> Self {
        RougeTriple {
            rouge1: rouge_n(candidate, reference, 1),
            rouge2: rouge_n(candidate, reference, 2),
            rouge_l: rouge_l(candidate, reference),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeReport {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
    pub per_reference: Vec<RougeTriple>,
}

/// Scores a summary (sentences in pick order) against every reference and
/// averages.
pub fn evaluate(summary: &[&[Token]], references: &[ReferenceSummary]) -> Result<RougeReport> {
    if references.is_empty() {
        return Err(Error::Empty("no reference summaries"));
    }
    let candidate: Vec<&Token> = summary.iter().flat_map(|s| s.iter()).collect();
    let per_reference: Vec<RougeTriple> = references
        .iter()
        .map(|r| {
            let reference: Vec<&Token> = r.sentences.iter().flatten().collect();
            RougeTriple::compute(&candidate, &reference)
        })
        .collect();
    Ok(RougeReport {
        rouge1: RougeScore::mean(per_reference.iter().map(|t| t.rouge1)),
        rouge2: RougeScore::mean(per_reference.iter().map(|t| t.rouge2)),
        rouge_l: RougeScore::mean(per_reference.iter().map(|t| t.rouge_l)),
        per_reference,
    })
}
