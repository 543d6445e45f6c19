//! Greedy relevance + coverage sentence selection.
//!
//! At every step the selector picks the remaining sentence maximizing
//!
//! ```text
//! Rel(D, S) + alpha * Cov(D, S, selected)
//! ```
//!
//! where `Rel` is the clamped cosine between sentence and document and
//! `Cov` is one of:
//!
//! * **MMR**: minus the mean similarity of `S` to the sentences already
//!   selected (0 before the first pick).
//! * **xDTD**: `sum_k P(S|T_k) P(T_k|D)`, a static score. Every sentence
//!   doubles as a sub-theme `T_k`; `P(S|T_k)` normalizes `Rel(S, T_k)` over
//!   the sentences of the document, `P(T_k|D)` normalizes `Rel(T_k, D)`
//!   over sub-themes.
//! * **J-xDTD**: `sum_k P(S|T_k) P(unselected|T_k) P(T_k|D)`, where the
//!   dissatisfaction `P(unselected|T_k) = prod_{S' selected} (1 - P(S'|T_k))`
//!   shrinks as sub-theme `k` gets covered.
//!
//! Selection stops once the summary holds at least `ceil(ratio * words)`
//! words; the sentence crossing the budget is kept. Ties go to the earlier
//! sentence.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::represent::{Encoder, Representation};
use crate::vecrep::{cosine, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    RelevanceOnly,
    Mmr,
    Xdtd,
    Jxdtd,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::RelevanceOnly,
        Method::Mmr,
        Method::Xdtd,
        Method::Jxdtd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RelevanceOnly => "RELEVANCE_ONLY",
            Method::Mmr => "MMR",
            Method::Xdtd => "XDTD",
            Method::Jxdtd => "JXDTD",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Method> for String {
    fn from(v: Method) -> String {
        v.name().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "RELEVANCEONLY" | "RELEVANCE" | "REL" => Ok(Method::RelevanceOnly),
            "MMR" => Ok(Method::Mmr),
            "XDTD" => Ok(Method::Xdtd),
            "JXDTD" => Ok(Method::Jxdtd),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorConfig {
    pub method: Method,
    pub alpha: f64,
    /// Summary length as a fraction of document words.
    pub ratio: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            method: Method::RelevanceOnly,
            alpha: 1.0,
            ratio: 0.10,
        }
    }
}

impl SelectorConfig {
    pub fn new(method: Method, alpha: f64) -> Self {
        SelectorConfig {
            method,
            alpha,
            ..SelectorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::Config(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::Config(format!(
                "ratio must be in (0, 1], got {}",
                self.ratio
            )));
        }
        Ok(())
    }
}

/// `ceil(ratio * words)`, at least 1. Products within 1e-9 above an integer
/// count as that integer so that e.g. `0.1 * 30` gives 3.
pub fn budget_words(ratio: f64, words: usize) -> usize {
    ((ratio * words as f64 - 1e-9).ceil() as usize).max(1)
}

/// A document together with its sentence and document vectors and the
/// pairwise similarities the selectors need. Sentences double as
/// sub-themes.
#[derive(Debug, Clone)]
pub struct DocView<'a> {
    doc: &'a Document,
    sent_vecs: Vec<Vector>,
    doc_vec: Vector,
    relevance: Vec<f64>,
    similarity: Vec<Vec<f64>>,
}

impl<'a> DocView<'a> {
    /// Builds a view from explicit vectors. All vectors are unit-normalized
    /// here.
    pub fn from_vectors(
        doc: &'a Document,
        sent_vecs: Vec<Vector>,
        doc_vec: Vector,
    ) -> Result<Self> {
        if doc.is_empty() {
            return Err(Error::Empty("document has no sentences"));
        }
        if sent_vecs.len() != doc.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} sentence vectors for {} sentences",
                sent_vecs.len(),
                doc.len()
            )));
        }
        let sent_vecs: Vec<Vector> = sent_vecs.iter().map(Vector::normalized).collect();
        let doc_vec = doc_vec.normalized();
        let relevance = sent_vecs
            .iter()
            .map(|s| cosine(s, &doc_vec))
            .collect::<Result<Vec<_>>>()?;
        let k = sent_vecs.len();
        let mut similarity = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let c = cosine(&sent_vecs[i], &sent_vecs[j])?;
                similarity[i][j] = c;
                similarity[j][i] = c;
            }
        }
        Ok(DocView {
            doc,
            sent_vecs,
            doc_vec,
            relevance,
            similarity,
        })
    }

    /// Builds a view with the given representation.
    pub fn build(
        doc: &'a Document,
        doc_index: usize,
        repr: Representation,
        encoder: &Encoder<'_>,
    ) -> Result<Self> {
        let (sents, doc_vec) = encoder.encode(doc, doc_index, repr)?;
        Self::from_vectors(doc, sents, doc_vec)
    }

    pub fn document(&self) -> &Document {
        self.doc
    }

    /// Number of sentences, which is also the number of sub-themes.
    pub fn len(&self) -> usize {
        self.sent_vecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sent_vecs.is_empty()
    }

    pub fn sentence_vectors(&self) -> &[Vector] {
        &self.sent_vecs
    }

    pub fn subthemes(&self) -> &[Vector] {
        &self.sent_vecs
    }

    pub fn document_vector(&self) -> &Vector {
        &self.doc_vec
    }

    /// `Rel(S_s, D)` for every sentence.
    pub fn relevance(&self) -> &[f64] {
        &self.relevance
    }

    /// `Rel(S_i, S_j)`; symmetric.
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.similarity[i][j]
    }
}

/// Sentences ordered by relevance to the document, earlier sentence first
/// on ties.
pub fn rank_by_relevance(view: &DocView<'_>) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = view.relevance.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// `P(S_s | T_k)` as `[s][k]`. Each column is normalized over the document's
/// sentences; a column with zero mass stays zero.
pub fn sentence_given_subtheme(view: &DocView<'_>) -> Vec<Vec<f64>> {
    let k = view.len();
    let mut p = vec![vec![0.0; k]; k];
    for t in 0..k {
        let mass: f64 = (0..k).map(|s| view.similarity(s, t)).sum();
        if mass > 0.0 {
            for (s, row) in p.iter_mut().enumerate() {
                row[t] = view.similarity(s, t) / mass;
            }
        }
    }
    p
}

/// `P(T_k | D)`, relevance of each sub-theme normalized to sum to 1. Falls
/// back to uniform (with a warning) when every sub-theme has zero relevance.
pub fn subtheme_given_doc(view: &DocView<'_>) -> Vec<f64> {
    let mass: f64 = view.relevance.iter().sum();
    let k = view.len();
    if mass > 0.0 {
        view.relevance.iter().map(|r| r / mass).collect()
    } else {
        log::warn!(
            "document `{}`: no sub-theme is relevant to the document, using uniform P(T|D)",
            view.doc.id
        );
        vec![1.0 / k as f64; k]
    }
}

/// Sub-theme probabilities shared by xDTD and J-xDTD.
#[derive(Debug, Clone, PartialEq)]
pub struct SubThemeModel {
    /// `[s][k] = P(S_s | T_k)`
    pub p_s_given_t: Vec<Vec<f64>>,
    /// `[k] = P(T_k | D)`
    pub p_t_given_d: Vec<f64>,
}

impl SubThemeModel {
    pub fn estimate(view: &DocView<'_>) -> Self {
        SubThemeModel {
            p_s_given_t: sentence_given_subtheme(view),
            p_t_given_d: subtheme_given_doc(view),
        }
    }

    pub fn len(&self) -> usize {
        self.p_t_given_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_t_given_d.is_empty()
    }
}

/// The growing summary during greedy selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub selected: Vec<usize>,
    pub remaining: BTreeSet<usize>,
    /// `P(unselected | T_k)` per sub-theme; all ones until something is
    /// selected. Only maintained for J-xDTD.
    pub dissatisfaction: Vec<f64>,
    pub words_used: usize,
}

impl SelectionState {
    pub fn new(num_sentences: usize) -> Self {
        SelectionState {
            selected: Vec::new(),
            remaining: (0..num_sentences).collect(),
            dissatisfaction: vec![1.0; num_sentences],
            words_used: 0,
        }
    }

    fn check_candidate(&self, s: usize) -> Result<()> {
        if self.remaining.contains(&s) {
            Ok(())
        } else if self.selected.contains(&s) {
            Err(Error::AlreadySelected(s))
        } else {
            Err(Error::OutOfRange {
                index: s,
                len: self.selected.len() + self.remaining.len(),
            })
        }
    }
}

/// Negative mean similarity of `s` to the selected sentences; 0 when
/// nothing is selected yet.
pub fn cov_mmr(view: &DocView<'_>, state: &SelectionState, s: usize) -> Result<f64> {
    state.check_candidate(s)?;
    if state.selected.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = state.selected.iter().map(|&t| view.similarity(t, s)).sum();
    Ok(-total / state.selected.len() as f64)
}

pub fn cov_xdtd(model: &SubThemeModel, s: usize) -> f64 {
    model.p_s_given_t[s]
        .iter()
        .zip(&model.p_t_given_d)
        .map(|(p, w)| p * w)
        .sum()
}

/// `prod_{S' in selected} (1 - P(S'|T_k))` for every sub-theme `k`.
pub fn dissatisfaction(model: &SubThemeModel, selected: &[usize]) -> Vec<f64> {
    let mut d = vec![1.0; model.len()];
    for &s in selected {
        update_dissatisfaction(&mut d, model, s);
    }
    d
}

fn update_dissatisfaction(d: &mut [f64], model: &SubThemeModel, picked: usize) {
    for (dk, p) in d.iter_mut().zip(&model.p_s_given_t[picked]) {
        *dk *= 1.0 - p;
    }
}

pub fn cov_jxdtd(model: &SubThemeModel, state: &SelectionState, s: usize) -> Result<f64> {
    state.check_candidate(s)?;
    Ok(model.p_s_given_t[s]
        .iter()
        .zip(&state.dissatisfaction)
        .zip(&model.p_t_given_d)
        .map(|((p, d), w)| p * d * w)
        .sum())
}

/// Result of summarizing one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Sentence indices in pick order.
    pub selected: Vec<usize>,
    /// Combined score of each pick.
    pub scores: Vec<f64>,
    pub budget_words: usize,
    pub words_used: usize,
}

/// Step-wise greedy selector. [`greedy_select`] drives it to completion;
/// stepping by hand exposes the intermediate [`SelectionState`].
pub struct Selector<'v, 'a> {
    view: &'v DocView<'a>,
    cfg: SelectorConfig,
    model: Option<SubThemeModel>,
    state: SelectionState,
    budget: usize,
    /// Precomputed order for the one-pass xDTD ranking.
    static_order: Vec<(usize, f64)>,
}

impl<'v, 'a> Selector<'v, 'a> {
    pub fn new(view: &'v DocView<'a>, cfg: SelectorConfig) -> Result<Self> {
        cfg.validate()?;
        if view.is_empty() {
            return Err(Error::Empty("document has no sentences"));
        }
        let model = matches!(cfg.method, Method::Xdtd | Method::Jxdtd)
            .then(|| SubThemeModel::estimate(view));
        let static_order = match (&model, cfg.method) {
            (Some(m), Method::Xdtd) => {
                let mut order: Vec<(usize, f64)> = (0..view.len())
                    .map(|s| (s, view.relevance[s] + cfg.alpha * cov_xdtd(m, s)))
                    .collect();
                order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                order.reverse();
                order
            }
            _ => Vec::new(),
        };
        Ok(Selector {
            view,
            cfg,
            model,
            state: SelectionState::new(view.len()),
            budget: budget_words(cfg.ratio, view.doc.word_count()),
            static_order,
        })
    }

    pub fn state(&self) -> &SelectionState {
        &self.state
    }

    pub fn subtheme_model(&self) -> Option<&SubThemeModel> {
        self.model.as_ref()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Coverage term for a remaining candidate under the configured method.
    pub fn coverage(&self, s: usize) -> Result<f64> {
        match self.cfg.method {
            Method::RelevanceOnly => {
                self.state.check_candidate(s)?;
                Ok(0.0)
            }
            Method::Mmr => cov_mmr(self.view, &self.state, s),
            Method::Xdtd => {
                self.state.check_candidate(s)?;
                Ok(cov_xdtd(self.model.as_ref().expect("model for xDTD"), s))
            }
            Method::Jxdtd => cov_jxdtd(
                self.model.as_ref().expect("model for J-xDTD"),
                &self.state,
                s,
            ),
        }
    }

    pub fn is_done(&self) -> bool {
        self.state.remaining.is_empty() || self.state.words_used >= self.budget
    }

    /// Picks the next sentence, or `None` once the budget is met.
    pub fn step(&mut self) -> Option<(usize, f64)> {
        if self.is_done() {
            return None;
        }
        let (pick, score) = if self.cfg.method == Method::Xdtd {
            self.static_order.pop().expect("remaining is non-empty")
        } else {
            let mut best: Option<(usize, f64)> = None;
            for &s in &self.state.remaining {
                let cov = self.coverage(s).expect("candidate is remaining");
                let score = self.view.relevance[s] + self.cfg.alpha * cov;
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((s, score));
                }
            }
            best.expect("remaining is non-empty")
        };
        self.state.remaining.remove(&pick);
        self.state.selected.push(pick);
        self.state.words_used += self.view.doc.sentences[pick].len();
        if self.cfg.method == Method::Jxdtd {
            let model = self.model.as_ref().expect("model for J-xDTD");
            update_dissatisfaction(&mut self.state.dissatisfaction, model, pick);
        }
        Some((pick, score))
    }

    pub fn finish(mut self) -> Summary {
        let mut scores = Vec::new();
        while let Some((_, score)) = self.step() {
            scores.push(score);
        }
        Summary {
            selected: self.state.selected,
            scores,
            budget_words: self.budget,
            words_used: self.state.words_used,
        }
    }
}

pub fn greedy_select(view: &DocView<'_>, cfg: SelectorConfig) -> Result<Summary> {
    Ok(Selector::new(view, cfg)?.finish())
}
