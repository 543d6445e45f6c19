//! Built-in acceptance suite, run by `covsum selftest`.
//!
//! Each criterion returns a [`CriterionResult`]; [`run`] executes all of
//! them. Reports contain no timings so that two runs render identically.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{build_vocabulary, load_corpus, Document};
use crate::coverage::{DocView, Method, Selector, SelectorConfig, SubThemeModel};
use crate::embed::{EmbeddingModel, ModelKind, TargetGradient, TrainConfig, TrainingParagraph};
use crate::error::Result;
use crate::harness::{self, ExperimentConfig};
use crate::represent::{Encoder, Representation};
use crate::rouge;
use crate::synthetic;
use crate::vecrep::{DenseVector, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub number: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Appends a note when a time limit was missed.
fn timed(detail: String, elapsed: Duration, limit_secs: u64) -> (bool, String) {
    if elapsed < Duration::from_secs(limit_secs) {
        (true, detail)
    } else {
        (
            false,
            format!("{detail}; exceeded the {limit_secs} s time limit"),
        )
    }
}

impl CriterionResult {
    fn new(number: u8, name: &'static str, passed: bool, detail: String) -> Self {
        CriterionResult {
            number,
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {} ({}): {} - {}",
            self.number,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub criteria: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            writeln!(s, "{}", c.line()).expect("writing to a String");
        }
        let passed = self.criteria.iter().filter(|c| c.passed).count();
        writeln!(s, "{passed}/{} criteria passed", self.criteria.len())
            .expect("writing to a String");
        s
    }
}

/// Inputs shared by the criteria.
#[derive(Debug, Clone)]
pub struct Selftest {
    pub seed: u64,
    /// Bundled synthetic corpus unless overridden.
    pub corpus: Vec<Document>,
    pub corpus_path: Option<PathBuf>,
    /// The 50 small random documents used by the oracle checks.
    pub random_docs: Vec<Document>,
}

pub const RANDOM_DOCS: usize = 50;
const ALPHAS: [f64; 4] = [0.0, 0.5, 1.0, 5.0];

/// Random documents of at most 8 sentences over a 12-term vocabulary.
pub fn random_documents(seed: u64, count: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(11);
    (0..count)
        .map(|d| {
            let k = rng.gen_range(1..=8);
            let sentences: Vec<String> = (0..k)
                .map(|_| {
                    let n = rng.gen_range(1..=6);
                    (0..n)
                        .map(|_| format!("t{}", rng.gen_range(0..12)))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
            Document::from_texts(&format!("random-{d:02}"), &refs, &[&refs[..1]])
                .expect("non-empty sentences")
        })
        .collect()
}

impl Selftest {
    pub fn new(seed: u64, corpus_path: Option<PathBuf>) -> Result<Self> {
        let corpus = match &corpus_path {
            Some(p) => load_corpus(p)?,
            None => synthetic::bundled()?,
        };
        Ok(Selftest {
            seed,
            corpus,
            corpus_path,
            random_docs: random_documents(seed, RANDOM_DOCS),
        })
    }

    pub fn criterion(&self, number: u8) -> Result<CriterionResult> {
        match number {
            1 => self.greedy_oracle(),
            2 => self.jxdtd_first_pick(),
            3 => self.probability_invariants(),
            4 => Ok(rouge_golden()),
            5 => Ok(self.gradient_check()),
            6 => Ok(self.embedding_symmetries()),
            7 => duplicate_suppression(),
            8 => self.synthetic_direction(),
            9 => self.determinism(),
            _ => Err(crate::Error::Config(format!("no criterion {number}"))),
        }
    }

    fn run_range(&self, numbers: impl Iterator<Item = u8>) -> Result<SelftestReport> {
        let criteria = numbers.map(|n| self.criterion(n)).collect::<Result<_>>()?;
        Ok(SelftestReport { criteria })
    }

    pub fn run(&self) -> Result<SelftestReport> {
        self.run_range(1..=9)
    }

    fn greedy_oracle(&self) -> Result<CriterionResult> {
        let start = Instant::now();
        let docs = &self.random_docs;
        let vocab = build_vocabulary(docs)?;
        let encoder = Encoder::bow_only(&vocab);
        let corpus = oracle::Corpus::new(docs);
        let mut runs = 0;
        let mut mismatches = Vec::new();
        for (i, doc) in docs.iter().enumerate() {
            let view = DocView::build(doc, i, Representation::Bow, &encoder)?;
            for method in [Method::Mmr, Method::Xdtd, Method::Jxdtd] {
                for alpha in ALPHAS {
                    for (num, den) in [(1, 1), (3, 10)] {
                        let cfg = SelectorConfig {
                            method,
                            alpha,
                            ratio: num as f64 / den as f64,
                        };
                        let got = pick_sequence(&view, cfg)?;
                        let want = oracle::select(doc, &corpus, method, alpha, (num, den));
                        runs += 1;
                        if got != want {
                            mismatches.push(format!(
                                "{} {method} a={alpha}: {got:?} vs {want:?}",
                                doc.id
                            ));
                        }
                    }
                }
            }
        }
        let detail = match mismatches.first() {
            None => format!(
                "{runs} selections over {} documents match the brute-force oracle",
                docs.len()
            ),
            Some(m) => format!(
                "{} of {runs} selections differ, first: {m}",
                mismatches.len()
            ),
        };
        let (in_time, detail) = timed(detail, start.elapsed(), 10);
        Ok(CriterionResult::new(
            1,
            "greedy step oracle",
            in_time && mismatches.is_empty(),
            detail,
        ))
    }

    fn jxdtd_first_pick(&self) -> Result<CriterionResult> {
        let vocab = build_vocabulary(&self.random_docs)?;
        let encoder = Encoder::bow_only(&vocab);
        let mut differ = Vec::new();
        for (i, doc) in self.random_docs.iter().enumerate() {
            let view = DocView::build(doc, i, Representation::Bow, &encoder)?;
            for alpha in ALPHAS {
                let first = |method| -> Result<Option<usize>> {
                    Ok(Selector::new(&view, SelectorConfig::new(method, alpha))?
                        .step()
                        .map(|(s, _)| s))
                };
                if first(Method::Xdtd)? != first(Method::Jxdtd)? {
                    differ.push(format!("{} a={alpha}", doc.id));
                }
            }
        }
        let detail = if differ.is_empty() {
            format!(
                "first picks agree on {} documents x {} alphas",
                self.random_docs.len(),
                ALPHAS.len()
            )
        } else {
            format!("first picks differ on {}", differ.join(", "))
        };
        Ok(CriterionResult::new(
            2,
            "J-xDTD reduces to xDTD",
            differ.is_empty(),
            detail,
        ))
    }

    fn probability_invariants(&self) -> Result<CriterionResult> {
        let mut problems = Vec::new();
        let mut checked = 0;
        for docs in [&self.corpus, &self.random_docs] {
            let vocab = build_vocabulary(docs)?;
            let encoder = Encoder::bow_only(&vocab);
            for (i, doc) in docs.iter().enumerate() {
                let view = DocView::build(doc, i, Representation::Bow, &encoder)?;
                checked += 1;
                if let Err(e) = check_subtheme_model(&SubThemeModel::estimate(&view)) {
                    problems.push(format!("{}: {e}", doc.id));
                }
                for method in [Method::Xdtd, Method::Jxdtd] {
                    let cfg = SelectorConfig {
                        method,
                        alpha: 1.0,
                        ratio: 1.0,
                    };
                    if let Err(e) = check_selection_trace(&view, cfg) {
                        problems.push(format!("{} {method}: {e}", doc.id));
                    }
                }
            }
        }
        let detail = match problems.first() {
            None => format!("{checked} documents satisfy all probability invariants"),
            Some(p) => format!("{} violations, first: {p}", problems.len()),
        };
        Ok(CriterionResult::new(
            3,
            "probability invariants",
            problems.is_empty(),
            detail,
        ))
    }

    fn gradient_check(&self) -> CriterionResult {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(12);
        let mut worst: f64 = 0.0;
        for m in 0..20 {
            let kind = if m % 2 == 0 {
                ModelKind::Dm
            } else {
                ModelKind::Dbow
            };
            let case = GradCase::random(&mut rng, kind);
            worst = worst.max(case.max_relative_error());
        }
        let (in_time, detail) = timed(
            format!("20 models (10 DM, 10 DBOW), max relative error {worst:.2e}"),
            start.elapsed(),
            5,
        );
        CriterionResult::new(
            5,
            "embedding gradient check",
            in_time && worst < 1e-4,
            detail,
        )
    }

    fn embedding_symmetries(&self) -> CriterionResult {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(13);
        let mut failures = Vec::new();
        for trial in 0..20 {
            let case = GradCase::random(&mut rng, ModelKind::Dbow);
            if !case.dbow_permutation_invariant(&mut rng) {
                failures.push(format!("DBOW permutation, trial {trial}"));
            }
            let case = GradCase::random(&mut rng, ModelKind::Dbow);
            if !case.dm_zero_context_matches_dbow() {
                failures.push(format!("DM context 0, trial {trial}"));
            }
        }
        let detail = if failures.is_empty() {
            "DBOW objective permutation-invariant and zero-context DM predictors equal DBOW on 20 trials each".into()
        } else {
            failures.join(", ")
        };
        CriterionResult::new(
            6,
            "DBOW invariance and DM degenerate case",
            failures.is_empty(),
            detail,
        )
    }

    fn synthetic_direction(&self) -> Result<CriterionResult> {
        let start = Instant::now();
        let cfg = ExperimentConfig {
            corpus: self.corpus_path.clone(),
            representations: vec![Representation::Bow],
            methods: vec![Method::RelevanceOnly, Method::Xdtd, Method::Jxdtd],
            alpha: 1.0,
            ratio: 0.10,
            seed: self.seed,
            ..ExperimentConfig::default()
        };
        let vocab = build_vocabulary(&self.corpus)?;
        let records = harness::summarize(&self.corpus, &Encoder::bow_only(&vocab), &cfg)?;
        let eval = harness::evaluate(&self.corpus, &records)?;
        let r1 = |m| {
            eval.row(m, Representation::Bow)
                .map(|r| r.rouge1_f)
                .unwrap_or(f64::NAN)
        };
        let (rel, x, j) = (
            r1(Method::RelevanceOnly),
            r1(Method::Xdtd),
            r1(Method::Jxdtd),
        );
        let (in_time, detail) = timed(
            format!(
                "ROUGE-1 F over {} documents: RELEVANCE_ONLY {rel:.6}, XDTD {x:.6} ({:+.6}), JXDTD {j:.6} ({:+.6})",
                self.corpus.len(),
                x - rel,
                j - rel
            ),
            start.elapsed(),
            30,
        );
        Ok(CriterionResult::new(
            8,
            "synthetic-corpus direction",
            in_time && x > rel && j > rel,
            detail,
        ))
    }

    fn determinism(&self) -> Result<CriterionResult> {
        let first = self.run_range(1..=8)?.render();
        let second = self.run_range(1..=8)?.render();
        let grid_cfg = ExperimentConfig {
            corpus: self.corpus_path.clone(),
            seed: self.seed,
            embed: TrainConfig {
                dim: 16,
                epochs: 5,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let grid = || -> Result<String> {
            let out = harness::run_grid(&grid_cfg)?;
            Ok(format!(
                "{}{}{}",
                out.summaries_jsonl()?,
                out.evaluation.to_tsv(),
                out.evaluation.documents_jsonl()?
            ))
        };
        let (g1, g2) = (grid()?, grid()?);
        let passed = first == second && g1 == g2;
        Ok(CriterionResult::new(
            9,
            "determinism",
            passed,
            format!(
                "selftest reports {}, full grid outputs ({} bytes) {}",
                if first == second {
                    "identical"
                } else {
                    "differ"
                },
                g1.len(),
                if g1 == g2 { "identical" } else { "differ" }
            ),
        ))
    }
}

/// Runs the whole suite.
pub fn run(seed: u64, corpus: Option<PathBuf>) -> Result<SelftestReport> {
    Selftest::new(seed, corpus)?.run()
}

fn pick_sequence(view: &DocView<'_>, cfg: SelectorConfig) -> Result<Vec<usize>> {
    let mut sel = Selector::new(view, cfg)?;
    let mut picks = Vec::new();
    while let Some((s, _)) = sel.step() {
        picks.push(s);
    }
    Ok(picks)
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

pub fn check_subtheme_model(model: &SubThemeModel) -> std::result::Result<(), String> {
    let k = model.len();
    let total: f64 = model.p_t_given_d.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(format!("sum of P(T|D) is {total}"));
    }
    if let Some(p) = model.p_t_given_d.iter().find(|p| !in_unit(**p)) {
        return Err(format!("P(T|D) entry {p} outside [0, 1]"));
    }
    for t in 0..k {
        let col: f64 = (0..k).map(|s| model.p_s_given_t[s][t]).sum();
        if col.abs() > 1e-9 && (col - 1.0).abs() > 1e-9 {
            return Err(format!("column {t} of P(S|T) sums to {col}"));
        }
        if let Some(s) = (0..k).find(|&s| !in_unit(model.p_s_given_t[s][t])) {
            return Err(format!(
                "P(S_{s}|T_{t}) = {} outside [0, 1]",
                model.p_s_given_t[s][t]
            ));
        }
    }
    Ok(())
}

/// Every entry of every vector in `trace` must be in [0, 1] and no entry
/// may grow from one step to the next.
pub fn check_non_increasing(trace: &[Vec<f64>]) -> std::result::Result<(), String> {
    for (step, v) in trace.iter().enumerate() {
        if let Some(x) = v.iter().find(|x| !in_unit(**x)) {
            return Err(format!(
                "step {step}: dissatisfaction entry {x} outside [0, 1]"
            ));
        }
    }
    for (step, pair) in trace.windows(2).enumerate() {
        for (k, (a, b)) in pair[0].iter().zip(&pair[1]).enumerate() {
            if b > a {
                return Err(format!(
                    "step {}: dissatisfaction of sub-theme {k} rose {a} -> {b}",
                    step + 1
                ));
            }
        }
    }
    Ok(())
}

fn check_selection_trace(
    view: &DocView<'_>,
    cfg: SelectorConfig,
) -> std::result::Result<(), String> {
    let mut sel = Selector::new(view, cfg).map_err(|e| e.to_string())?;
    let mut trace = vec![sel.state().dissatisfaction.clone()];
    loop {
        let remaining: Vec<usize> = sel.state().remaining.iter().copied().collect();
        for s in remaining {
            let cov = sel.coverage(s).map_err(|e| e.to_string())?;
            if !in_unit(cov) {
                return Err(format!("coverage of sentence {s} is {cov}"));
            }
        }
        if sel.step().is_none() {
            break;
        }
        trace.push(sel.state().dissatisfaction.clone());
    }
    check_non_increasing(&trace)
}

/// Hand-derived ROUGE values plus an exhaustive LCS comparison.
pub fn rouge_golden() -> CriterionResult {
    let start = Instant::now();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let all =
        |s: rouge::RougeScore, v: f64| close(s.precision, v) && close(s.recall, v) && close(s.f, v);
    let toks = |s: &str| crate::corpus::tokenize(s);
    let mut failures: Vec<&str> = Vec::new();
    let mut case = |ok: bool, name: &'static str| {
        if !ok {
            failures.push(name);
        }
    };
    case(
        all(
            rouge::rouge_n(&["a", "b", "c"], &["a", "b", "d"], 1),
            2.0 / 3.0,
        ),
        "rouge-1 abc/abd",
    );
    case(
        all(rouge::rouge_n(&["a", "b", "c"], &["a", "b", "d"], 2), 0.5),
        "rouge-2 abc/abd",
    );
    case(
        all(rouge::rouge_n(&["a", "b", "c"], &["a", "b", "c"], 2), 1.0),
        "rouge-2 identity",
    );
    case(
        all(
            rouge::rouge_l(&["a", "c", "b"], &["a", "b", "c"]),
            2.0 / 3.0,
        ),
        "rouge-l acb/abc",
    );
    case(
        all(rouge::rouge_l(&["a", "b"], &["a", "b"]), 1.0),
        "rouge-l identity",
    );
    case(
        all(rouge::rouge_l(&["a", "b"], &["c", "d"]), 0.0),
        "rouge-l disjoint",
    );
    let cand = toks("a b c");
    let refs = [
        crate::corpus::ReferenceSummary {
            sentences: vec![toks("a b c")],
        },
        crate::corpus::ReferenceSummary {
            sentences: vec![toks("x y z")],
        },
    ];
    let two = rouge::evaluate(&[&cand], &refs).map(|r| close(r.rouge1.f, 0.5));
    case(two.unwrap_or(false), "two-reference mean");
    case(rouge::evaluate(&[&cand], &[]).is_err(), "no references");

    let mismatch = lcs_exhaustive_mismatch();
    let correct = failures.is_empty() && mismatch.is_none();
    let detail = match (failures.is_empty(), &mismatch) {
        (true, None) => "golden cases match; LCS agrees with subsequence enumeration on all pairs of length <= 7 over 3 symbols".into(),
        (false, _) => format!("golden cases failed: {}", failures.join(", ")),
        (true, Some(m)) => format!("LCS mismatch: {m}"),
    };
    let (in_time, detail) = timed(detail, start.elapsed(), 5);
    CriterionResult::new(4, "ROUGE golden cases", in_time && correct, detail)
}

/// Compares [`rouge::lcs_len`] with brute-force subsequence enumeration on
/// every pair of sequences of length at most 7 over `{0, 1, 2}`.
///
/// Every sequence gets an index, longest first. The subsequences of each
/// sequence are enumerated once into a bitset over those indices, so the
/// LCS of a pair is the length of the first index set in both bitsets.
fn lcs_exhaustive_mismatch() -> Option<String> {
    const MAX: usize = 7;
    let mut seqs: Vec<Vec<u8>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..MAX {
        frontier = frontier
            .iter()
            .flat_map(|s| (0..3u8).map(move |c| [s.as_slice(), &[c]].concat()))
            .collect();
        seqs.extend(frontier.iter().cloned());
    }
    seqs.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let index: std::collections::HashMap<&[u8], usize> = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let words = seqs.len().div_ceil(64);
    // first index holding each length
    let first_of_len = |len: usize| {
        seqs.iter()
            .position(|s| s.len() <= len)
            .expect("lengths 0..=7")
    };

    let subsets: Vec<Vec<u64>> = seqs
        .par_iter()
        .map(|s| {
            let mut bits = vec![0u64; words];
            for mask in 0u32..(1 << s.len()) {
                let sub: Vec<u8> = (0..s.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| s[i])
                    .collect();
                let j = index[sub.as_slice()];
                bits[j / 64] |= 1 << (j % 64);
            }
            bits
        })
        .collect();
    let starts: Vec<usize> = (0..=MAX).map(|l| first_of_len(l) / 64).collect();

    (0..seqs.len()).into_par_iter().find_map_any(|a| {
        for b in a..seqs.len() {
            let start = starts[seqs[a].len().min(seqs[b].len())];
            let (sa, sb) = (&subsets[a], &subsets[b]);
            let oracle = (start..words)
                .find_map(|w| {
                    let both = sa[w] & sb[w];
                    (both != 0).then(|| seqs[w * 64 + both.trailing_zeros() as usize].len())
                })
                .expect("the empty sequence is common to all");
            let got = rouge::lcs_len(&seqs[a], &seqs[b]);
            if got != oracle {
                return Some(format!("{:?} vs {:?}: {got} != {oracle}", seqs[a], seqs[b]));
            }
        }
        None
    })
}

/// The `{u, u, w}` document with orthogonal `u`, `w` and a document vector
/// leaning towards `u`.
pub fn duplicate_suppression() -> Result<CriterionResult> {
    let doc = Document::from_texts("uuw", &["u", "u", "w"], &[])?;
    let u = Vector::Dense(DenseVector::new(vec![1.0, 0.0]));
    let w = Vector::Dense(DenseVector::new(vec![0.0, 1.0]));
    let d = Vector::Dense(DenseVector::new(vec![1.1, 1.0]));
    let view = DocView::from_vectors(&doc, vec![u.clone(), u, w], d)?;
    let second = |method| -> Result<usize> {
        let picks = pick_sequence(
            &view,
            SelectorConfig {
                method,
                alpha: 1.0,
                ratio: 1.0,
            },
        )?;
        Ok(picks[1])
    };
    let (rel, mmr, jx) = (
        second(Method::RelevanceOnly)?,
        second(Method::Mmr)?,
        second(Method::Jxdtd)?,
    );
    let passed = rel == 1 && mmr == 2 && jx == 2;
    Ok(CriterionResult::new(
        7,
        "duplicate suppression",
        passed,
        format!(
            "second pick: RELEVANCE_ONLY {rel}, MMR {mmr}, JXDTD {jx} (duplicate is 1, w is 2)"
        ),
    ))
}

/// A tiny random model with a fixed set of training targets and negatives.
struct GradCase {
    model: EmbeddingModel,
    paragraphs: Vec<TrainingParagraph>,
    /// Noise words per (paragraph, position).
    negatives: Vec<Vec<Vec<usize>>>,
}

impl GradCase {
    fn random(rng: &mut ChaCha8Rng, kind: ModelKind) -> Self {
        let dim = rng.gen_range(1..=5);
        let vocab = rng.gen_range(2..=10);
        let num_paragraphs = rng.gen_range(1..=3);
        let context = rng.gen_range(0..=3);
        let mut uniform =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
        let para = uniform(num_paragraphs * dim);
        let word_in = if kind == ModelKind::Dm {
            uniform(vocab * dim)
        } else {
            Vec::new()
        };
        let word_out = uniform(vocab * dim);
        let model = EmbeddingModel::from_parts(
            kind,
            vocab,
            num_paragraphs,
            dim,
            context,
            para,
            word_in,
            word_out,
        )
        .expect("consistent shapes");
        let paragraphs: Vec<TrainingParagraph> = (0..num_paragraphs)
            .map(|id| TrainingParagraph {
                id,
                tokens: (0..rng.gen_range(1..=6))
                    .map(|_| rng.gen_range(0..vocab))
                    .collect(),
            })
            .collect();
        let k = rng.gen_range(1..=3);
        let negatives = paragraphs
            .iter()
            .map(|p| {
                p.tokens
                    .iter()
                    .map(|_| (0..k).map(|_| rng.gen_range(0..vocab)).collect())
                    .collect()
            })
            .collect();
        GradCase {
            model,
            paragraphs,
            negatives,
        }
    }

    fn gradients(&self, model: &EmbeddingModel) -> Vec<TargetGradient> {
        self.paragraphs
            .iter()
            .zip(&self.negatives)
            .flat_map(|(p, negs)| {
                negs.iter()
                    .enumerate()
                    .map(move |(pos, n)| model.target_gradient(p, pos, n))
            })
            .collect()
    }

    fn objective(&self, model: &EmbeddingModel) -> f64 {
        self.gradients(model).iter().map(|g| g.loss).sum()
    }

    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`
    /// over all parameters, numeric gradients by central differences with
    /// step 1e-4.
    fn max_relative_error(&self) -> f64 {
        const STEP: f64 = 1e-4;
        const FLOOR: f64 = 1e-6;
        let (gp, gi, go) = self.model.dense_gradient(&self.gradients(&self.model));
        let mut worst: f64 = 0.0;
        for (matrix, analytic) in [gp, gi, go].iter().enumerate() {
            for (i, &a) in analytic.iter().enumerate() {
                let eval = |delta: f64| {
                    let mut m = self.model.clone();
                    let mats = m.matrices_mut();
                    let slot = match matrix {
                        0 => &mut mats.0[i],
                        1 => &mut mats.1[i],
                        _ => &mut mats.2[i],
                    };
                    *slot += delta;
                    self.objective(&m)
                };
                let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
                worst = worst.max(err);
            }
        }
        worst
    }

    /// Per-target losses in a canonical order, so that two objectives can
    /// be compared exactly.
    fn sorted_losses(&self) -> Vec<f64> {
        let mut losses: Vec<f64> = self.gradients(&self.model).iter().map(|g| g.loss).collect();
        losses.sort_by(f64::total_cmp);
        losses
    }

    fn dbow_permutation_invariant(&self, rng: &mut ChaCha8Rng) -> bool {
        let mut shuffled = GradCase {
            model: self.model.clone(),
            paragraphs: Vec::new(),
            negatives: Vec::new(),
        };
        let mut order: Vec<usize> = (0..self.paragraphs.len()).collect();
        order.shuffle(rng);
        for &p in &order {
            let mut positions: Vec<usize> = (0..self.paragraphs[p].tokens.len()).collect();
            positions.shuffle(rng);
            shuffled.paragraphs.push(TrainingParagraph {
                id: self.paragraphs[p].id,
                tokens: positions
                    .iter()
                    .map(|&i| self.paragraphs[p].tokens[i])
                    .collect(),
            });
            shuffled.negatives.push(
                positions
                    .iter()
                    .map(|&i| self.negatives[p][i].clone())
                    .collect(),
            );
        }
        let (a, b) = (self.sorted_losses(), shuffled.sorted_losses());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        bits(&a) == bits(&b) && a.iter().sum::<f64>().to_bits() == b.iter().sum::<f64>().to_bits()
    }

    fn dm_zero_context_matches_dbow(&self) -> bool {
        let m = &self.model;
        let vocab = m.vocab_size();
        let dm = EmbeddingModel::from_parts(
            ModelKind::Dm,
            vocab,
            m.num_paragraphs(),
            m.dim(),
            0,
            m.para_matrix().to_vec(),
            vec![0.25; vocab * m.dim()],
            m.word_out_matrix().to_vec(),
        )
        .expect("consistent shapes");
        self.paragraphs
            .iter()
            .zip(&self.negatives)
            .all(|(p, negs)| {
                (0..p.tokens.len()).all(|pos| {
                    let bits =
                        |v: DenseVector| v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                    bits(dm.predictor(p, pos)) == bits(m.predictor(p, pos))
                        && dm.target_gradient(p, pos, &negs[pos]).loss.to_bits()
                            == m.target_gradient(p, pos, &negs[pos]).loss.to_bits()
                })
            })
    }
}

/// Brute-force greedy selection written directly from the objective, with
/// its own TF-IDF and cosine. Every quantity is recomputed for every
/// candidate at every step.
mod oracle {
    use std::collections::HashMap;

    use crate::corpus::Document;
    use crate::coverage::Method;

    pub struct Corpus {
        df: HashMap<String, usize>,
        n: usize,
    }

    impl Corpus {
        pub fn new(docs: &[Document]) -> Self {
            let mut df = HashMap::new();
            for d in docs {
                let mut seen: Vec<&str> = d.tokens().map(|t| t.as_str()).collect();
                seen.sort_unstable();
                seen.dedup();
                for t in seen {
                    *df.entry(t.to_string()).or_insert(0) += 1;
                }
            }
            Corpus { df, n: docs.len() }
        }

        fn tfidf<'a>(&self, tokens: impl Iterator<Item = &'a str>) -> HashMap<String, f64> {
            let mut tf: HashMap<String, f64> = HashMap::new();
            for t in tokens {
                *tf.entry(t.to_string()).or_insert(0.0) += 1.0;
            }
            tf.into_iter()
                .map(|(t, c)| {
                    let idf = (self.n as f64 / self.df[&t] as f64).ln();
                    (t, c * idf)
                })
                .collect()
        }
    }

    fn cos(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
        let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = a.iter().map(|(t, x)| x * b.get(t).unwrap_or(&0.0)).sum();
        (dot / (na * nb)).clamp(0.0, 1.0)
    }

    pub fn select(
        doc: &Document,
        corpus: &Corpus,
        method: Method,
        alpha: f64,
        (num, den): (usize, usize),
    ) -> Vec<usize> {
        let vecs: Vec<_> = doc
            .sentences
            .iter()
            .map(|s| corpus.tfidf(s.tokens.iter().map(|t| t.as_str())))
            .collect();
        let dvec = corpus.tfidf(doc.tokens().map(|t| t.as_str()));
        let k = vecs.len();
        let rel = |s: usize| cos(&vecs[s], &dvec);
        let p_s_t = |s: usize, t: usize| {
            let mass: f64 = (0..k).map(|x| cos(&vecs[x], &vecs[t])).sum();
            if mass > 0.0 {
                cos(&vecs[s], &vecs[t]) / mass
            } else {
                0.0
            }
        };
        let p_t_d = |t: usize| {
            let mass: f64 = (0..k).map(rel).sum();
            if mass > 0.0 {
                rel(t) / mass
            } else {
                1.0 / k as f64
            }
        };

        let words = doc.word_count();
        let budget = ((num * words).div_ceil(den)).max(1);
        let mut selected: Vec<usize> = Vec::new();
        let mut used = 0;
        while used < budget && selected.len() < k {
            let score = |s: usize| {
                let cov = match method {
                    Method::RelevanceOnly => 0.0,
                    Method::Mmr if selected.is_empty() => 0.0,
                    Method::Mmr => {
                        -selected
                            .iter()
                            .map(|&t| cos(&vecs[s], &vecs[t]))
                            .sum::<f64>()
                            / selected.len() as f64
                    }
                    Method::Xdtd => (0..k).map(|t| p_s_t(s, t) * p_t_d(t)).sum(),
                    Method::Jxdtd => (0..k)
                        .map(|t| {
                            let unmet: f64 = selected.iter().map(|&x| 1.0 - p_s_t(x, t)).product();
                            p_s_t(s, t) * unmet * p_t_d(t)
                        })
                        .sum(),
                };
                rel(s) + alpha * cov
            };
            let scored: Vec<(usize, f64)> = (0..k)
                .filter(|s| !selected.contains(s))
                .map(|s| (s, score(s)))
                .collect();
            let best = scored.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            let pick = scored
                .iter()
                .find(|x| x.1 >= best - 1e-12)
                .expect("a candidate remains")
                .0;
            used += doc.sentences[pick].len();
            selected.push(pick);
        }
        selected
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_dissatisfaction_is_flagged() {
        let doc = Document::from_texts("d", &["a b", "a c", "d"], &[]).unwrap();
        let other = Document::from_texts("o", &["z"], &[]).unwrap();
        let vocab = build_vocabulary(&[doc.clone(), other]).unwrap();
        let view =
            DocView::build(&doc, 0, Representation::Bow, &Encoder::bow_only(&vocab)).unwrap();
        let model = SubThemeModel::estimate(&view);
        let mut honest = vec![vec![1.0; 3]];
        let mut flipped = vec![vec![1.0; 3]];
        for pick in [0, 1, 2] {
            let step = |prev: &Vec<f64>, sign: f64| -> Vec<f64> {
                prev.iter()
                    .zip(&model.p_s_given_t[pick])
                    .map(|(d, p)| d * (1.0 - sign * p))
                    .collect()
            };
            honest.push(step(honest.last().unwrap(), 1.0));
            flipped.push(step(flipped.last().unwrap(), -1.0));
        }
        assert!(model.p_s_given_t[0][0] > 0.0);
        assert!(check_non_increasing(&honest).is_ok());
        assert!(check_non_increasing(&flipped).is_err());
    }

    #[test]
    fn missing_corpus_is_an_error() {
        let err = run(1, Some(PathBuf::from("/nonexistent/corpus.jsonl"))).unwrap_err();
        assert!(
            err.to_string().contains("/nonexistent/corpus.jsonl"),
            "{err}"
        );
    }

    #[test]
    fn random_documents_are_small() {
        let docs = random_documents(3, RANDOM_DOCS);
        assert_eq!(docs.len(), 50);
        let vocab = build_vocabulary(&docs).unwrap();
        assert!(vocab.len() <= 12);
        assert!(docs.iter().all(|d| (1..=8).contains(&d.len())));
    }

    #[test]
    fn subtheme_checker_rejects_bad_columns() {
        let bad = SubThemeModel {
            p_s_given_t: vec![vec![0.5, 0.0], vec![0.4, 0.0]],
            p_t_given_d: vec![0.5, 0.5],
        };
        assert!(check_subtheme_model(&bad).is_err());
        let ok = SubThemeModel {
            p_s_given_t: vec![vec![0.6, 0.0], vec![0.4, 0.0]],
            p_t_given_d: vec![1.0, 0.0],
        };
        assert!(check_subtheme_model(&ok).is_ok());
    }
}
