//! Experiment runner: training, grid summarization and ROUGE evaluation.
//!
//! A run is described by an [`ExperimentConfig`], read from a flat
//! `key = value` file (see [`ExperimentConfig::parse`]). Output layout under
//! the configured directory:
//!
//! ```text
//! models/dm.bin, models/dbow.bin        corpus-scope models
//! models/dm.doc-0003.bin, ...           document-scope models
//! summaries.jsonl                       one record per method x repr x document
//! evaluation.tsv                        corpus-mean ROUGE F per grid cell
//! evaluation.jsonl                      per-document ROUGE reports
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_vocabulary, load_corpus, Document, Vocabulary};
use crate::coverage::{greedy_select, DocView, Method, SelectorConfig};
use crate::embed::{EmbeddingModel, ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::represent::{EmbeddingSet, Encoder, Representation, TrainScope};
use crate::rouge::{self, RougeReport};
use crate::synthetic;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// JSONL corpus; `None` selects the bundled synthetic corpus.
    pub corpus: Option<PathBuf>,
    pub representations: Vec<Representation>,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub ratio: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Half-open document range applied after loading.
    pub split: Option<(usize, usize)>,
    pub embed: TrainConfig,
    pub scope: TrainScope,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: None,
            representations: Representation::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            alpha: 1.0,
            ratio: 0.10,
            seed: 1,
            out: PathBuf::from("out"),
            split: None,
            embed: TrainConfig::default(),
            scope: TrainScope::Corpus,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Parses `lo:hi` into a half-open range.
pub fn parse_split(value: &str) -> Result<(usize, usize)> {
    let (lo, hi) = value
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("split must look like lo:hi, got {value:?}")))?;
    let lo: usize = parse_value("split", lo.trim())?;
    let hi: usize = parse_value("split", hi.trim())?;
    if lo >= hi {
        return Err(Error::Config(format!("split {lo}:{hi} is empty")));
    }
    Ok((lo, hi))
}

impl ExperimentConfig {
    /// Reads the flat config format: one `key = value` per line, `#` starts
    /// a comment, lists are comma-separated. Unknown keys are an error.
    ///
    /// ```
    /// use covsum::harness::ExperimentConfig;
    ///
    /// let cfg = ExperimentConfig::parse("
    ///     methods = MMR, JXDTD
    ///     representations = BOW
    ///     alpha = 0.5
    ///     embed.dim = 32
    /// ").unwrap();
    /// assert_eq!(cfg.methods.len(), 2);
    /// assert_eq!(cfg.embed.dim, 32);
    /// assert!(ExperimentConfig::parse("colour = red").is_err());
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "representations" => self.representations = parse_list(key, value)?,
            "methods" => self.methods = parse_list(key, value)?,
            "alpha" => self.alpha = parse_value(key, value)?,
            "ratio" => self.ratio = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "split" => self.split = Some(parse_split(value)?),
            "embed.dim" => self.embed.dim = parse_value(key, value)?,
            "embed.context_size" => self.embed.context_size = parse_value(key, value)?,
            "embed.epochs" => self.embed.epochs = parse_value(key, value)?,
            "embed.learning_rate" => self.embed.learning_rate = parse_value(key, value)?,
            "embed.negatives" => self.embed.negatives = parse_value(key, value)?,
            "embed.unigram_power" => self.embed.unigram_power = parse_value(key, value)?,
            "embed.scope" => self.scope = parse_value(key, value)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.representations.is_empty() {
            return Err(Error::Config("no representations configured".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        self.selector(Method::RelevanceOnly).validate()?;
        self.train_config().validate()
    }

    pub fn selector(&self, method: Method) -> SelectorConfig {
        SelectorConfig {
            method,
            alpha: self.alpha,
            ratio: self.ratio,
        }
    }

    /// Embedding settings with the experiment seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.embed.clone()
        }
    }

    /// Model kinds the configured representations need.
    pub fn model_kinds(&self) -> Vec<ModelKind> {
        let mut kinds: Vec<ModelKind> = Vec::new();
        for kind in self.representations.iter().filter_map(|r| r.model_kind()) {
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
        kinds
    }
}

pub fn load_documents(cfg: &ExperimentConfig) -> Result<Vec<Document>> {
    let mut docs = match &cfg.corpus {
        Some(path) => load_corpus(path)?,
        None => synthetic::bundled()?,
    };
    if let Some((lo, hi)) = cfg.split {
        if hi > docs.len() {
            return Err(Error::Config(format!(
                "split {lo}:{hi} exceeds corpus size {}",
                docs.len()
            )));
        }
        docs = docs.drain(lo..hi).collect();
    }
    if docs.is_empty() {
        return Err(Error::Empty("corpus has no documents"));
    }
    Ok(docs)
}

/// Trained or loaded embeddings for one corpus.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub dm: Option<EmbeddingSet>,
    pub dbow: Option<EmbeddingSet>,
}

impl Models {
    pub fn train(docs: &[Document], vocab: &Vocabulary, cfg: &ExperimentConfig) -> Result<Self> {
        let mut models = Models::default();
        for kind in cfg.model_kinds() {
            log::info!("training {kind} ({} scope)", cfg.scope);
            let set = EmbeddingSet::train(docs, vocab, &cfg.train_config(), kind, cfg.scope)?;
            *models.slot(kind) = Some(set);
        }
        Ok(models)
    }

    fn slot(&mut self, kind: ModelKind) -> &mut Option<EmbeddingSet> {
        match kind {
            ModelKind::Dm => &mut self.dm,
            ModelKind::Dbow => &mut self.dbow,
        }
    }

    pub fn encoder<'a>(&'a self, vocab: &'a Vocabulary) -> Encoder<'a> {
        Encoder {
            vocab,
            dm: self.dm.as_ref(),
            dbow: self.dbow.as_ref(),
        }
    }

    fn paths(dir: &Path, kind: ModelKind, scope: TrainScope, num_docs: usize) -> Vec<PathBuf> {
        match scope {
            TrainScope::Corpus => vec![dir.join(format!("{}.bin", kind.name()))],
            TrainScope::Document => (0..num_docs)
                .map(|i| dir.join(format!("{}.doc-{i:04}.bin", kind.name())))
                .collect(),
        }
    }

    pub fn save(&self, dir: &Path, num_docs: usize) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for set in [&self.dm, &self.dbow].into_iter().flatten() {
            let paths = Self::paths(dir, set.kind(), set.scope(), num_docs);
            for (model, path) in set.models().iter().zip(paths) {
                model.save(&path)?;
                written.push(path);
            }
        }
        Ok(written)
    }

    /// Loads whichever of the configured kinds have files in `dir`; absent
    /// kinds stay `None` and surface later as a missing-model error.
    pub fn load(dir: &Path, docs: &[Document], cfg: &ExperimentConfig) -> Result<Self> {
        let mut models = Models::default();
        for kind in cfg.model_kinds() {
            let paths = Self::paths(dir, kind, cfg.scope, docs.len());
            if !paths[0].exists() {
                continue;
            }
            let loaded = paths
                .iter()
                .map(EmbeddingModel::load)
                .collect::<Result<Vec<_>>>()?;
            if loaded.iter().any(|m| m.kind() != kind) {
                return Err(Error::ModelFormat(format!(
                    "{} holds a model of the wrong kind",
                    dir.display()
                )));
            }
            *models.slot(kind) = Some(EmbeddingSet::from_models(docs, loaded, cfg.scope)?);
        }
        Ok(models)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub method: Method,
    pub representation: Representation,
    pub alpha: f64,
    pub selected: Vec<usize>,
    pub scores: Vec<f64>,
    pub budget_words: usize,
    pub words_used: usize,
}

/// Summarizes every document under every method x representation cell.
/// Records come out grouped by method, then representation, then document
/// order, independent of how the per-document work is scheduled.
pub fn summarize(
    docs: &[Document],
    encoder: &Encoder<'_>,
    cfg: &ExperimentConfig,
) -> Result<Vec<SummaryRecord>> {
    let mut out = Vec::with_capacity(cfg.methods.len() * cfg.representations.len() * docs.len());
    for &method in &cfg.methods {
        for &repr in &cfg.representations {
            let sel = cfg.selector(method);
            let cell: Vec<SummaryRecord> = docs
                .par_iter()
                .enumerate()
                .map(|(i, doc)| {
                    let view = DocView::build(doc, i, repr, encoder)?;
                    let s = greedy_select(&view, sel)?;
                    Ok(SummaryRecord {
                        id: doc.id.clone(),
                        method,
                        representation: repr,
                        alpha: cfg.alpha,
                        selected: s.selected,
                        scores: s.scores,
                        budget_words: s.budget_words,
                        words_used: s.words_used,
                    })
                })
                .collect::<Result<_>>()?;
            out.extend(cell);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub id: String,
    pub method: Method,
    pub representation: Representation,
    pub rouge: RougeReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub method: Method,
    pub representation: Representation,
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    pub rouge_l_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<GridRow>,
    pub documents: Vec<DocumentScore>,
}

impl Evaluation {
    pub fn row(&self, method: Method, repr: Representation) -> Option<&GridRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.representation == repr)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("method\trepresentation\trouge1_f\trouge2_f\trougeL_f\n");
        for r in &self.rows {
            writeln!(
                s,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                r.method, r.representation, r.rouge1_f, r.rouge2_f, r.rouge_l_f
            )
            .expect("writing to a String");
        }
        s
    }

    pub fn documents_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for d in &self.documents {
            s.push_str(&serde_json::to_string(d)?);
            s.push('\n');
        }
        Ok(s)
    }
}

/// Scores summary records against the references of `docs`, matched by id.
/// Grid rows keep the order in which cells first appear in `records`.
pub fn evaluate(docs: &[Document], records: &[SummaryRecord]) -> Result<Evaluation> {
    let by_id: std::collections::HashMap<&str, &Document> =
        docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let documents = records
        .par_iter()
        .map(|r| {
            let doc = by_id
                .get(r.id.as_str())
                .ok_or_else(|| Error::Config(format!("summary for unknown document `{}`", r.id)))?;
            if doc.references.is_empty() {
                return Err(Error::NoReferences(doc.id.clone()));
            }
            let mut picked = Vec::with_capacity(r.selected.len());
            for &i in &r.selected {
                let s = doc.sentences.get(i).ok_or(Error::OutOfRange {
                    index: i,
                    len: doc.len(),
                })?;
                picked.push(s.tokens.as_slice());
            }
            Ok(DocumentScore {
                id: r.id.clone(),
                method: r.method,
                representation: r.representation,
                rouge: rouge::evaluate(&picked, &doc.references)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells: Vec<(Method, Representation)> = Vec::new();
    for d in &documents {
        if !cells.contains(&(d.method, d.representation)) {
            cells.push((d.method, d.representation));
        }
    }
    let rows = cells
        .into_iter()
        .map(|(method, representation)| {
            let scores: Vec<&RougeReport> = documents
                .iter()
                .filter(|d| d.method == method && d.representation == representation)
                .map(|d| &d.rouge)
                .collect();
            let n = scores.len() as f64;
            GridRow {
                method,
                representation,
                rouge1_f: scores.iter().map(|r| r.rouge1.f).sum::<f64>() / n,
                rouge2_f: scores.iter().map(|r| r.rouge2.f).sum::<f64>() / n,
                rouge_l_f: scores.iter().map(|r| r.rouge_l.f).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(Evaluation { rows, documents })
}

/// Everything one in-memory run produces.
#[derive(Debug, Clone)]
pub struct GridOutput {
    pub summaries: Vec<SummaryRecord>,
    pub evaluation: Evaluation,
}

impl GridOutput {
    pub fn summaries_jsonl(&self) -> Result<String> {
        records_to_jsonl(&self.summaries)
    }
}

/// Train, summarize and evaluate without touching the filesystem (beyond
/// reading the corpus).
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridOutput> {
    cfg.validate()?;
    let docs = load_documents(cfg)?;
    let vocab = build_vocabulary(&docs)?;
    let models = Models::train(&docs, &vocab, cfg)?;
    let summaries = summarize(&docs, &models.encoder(&vocab), cfg)?;
    let evaluation = evaluate(&docs, &summaries)?;
    Ok(GridOutput {
        summaries,
        evaluation,
    })
}

fn records_to_jsonl(records: &[SummaryRecord]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::CorpusLine {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn models_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("models")
}

pub fn summaries_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("summaries.jsonl")
}

/// Trains the models the configured representations need and writes them
/// under `out/models`. Returns the written paths.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let docs = load_documents(cfg)?;
    let vocab = build_vocabulary(&docs)?;
    let models = Models::train(&docs, &vocab, cfg)?;
    models.save(&models_dir(cfg), docs.len())
}

/// Summarizes with previously trained models and writes `summaries.jsonl`.
pub fn cmd_summarize(cfg: &ExperimentConfig) -> Result<Vec<SummaryRecord>> {
    cfg.validate()?;
    let docs = load_documents(cfg)?;
    let vocab = build_vocabulary(&docs)?;
    let models = Models::load(&models_dir(cfg), &docs, cfg)?;
    let records = summarize(&docs, &models.encoder(&vocab), cfg)?;
    write_file(&summaries_path(cfg), &records_to_jsonl(&records)?)?;
    Ok(records)
}

/// Scores `summaries.jsonl` and writes `evaluation.tsv` and
/// `evaluation.jsonl`.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let docs = load_documents(cfg)?;
    let records = read_summaries(&summaries_path(cfg))?;
    let evaluation = evaluate(&docs, &records)?;
    write_file(&cfg.out.join("evaluation.tsv"), &evaluation.to_tsv())?;
    write_file(
        &cfg.out.join("evaluation.jsonl"),
        &evaluation.documents_jsonl()?,
    )?;
    Ok(evaluation)
}
