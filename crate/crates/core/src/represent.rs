//! Turning documents into vectors: which representation, and where the
//! paragraph embeddings for each sentence and document live.
//!
//! Paragraph ids follow a fixed layout. For every document, in corpus
//! order, its sentences take consecutive ids and the whole document takes
//! the id right after its last sentence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Vocabulary};
use crate::embed::{self, EmbeddingModel, ModelKind, TrainConfig, TrainingParagraph};
use crate::error::{Error, Result};
use crate::vecrep::{bow_vector, concat, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Representation {
    Bow,
    Dm,
    Dbow,
    BowDm,
    BowDbow,
}

impl Representation {
    pub const ALL: [Representation; 5] = [
        Representation::Bow,
        Representation::Dm,
        Representation::Dbow,
        Representation::BowDm,
        Representation::BowDbow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Bow => "BOW",
            Representation::Dm => "DM",
            Representation::Dbow => "DBOW",
            Representation::BowDm => "BOW+DM",
            Representation::BowDbow => "BOW+DBOW",
        }
    }

    /// Embedding model this representation depends on, if any.
    pub fn model_kind(self) -> Option<ModelKind> {
        match self {
            Representation::Bow => None,
            Representation::Dm | Representation::BowDm => Some(ModelKind::Dm),
            Representation::Dbow | Representation::BowDbow => Some(ModelKind::Dbow),
        }
    }

    fn uses_bow(self) -> bool {
        matches!(
            self,
            Representation::Bow | Representation::BowDm | Representation::BowDbow
        )
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<Representation> for String {
    fn from(v: Representation) -> String {
        v.name().to_string()
    }
}

impl TryFrom<String> for Representation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(' ', "");
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown representation `{s}`")))
    }
}

/// Whether paragraph embeddings are trained once over the corpus or
/// separately for every document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainScope {
    #[default]
    Corpus,
    Document,
}

impl FromStr for TrainScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "corpus" => Ok(TrainScope::Corpus),
            "document" | "doc" => Ok(TrainScope::Document),
            _ => Err(Error::Config(format!("unknown training scope `{s}`"))),
        }
    }
}

impl fmt::Display for TrainScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainScope::Corpus => "corpus",
            TrainScope::Document => "document",
        })
    }
}

/// Training paragraphs for one document, ids starting at `base`.
fn document_paragraphs(doc: &Document, vocab: &Vocabulary, base: usize) -> Vec<TrainingParagraph> {
    let mut out: Vec<TrainingParagraph> = doc
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| TrainingParagraph {
            id: base + i,
            tokens: vocab.ids(&s.tokens).collect(),
        })
        .collect();
    out.push(TrainingParagraph {
        id: base + doc.sentences.len(),
        tokens: out.iter().flat_map(|p| p.tokens.iter().copied()).collect(),
    });
    out
}

/// All sentences plus the documents themselves, laid out corpus-wide.
pub fn corpus_paragraphs(docs: &[Document], vocab: &Vocabulary) -> Vec<TrainingParagraph> {
    let mut out = Vec::new();
    for doc in docs {
        let base = out.len();
        out.extend(document_paragraphs(doc, vocab, base));
    }
    out
}

/// Trained paragraph vectors for a corpus, in one of the two scopes.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    scope: TrainScope,
    models: Vec<EmbeddingModel>,
    offsets: Vec<usize>,
}

impl EmbeddingSet {
    pub fn train(
        docs: &[Document],
        vocab: &Vocabulary,
        cfg: &TrainConfig,
        kind: ModelKind,
        scope: TrainScope,
    ) -> Result<Self> {
        let models = match scope {
            TrainScope::Corpus => {
                vec![embed::train(
                    &corpus_paragraphs(docs, vocab),
                    vocab.len(),
                    cfg,
                    kind,
                )?]
            }
            TrainScope::Document => docs
                .iter()
                .map(|d| embed::train(&document_paragraphs(d, vocab, 0), vocab.len(), cfg, kind))
                .collect::<Result<_>>()?,
        };
        Self::from_models(docs, models, scope)
    }

    /// Wraps already-trained models, checking that their paragraph counts
    /// match the corpus layout.
    pub fn from_models(
        docs: &[Document],
        models: Vec<EmbeddingModel>,
        scope: TrainScope,
    ) -> Result<Self> {
        let mut offsets = Vec::with_capacity(docs.len());
        match scope {
            TrainScope::Corpus => {
                let mut base = 0;
                for d in docs {
                    offsets.push(base);
                    base += d.len() + 1;
                }
                if models.len() != 1 || models[0].num_paragraphs() != base {
                    return Err(Error::ModelFormat(format!(
                        "corpus-wide model must have {base} paragraphs"
                    )));
                }
            }
            TrainScope::Document => {
                if models.len() != docs.len() {
                    return Err(Error::ModelFormat(format!(
                        "expected {} per-document models, got {}",
                        docs.len(),
                        models.len()
                    )));
                }
                for (d, m) in docs.iter().zip(&models) {
                    if m.num_paragraphs() != d.len() + 1 {
                        return Err(Error::ModelFormat(format!(
                            "model for document `{}` has {} paragraphs, expected {}",
                            d.id,
                            m.num_paragraphs(),
                            d.len() + 1
                        )));
                    }
                    offsets.push(0);
                }
            }
        }
        Ok(EmbeddingSet {
            scope,
            models,
            offsets,
        })
    }

    pub fn scope(&self) -> TrainScope {
        self.scope
    }

    pub fn kind(&self) -> ModelKind {
        self.models[0].kind()
    }

    pub fn models(&self) -> &[EmbeddingModel] {
        &self.models
    }

    fn model_for(&self, doc_index: usize) -> &EmbeddingModel {
        match self.scope {
            TrainScope::Corpus => &self.models[0],
            TrainScope::Document => &self.models[doc_index],
        }
    }

    pub fn sentence_vector(&self, doc_index: usize, sentence: usize) -> Result<Vector> {
        let id = self.offsets[doc_index] + sentence;
        Ok(self.model_for(doc_index).paragraph_vector(id)?.into())
    }

    pub fn document_vector(&self, doc_index: usize, num_sentences: usize) -> Result<Vector> {
        let id = self.offsets[doc_index] + num_sentences;
        Ok(self.model_for(doc_index).paragraph_vector(id)?.into())
    }
}

/// Everything needed to encode documents of one corpus.
#[derive(Debug, Clone, Copy)]
pub struct Encoder<'a> {
    pub vocab: &'a Vocabulary,
    pub dm: Option<&'a EmbeddingSet>,
    pub dbow: Option<&'a EmbeddingSet>,
}

impl<'a> Encoder<'a> {
    pub fn bow_only(vocab: &'a Vocabulary) -> Self {
        Encoder {
            vocab,
            dm: None,
            dbow: None,
        }
    }

    fn embeddings(&self, repr: Representation) -> Result<Option<&'a EmbeddingSet>> {
        match repr.model_kind() {
            None => Ok(None),
            Some(kind) => {
                let set = match kind {
                    ModelKind::Dm => self.dm,
                    ModelKind::Dbow => self.dbow,
                };
                set.map(Some).ok_or_else(|| Error::MissingModel {
                    repr: repr.name().to_string(),
                    kind: kind.to_string(),
                })
            }
        }
    }

    /// Unit-normalized sentence vectors and document vector for the
    /// document at `doc_index` of the corpus the encoder was built for.
    pub fn encode(
        &self,
        doc: &Document,
        doc_index: usize,
        repr: Representation,
    ) -> Result<(Vec<Vector>, Vector)> {
        let embeddings = self.embeddings(repr)?;
        let build = |bow: Option<Vector>, dense: Option<Vector>| -> Result<Vector> {
            match (bow, dense) {
                (Some(b), None) => Ok(b.normalized()),
                (None, Some(d)) => Ok(d.normalized()),
                (Some(b), Some(d)) => Ok(Vector::Concat(concat(vec![b, d])?)),
                (None, None) => unreachable!("every representation has a part"),
            }
        };
        let mut sentences = Vec::with_capacity(doc.len());
        for (i, s) in doc.sentences.iter().enumerate() {
            let bow = repr
                .uses_bow()
                .then(|| Vector::Sparse(bow_vector(&s.tokens, self.vocab)));
            let dense = embeddings
                .map(|e| e.sentence_vector(doc_index, i))
                .transpose()?;
            sentences.push(build(bow, dense)?);
        }
        let all_tokens: Vec<_> = doc.tokens().cloned().collect();
        let bow = repr
            .uses_bow()
            .then(|| Vector::Sparse(bow_vector(&all_tokens, self.vocab)));
        let dense = embeddings
            .map(|e| e.document_vector(doc_index, doc.len()))
            .transpose()?;
        Ok((sentences, build(bow, dense)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabulary;

    fn docs() -> Vec<Document> {
        vec![
            Document::from_texts("a", &["x y", "y z w"], &[]).unwrap(),
            Document::from_texts("b", &["p q", "q", "x p"], &[]).unwrap(),
        ]
    }

    #[test]
    fn parse_representations() {
        assert_eq!(
            "bow+dm".parse::<Representation>().unwrap(),
            Representation::BowDm
        );
        assert_eq!(
            "DBOW".parse::<Representation>().unwrap(),
            Representation::Dbow
        );
        assert!("LSA".parse::<Representation>().is_err());
    }

    #[test]
    fn corpus_layout() {
        let docs = docs();
        let vocab = build_vocabulary(&docs).unwrap();
        let paras = corpus_paragraphs(&docs, &vocab);
        assert_eq!(paras.len(), 3 + 4);
        assert!(paras.iter().enumerate().all(|(i, p)| p.id == i));
        // document paragraph = concatenation of its sentences
        assert_eq!(paras[2].tokens.len(), 5);
        assert_eq!(paras[6].tokens.len(), 5);
    }

    #[test]
    fn encode_shapes() {
        let docs = docs();
        let vocab = build_vocabulary(&docs).unwrap();
        let cfg = TrainConfig {
            dim: 3,
            epochs: 1,
            ..TrainConfig::default()
        };
        let dm =
            EmbeddingSet::train(&docs, &vocab, &cfg, ModelKind::Dm, TrainScope::Corpus).unwrap();
        let enc = Encoder {
            vocab: &vocab,
            dm: Some(&dm),
            dbow: None,
        };
        let (sents, doc) = enc.encode(&docs[1], 1, Representation::BowDm).unwrap();
        assert_eq!(sents.len(), 3);
        match doc {
            Vector::Concat(c) => assert_eq!(c.parts().len(), 2),
            other => panic!("expected concat, got {other:?}"),
        }
        let (sents, _) = enc.encode(&docs[1], 1, Representation::Bow).unwrap();
        assert!(matches!(sents[0], Vector::Sparse(_)));
        let err = enc
            .encode(&docs[1], 1, Representation::BowDbow)
            .unwrap_err();
        assert!(matches!(err, Error::MissingModel { .. }));
    }

    #[test]
    fn per_document_scope() {
        let docs = docs();
        let vocab = build_vocabulary(&docs).unwrap();
        let cfg = TrainConfig {
            dim: 2,
            epochs: 1,
            ..TrainConfig::default()
        };
        let set = EmbeddingSet::train(&docs, &vocab, &cfg, ModelKind::Dbow, TrainScope::Document)
            .unwrap();
        assert_eq!(set.models().len(), 2);
        assert_eq!(set.models()[1].num_paragraphs(), 4);
        assert!(set.document_vector(1, 3).is_ok());
        let wrong = EmbeddingSet::from_models(&docs, set.models().to_vec(), TrainScope::Corpus);
        assert!(wrong.is_err());
    }
}
