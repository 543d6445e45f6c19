//! Documents, reference summaries and the corpus vocabulary.
//!
//! Corpora are stored as JSON Lines, one document per line:
//!
//! ```text
//! {"id": "d1", "sentences": [["tok", ...], ...], "references": [[["tok", ...], ...], ...]}
//! ```
//!
//! `references` is optional. Instead of `sentences`, a line may carry
//! `raw_sentences: ["text", ...]`, which is run through [`tokenize`].

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lowercased index term without whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Wraps an already-normalized surface form. Rejects empty strings and
    /// strings containing whitespace; uppercase input is lowercased.
    pub fn new(surface: &str) -> Option<Token> {
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Token(surface.to_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A human-written summary, kept sentence-segmented.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSummary {
    pub sentences: Vec<Vec<Token>>,
}

impl ReferenceSummary {
    pub fn flattened(&self) -> Vec<Token> {
        self.sentences.iter().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
    pub references: Vec<ReferenceSummary>,
}

impl Document {
    /// Builds a document from tokenized sentences, assigning indices by
    /// position. Fails on an empty sentence list or an empty sentence.
    pub fn new(
        id: impl Into<String>,
        sentences: Vec<Vec<Token>>,
        references: Vec<ReferenceSummary>,
    ) -> Result<Document> {
        let id = id.into();
        if sentences.is_empty() {
            return Err(Error::Empty("document has no sentences"));
        }
        if sentences.iter().any(Vec::is_empty) {
            return Err(Error::Empty("document contains an empty sentence"));
        }
        if references
            .iter()
            .any(|r| r.sentences.is_empty() || r.sentences.iter().any(Vec::is_empty))
        {
            return Err(Error::Empty(
                "reference summary is empty or has an empty sentence",
            ));
        }
        let sentences = sentences
            .into_iter()
            .enumerate()
            .map(|(index, tokens)| Sentence { index, tokens })
            .collect();
        Ok(Document {
            id,
            sentences,
            references,
        })
    }

    /// Convenience constructor from whitespace-separated sentence strings.
    pub fn from_texts(id: &str, sentences: &[&str], references: &[&[&str]]) -> Result<Document> {
        let sentences = sentences.iter().map(|s| tokenize(s)).collect();
        let references = references
            .iter()
            .map(|r| ReferenceSummary {
                sentences: r.iter().map(|s| tokenize(s)).collect(),
            })
            .collect();
        Document::new(id, sentences, references)
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// All tokens of the document, sentence order preserved.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }
}

/// Splits on Unicode whitespace, lowercases, and trims non-alphanumeric
/// characters from both ends of each piece. Pieces that end up empty are
/// dropped.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .filter_map(|piece| {
            let lower = piece.to_lowercase();
            let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(Token(trimmed.to_string()))
            }
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_sentences: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    references: Vec<Vec<Vec<String>>>,
}

fn tokens_from_strings(words: Vec<String>) -> std::result::Result<Vec<Token>, String> {
    words
        .into_iter()
        .map(|w| Token::new(&w).ok_or_else(|| format!("invalid token {w:?}")))
        .collect()
}

fn document_from_record(rec: DocumentRecord) -> std::result::Result<Document, String> {
    let sentences = match (rec.sentences, rec.raw_sentences) {
        (Some(s), _) => s
            .into_iter()
            .map(tokens_from_strings)
            .collect::<std::result::Result<Vec<_>, _>>()?,
        (None, Some(raw)) => raw
            .iter()
            .map(|s| tokenize(s))
            .filter(|t| !t.is_empty())
            .collect(),
        (None, None) => return Err("missing \"sentences\" (or \"raw_sentences\")".into()),
    };
    let references = rec
        .references
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(tokens_from_strings)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(|sentences| ReferenceSummary { sentences })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Document::new(rec.id, sentences, references).map_err(|e| e.to_string())
}

/// Parses a JSONL corpus from any reader. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::CorpusLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| Error::CorpusLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let doc = document_from_record(rec).map_err(|message| Error::CorpusLine {
            line: line_no,
            message,
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file))
}

/// Writes documents in the tokenized JSONL form read by [`parse_corpus`].
pub fn write_corpus<W: Write>(docs: &[Document], mut out: W) -> Result<()> {
    let strings = |toks: &[Token]| toks.iter().map(|t| t.0.clone()).collect::<Vec<_>>();
    for doc in docs {
        let rec = DocumentRecord {
            id: doc.id.clone(),
            sentences: Some(doc.sentences.iter().map(|s| strings(&s.tokens)).collect()),
            raw_sentences: None,
            references: doc
                .references
                .iter()
                .map(|r| r.sentences.iter().map(|s| strings(s)).collect())
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<corpus writer>", e))?;
    }
    Ok(())
}

/// Dense term ids plus per-term document frequencies.
///
/// Document frequencies count source documents only. Terms that occur only
/// in reference summaries get a document frequency of 1 so that IDF stays
/// finite.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    term_to_id: HashMap<String, usize>,
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    term_count: Vec<u64>,
    num_docs: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.term_to_id.get(term).copied()
    }

    pub fn term(&self, id: usize) -> Option<&str> {
        self.terms.get(id).map(String::as_str)
    }

    pub fn doc_freq(&self, id: usize) -> Option<u32> {
        self.doc_freq.get(id).copied()
    }

    /// Occurrences of each term across source documents (references excluded).
    pub fn term_counts(&self) -> &[u64] {
        &self.term_count
    }

    /// Maps tokens to ids, skipping out-of-vocabulary tokens.
    pub fn ids<'a>(&'a self, tokens: &'a [Token]) -> impl Iterator<Item = usize> + 'a {
        tokens.iter().filter_map(|t| self.id(t.as_str()))
    }

    fn intern(&mut self, term: &str) -> usize {
        if let Some(&id) = self.term_to_id.get(term) {
            return id;
        }
        let id = self.terms.len();
        self.term_to_id.insert(term.to_string(), id);
        self.terms.push(term.to_string());
        self.doc_freq.push(0);
        self.term_count.push(0);
        id
    }

    /// Assembles a vocabulary from raw parts. Used by tests and tools that
    /// need specific document frequencies.
    pub fn from_parts(terms: Vec<(String, u32)>, num_docs: usize) -> Result<Vocabulary> {
        let mut vocab = Vocabulary {
            term_to_id: HashMap::new(),
            terms: Vec::new(),
            doc_freq: Vec::new(),
            term_count: Vec::new(),
            num_docs,
        };
        for (term, df) in terms {
            let id = vocab.intern(&term);
            vocab.doc_freq[id] = df;
            vocab.term_count[id] = u64::from(df);
        }
        Ok(vocab)
    }
}

pub fn build_vocabulary(docs: &[Document]) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::Empty(
            "cannot build a vocabulary from zero documents",
        ));
    }
    let mut vocab = Vocabulary {
        term_to_id: HashMap::new(),
        terms: Vec::new(),
        doc_freq: Vec::new(),
        term_count: Vec::new(),
        num_docs: docs.len(),
    };
    let mut last_seen: Vec<usize> = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        for tok in doc.tokens() {
            let id = vocab.intern(tok.as_str());
            if last_seen.len() <= id {
                last_seen.resize(id + 1, usize::MAX);
            }
            vocab.term_count[id] += 1;
            if last_seen[id] != d {
                last_seen[id] = d;
                vocab.doc_freq[id] += 1;
            }
        }
    }
    for doc in docs {
        for reference in &doc.references {
            for tok in reference.sentences.iter().flatten() {
                let id = vocab.intern(tok.as_str());
                if vocab.doc_freq[id] == 0 {
                    vocab.doc_freq[id] = 1;
                }
            }
        }
    }
    Ok(vocab)
}
