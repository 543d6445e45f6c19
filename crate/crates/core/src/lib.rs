//! Coverage-aware extractive summarization.
//!
//! Sentences are picked greedily by relevance to the document plus a
//! coverage term (MMR, xDTD or J-xDTD, see [`coverage`]). Documents and
//! sentences can be represented by TF-IDF vectors, trained paragraph
//! embeddings, or both concatenated. Summaries are scored with ROUGE-1/2/L.

pub mod corpus;
pub mod coverage;
pub mod embed;
pub mod error;
pub mod harness;
pub mod represent;
pub mod rouge;
pub mod selftest;
pub mod synthetic;
pub mod vecrep;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/corpus.md")]
    pub struct Corpus;
    #[doc = include_str!("../../../book/src/representations.md")]
    pub struct Representations;
    #[doc = include_str!("../../../book/src/coverage.md")]
    pub struct Coverage;
    #[doc = include_str!("../../../book/src/embeddings.md")]
    pub struct Embeddings;
    #[doc = include_str!("../../../book/src/rouge.md")]
    pub struct Rouge;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
}
