//! Bundled planted-sub-theme corpus used by the self-test.
//!
//! Every document mixes two sub-themes with disjoint vocabularies, `A` (the
//! majority, 8 sentences) and `B` (4 sentences), plus filler words shared
//! across the whole corpus. Sentence order is shuffled. Each of the three
//! references is extractive: one `A` sentence followed by one `B` sentence,
//! in document order.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{parse_corpus, Document, ReferenceSummary, Token};
use crate::error::Result;

pub const BUNDLED_SEED: u64 = 1;

/// The bundled corpus in JSONL form, generated by
/// `SyntheticConfig::default().generate()`.
pub const BUNDLED_JSONL: &str = include_str!("../data/synthetic.jsonl");

pub fn bundled() -> Result<Vec<Document>> {
    parse_corpus(BUNDLED_JSONL.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub num_docs: usize,
    pub majority_sentences: usize,
    pub minority_sentences: usize,
    /// Inclusive sentence length range, in tokens.
    pub min_len: usize,
    pub max_len: usize,
    pub theme_vocab: usize,
    pub filler_vocab: usize,
    pub filler_fraction: f64,
    /// Zipf exponent for within-theme word frequencies.
    pub zipf: f64,
    pub references: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_docs: 20,
            majority_sentences: 8,
            minority_sentences: 4,
            min_len: 4,
            max_len: 14,
            theme_vocab: 15,
            filler_vocab: 60,
            filler_fraction: 0.3,
            zipf: 1.0,
            references: 3,
            seed: BUNDLED_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theme {
    A,
    B,
}

/// A generated document together with the planted theme of each sentence.
#[derive(Debug, Clone)]
pub struct Planted {
    pub document: Document,
    pub themes: Vec<Theme>,
}

fn tok(s: String) -> Token {
    Token::new(&s).expect("generated tokens are non-empty")
}

impl SyntheticConfig {
    pub fn generate(&self) -> Vec<Planted> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let filler: Vec<String> = (0..self.filler_vocab)
            .map(|i| format!("filler{i}"))
            .collect();
        let weights: Vec<f64> = (0..self.theme_vocab)
            .map(|i| 1.0 / ((i + 1) as f64).powf(self.zipf))
            .collect();
        let dist = rand::distributions::WeightedIndex::new(&weights).expect("positive weights");

        (0..self.num_docs)
            .map(|d| {
                let mut sentences: Vec<(Theme, Vec<Token>)> = Vec::new();
                for (theme, count, prefix) in [
                    (Theme::A, self.majority_sentences, "alpha"),
                    (Theme::B, self.minority_sentences, "beta"),
                ] {
                    for _ in 0..count {
                        let len = rng.gen_range(self.min_len..=self.max_len);
                        let n_fill = ((len as f64) * self.filler_fraction).round() as usize;
                        let mut words: Vec<Token> = (0..len - n_fill)
                            .map(|_| tok(format!("{prefix}{d}w{}", rng.sample(&dist))))
                            .collect();
                        words.extend(
                            filler
                                .choose_multiple(&mut rng, n_fill)
                                .map(|w| tok(w.clone())),
                        );
                        words.shuffle(&mut rng);
                        sentences.push((theme, words));
                    }
                }
                sentences.shuffle(&mut rng);

                let of = |t: Theme| -> Vec<usize> {
                    (0..sentences.len())
                        .filter(|&i| sentences[i].0 == t)
                        .collect()
                };
                let (a_idx, b_idx) = (of(Theme::A), of(Theme::B));
                let references = (0..self.references)
                    .map(|_| {
                        let a = *a_idx.choose(&mut rng).expect("majority theme present");
                        let b = *b_idx.choose(&mut rng).expect("minority theme present");
                        let (first, second) = (a.min(b), a.max(b));
                        ReferenceSummary {
                            sentences: vec![
                                sentences[first].1.clone(),
                                sentences[second].1.clone(),
                            ],
                        }
                    })
                    .collect();
                let themes = sentences.iter().map(|(t, _)| *t).collect();
                let document = Document::new(
                    format!("synthetic-{d:02}"),
                    sentences.into_iter().map(|(_, s)| s).collect(),
                    references,
                )
                .expect("generated documents are well-formed");
                Planted { document, themes }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus;

    #[test]
    fn bundled_file_matches_generator() {
        let docs: Vec<Document> = SyntheticConfig::default()
            .generate()
            .into_iter()
            .map(|p| p.document)
            .collect();
        let mut buf = Vec::new();
        write_corpus(&docs, &mut buf).unwrap();
        if std::env::var_os("COVSUM_BLESS").is_some() {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.jsonl");
            std::fs::write(path, &buf).unwrap();
            return;
        }
        assert_eq!(String::from_utf8(buf).unwrap(), BUNDLED_JSONL);
        assert_eq!(bundled().unwrap(), docs);
    }

    #[test]
    fn references_span_both_themes() {
        let cfg = SyntheticConfig::default();
        for p in cfg.generate() {
            assert_eq!(p.document.len(), 12);
            let theme_of = |s: &Vec<Token>| {
                let i = p
                    .document
                    .sentences
                    .iter()
                    .position(|x| &x.tokens == s)
                    .expect("extractive");
                p.themes[i]
            };
            for r in &p.document.references {
                let t: Vec<Theme> = r.sentences.iter().map(theme_of).collect();
                assert!(t.contains(&Theme::A) && t.contains(&Theme::B));
            }
        }
    }
}
