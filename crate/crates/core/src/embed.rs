//! Paragraph embeddings: distributed memory (DM) and distributed
//! bag-of-words (DBOW), trained with negative sampling.
//!
//! Every training target is a `(paragraph, position)` pair. The predictor
//! `h` is the paragraph vector for DBOW, and for DM the mean of the
//! paragraph vector with the input vectors of up to `context_size`
//! preceding words. The target word is scored against `h` with the
//! logistic loss on its output vector, together with `negatives` words
//! drawn from the unigram distribution raised to `unigram_power`.
//!
//! Training is single-threaded and fully determined by the seed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vecrep::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Dm,
    Dbow,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dm => "dm",
            ModelKind::Dbow => "dbow",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Dm => "DM",
            ModelKind::Dbow => "DBOW",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingParagraph {
    pub id: usize,
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    /// Number of preceding words fed to the DM predictor.
    pub context_size: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to 1% of itself.
    pub learning_rate: f64,
    pub negatives: usize,
    pub seed: u64,
    pub unigram_power: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            context_size: 4,
            epochs: 20,
            learning_rate: 0.025,
            negatives: 5,
            seed: 1,
            unigram_power: 0.75,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embed.dim must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("embed.epochs must be >= 1".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("embed.negatives must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("embed.learning_rate must be > 0".into()));
        }
        if !self.unigram_power.is_finite() {
            return Err(Error::Config("embed.unigram_power must be finite".into()));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x), without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic loss of one (predictor, output word) pair: `-ln σ(score)` for
/// the observed word, `-ln σ(-score)` for a noise word.
pub fn pair_loss(score: f64, positive: bool) -> f64 {
    if positive {
        softplus(-score)
    } else {
        softplus(score)
    }
}

/// Draws term ids with probability proportional to `count^power`.
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    pub fn new(counts: &[u64], power: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        Self::with_rng(counts, power, rng)
    }

    fn with_rng(counts: &[u64], power: f64, rng: ChaCha8Rng) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Empty("negative sampler needs at least one term"));
        }
        let weights = Self::weights(counts, power);
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Config(format!("negative sampler: {e}")))?;
        Ok(NegativeSampler { dist, rng })
    }

    fn weights(counts: &[u64], power: f64) -> Vec<f64> {
        counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { (c as f64).powf(power) })
            .collect()
    }

    /// The exact sampling distribution.
    pub fn probabilities(counts: &[u64], power: f64) -> Vec<f64> {
        let w = Self::weights(counts, power);
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    pub fn sample(&mut self) -> usize {
        self.dist.sample(&mut self.rng)
    }
}

impl Iterator for NegativeSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(self.sample())
    }
}

/// Gradient of the summed pair losses of one training target, evaluated at
/// the current parameters.
#[derive(Debug, Clone)]
pub struct TargetGradient {
    pub loss: f64,
    pub paragraph: usize,
    pub d_paragraph: Vec<f64>,
    pub d_word_in: Vec<(usize, Vec<f64>)>,
    pub d_word_out: Vec<(usize, Vec<f64>)>,
}

/// Trained (or initialized) DM / DBOW parameters, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    kind: ModelKind,
    vocab_size: usize,
    num_paragraphs: usize,
    dim: usize,
    context_size: usize,
    para: Vec<f64>,
    word_in: Vec<f64>,
    word_out: Vec<f64>,
}

impl EmbeddingModel {
    /// Assembles a model from raw matrices, checking shapes and finiteness.
    /// `word_in` must be empty for DBOW. `context_size` is ignored (stored
    /// as 0) for DBOW.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: ModelKind,
        vocab_size: usize,
        num_paragraphs: usize,
        dim: usize,
        context_size: usize,
        para: Vec<f64>,
        word_in: Vec<f64>,
        word_out: Vec<f64>,
    ) -> Result<Self> {
        let expect_in = match kind {
            ModelKind::Dm => vocab_size * dim,
            ModelKind::Dbow => 0,
        };
        if dim == 0 {
            return Err(Error::ModelFormat("dimension must be >= 1".into()));
        }
        if para.len() != num_paragraphs * dim
            || word_in.len() != expect_in
            || word_out.len() != vocab_size * dim
        {
            return Err(Error::ModelFormat(
                "matrix sizes do not match header".into(),
            ));
        }
        if para
            .iter()
            .chain(&word_in)
            .chain(&word_out)
            .any(|x| !x.is_finite())
        {
            return Err(Error::ModelFormat("non-finite parameter".into()));
        }
        Ok(EmbeddingModel {
            kind,
            vocab_size,
            num_paragraphs,
            dim,
            context_size: if kind == ModelKind::Dm {
                context_size
            } else {
                0
            },
            para,
            word_in,
            word_out,
        })
    }

    fn initialize(
        kind: ModelKind,
        vocab_size: usize,
        num_paragraphs: usize,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let d = cfg.dim;
        let half = 0.5 / d as f64;
        let uniform = Uniform::new_inclusive(-half, half);
        let para = (0..num_paragraphs * d)
            .map(|_| uniform.sample(rng))
            .collect();
        let word_in = match kind {
            ModelKind::Dm => (0..vocab_size * d).map(|_| uniform.sample(rng)).collect(),
            ModelKind::Dbow => Vec::new(),
        };
        EmbeddingModel {
            kind,
            vocab_size,
            num_paragraphs,
            dim: d,
            context_size: if kind == ModelKind::Dm {
                cfg.context_size
            } else {
                0
            },
            para,
            word_in,
            word_out: vec![0.0; vocab_size * d],
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_paragraphs(&self) -> usize {
        self.num_paragraphs
    }

    pub fn context_size(&self) -> usize {
        self.context_size
    }

    pub fn para_matrix(&self) -> &[f64] {
        &self.para
    }

    pub fn word_in_matrix(&self) -> &[f64] {
        &self.word_in
    }

    pub fn word_out_matrix(&self) -> &[f64] {
        &self.word_out
    }

    /// Mutable access to `(paragraph, word-in, word-out)` matrices.
    pub fn matrices_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.para, &mut self.word_in, &mut self.word_out)
    }

    fn para_row(&self, i: usize) -> &[f64] {
        &self.para[i * self.dim..(i + 1) * self.dim]
    }

    fn in_row(&self, w: usize) -> &[f64] {
        &self.word_in[w * self.dim..(w + 1) * self.dim]
    }

    fn out_row(&self, w: usize) -> &[f64] {
        &self.word_out[w * self.dim..(w + 1) * self.dim]
    }

    pub fn paragraph_vector(&self, id: usize) -> Result<DenseVector> {
        if id >= self.num_paragraphs {
            return Err(Error::OutOfRange {
                index: id,
                len: self.num_paragraphs,
            });
        }
        Ok(DenseVector::new(self.para_row(id).to_vec()))
    }

    fn context_words<'p>(&self, paragraph: &'p TrainingParagraph, position: usize) -> &'p [usize] {
        match self.kind {
            ModelKind::Dm => {
                let start = position.saturating_sub(self.context_size);
                &paragraph.tokens[start..position]
            }
            ModelKind::Dbow => &[],
        }
    }

    /// Predictor for DM: mean of the paragraph vector and the input vectors
    /// of the available preceding words (at most `context_size`).
    pub fn dm_context(&self, paragraph: &TrainingParagraph, position: usize) -> DenseVector {
        let start = position.saturating_sub(self.context_size);
        let context = &paragraph.tokens[start..position];
        let mut h = self.para_row(paragraph.id).to_vec();
        for &w in context {
            for (acc, x) in h.iter_mut().zip(self.in_row(w)) {
                *acc += x;
            }
        }
        let n = (1 + context.len()) as f64;
        for x in &mut h {
            *x /= n;
        }
        DenseVector::new(h)
    }

    /// The vector scored against output words for one target.
    pub fn predictor(&self, paragraph: &TrainingParagraph, position: usize) -> DenseVector {
        match self.kind {
            ModelKind::Dm => self.dm_context(paragraph, position),
            ModelKind::Dbow => DenseVector::new(self.para_row(paragraph.id).to_vec()),
        }
    }

    /// Loss and exact gradient for the target at `position`, scored against
    /// the observed word and the given noise words.
    pub fn target_gradient(
        &self,
        paragraph: &TrainingParagraph,
        position: usize,
        negatives: &[usize],
    ) -> TargetGradient {
        let d = self.dim;
        let h = self.predictor(paragraph, position);
        let h = h.values();
        let target = paragraph.tokens[position];
        let mut loss = 0.0;
        let mut dh = vec![0.0; d];
        let mut d_word_out = Vec::with_capacity(1 + negatives.len());
        let pairs = std::iter::once((target, true)).chain(negatives.iter().map(|&w| (w, false)));
        for (w, positive) in pairs {
            let u = self.out_row(w);
            let score: f64 = h.iter().zip(u).map(|(a, b)| a * b).sum();
            loss += pair_loss(score, positive);
            // d loss / d score
            let g = sigmoid(score) - if positive { 1.0 } else { 0.0 };
            for (acc, x) in dh.iter_mut().zip(u) {
                *acc += g * x;
            }
            d_word_out.push((w, h.iter().map(|x| g * x).collect()));
        }
        let context = self.context_words(paragraph, position);
        let share = 1.0 / (1 + context.len()) as f64;
        let d_paragraph: Vec<f64> = match self.kind {
            ModelKind::Dm => dh.iter().map(|x| x * share).collect(),
            ModelKind::Dbow => dh,
        };
        let d_word_in = context.iter().map(|&w| (w, d_paragraph.clone())).collect();
        TargetGradient {
            loss,
            paragraph: paragraph.id,
            d_paragraph,
            d_word_in,
            d_word_out,
        }
    }

    /// One gradient-descent step: `param -= lr * grad`.
    pub fn apply(&mut self, grad: &TargetGradient, lr: f64) {
        let d = self.dim;
        let p = grad.paragraph * d;
        for (x, g) in self.para[p..p + d].iter_mut().zip(&grad.d_paragraph) {
            *x -= lr * g;
        }
        for (w, gw) in &grad.d_word_in {
            for (x, g) in self.word_in[w * d..(w + 1) * d].iter_mut().zip(gw) {
                *x -= lr * g;
            }
        }
        for (w, gw) in &grad.d_word_out {
            for (x, g) in self.word_out[w * d..(w + 1) * d].iter_mut().zip(gw) {
                *x -= lr * g;
            }
        }
    }

    /// Scatters target gradients into full-size `(paragraph, word-in,
    /// word-out)` gradient matrices.
    pub fn dense_gradient(&self, grads: &[TargetGradient]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut gp = vec![0.0; self.para.len()];
        let mut gi = vec![0.0; self.word_in.len()];
        let mut go = vec![0.0; self.word_out.len()];
        for grad in grads {
            let p = grad.paragraph * d;
            for (acc, g) in gp[p..p + d].iter_mut().zip(&grad.d_paragraph) {
                *acc += g;
            }
            for (w, gw) in &grad.d_word_in {
                for (acc, g) in gi[w * d..(w + 1) * d].iter_mut().zip(gw) {
                    *acc += g;
                }
            }
            for (w, gw) in &grad.d_word_out {
                for (acc, g) in go[w * d..(w + 1) * d].iter_mut().zip(gw) {
                    *acc += g;
                }
            }
        }
        (gp, gi, go)
    }

    /// Writes the model in the binary layout described in the crate docs.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let kind: u32 = match self.kind {
            ModelKind::Dm => 0,
            ModelKind::Dbow => 1,
        };
        out.write_all(&kind.to_le_bytes())?;
        for n in [
            self.vocab_size,
            self.num_paragraphs,
            self.dim,
            self.context_size,
        ] {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        for x in self.para.iter().chain(&self.word_in).chain(&self.word_out) {
            out.write_all(&x.to_le_bytes())?;
        }
        out.flush()
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let bad = |e: std::io::Error| Error::ModelFormat(e.to_string());
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        input.read_exact(&mut u32buf).map_err(bad)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        input.read_exact(&mut u32buf).map_err(bad)?;
        let kind = match u32::from_le_bytes(u32buf) {
            0 => ModelKind::Dm,
            1 => ModelKind::Dbow,
            k => return Err(Error::ModelFormat(format!("unknown kind {k}"))),
        };
        let mut header = [0usize; 4];
        let mut u64buf = [0u8; 8];
        for slot in &mut header {
            input.read_exact(&mut u64buf).map_err(bad)?;
            *slot = usize::try_from(u64::from_le_bytes(u64buf))
                .map_err(|_| Error::ModelFormat("header value too large".into()))?;
        }
        let [vocab_size, num_paragraphs, dim, context_size] = header;
        let size = |rows: usize| {
            rows.checked_mul(dim)
                .ok_or_else(|| Error::ModelFormat("matrix size overflow".into()))
        };
        let mut read_matrix = |len: usize| -> Result<Vec<f64>> {
            let mut m = Vec::with_capacity(len);
            for _ in 0..len {
                input.read_exact(&mut u64buf).map_err(bad)?;
                m.push(f64::from_le_bytes(u64buf));
            }
            Ok(m)
        };
        let para = read_matrix(size(num_paragraphs)?)?;
        let word_in = match kind {
            ModelKind::Dm => read_matrix(size(vocab_size)?)?,
            ModelKind::Dbow => Vec::new(),
        };
        let word_out = read_matrix(size(vocab_size)?)?;
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(bad)? != 0 {
            return Err(Error::ModelFormat("trailing bytes after matrices".into()));
        }
        EmbeddingModel::from_parts(
            kind,
            vocab_size,
            num_paragraphs,
            dim,
            context_size,
            para,
            word_in,
            word_out,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

const MAGIC: &[u8; 8] = b"COVSUMPV";
const FORMAT_VERSION: u32 = 1;

fn validate_paragraphs(paragraphs: &[TrainingParagraph], vocab_size: usize) -> Result<()> {
    if paragraphs.is_empty() {
        return Err(Error::Empty("no training paragraphs"));
    }
    let mut seen = vec![false; paragraphs.len()];
    for p in paragraphs {
        if p.tokens.is_empty() {
            return Err(Error::Empty("training paragraph without tokens"));
        }
        if p.id >= paragraphs.len() || std::mem::replace(&mut seen[p.id], true) {
            return Err(Error::Config(format!(
                "paragraph ids must be a permutation of 0..{}",
                paragraphs.len()
            )));
        }
        if let Some(&w) = p.tokens.iter().find(|&&w| w >= vocab_size) {
            return Err(Error::OutOfRange {
                index: w,
                len: vocab_size,
            });
        }
    }
    Ok(())
}

/// Trains a model over `paragraphs` with seeded, single-threaded SGD.
///
/// Each epoch visits paragraphs in a freshly shuffled order and every
/// position within a paragraph left to right. The learning rate decays
/// linearly from `learning_rate` to `learning_rate / 100` over all targets.
pub fn train(
    paragraphs: &[TrainingParagraph],
    vocab_size: usize,
    cfg: &TrainConfig,
    kind: ModelKind,
) -> Result<EmbeddingModel> {
    cfg.validate()?;
    validate_paragraphs(paragraphs, vocab_size)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order_rng = init_rng.clone();
    order_rng.set_stream(1);
    let mut model =
        EmbeddingModel::initialize(kind, vocab_size, paragraphs.len(), cfg, &mut init_rng);

    let mut counts = vec![0u64; vocab_size];
    for w in paragraphs.iter().flat_map(|p| &p.tokens) {
        counts[*w] += 1;
    }
    let mut sampler = NegativeSampler::new(&counts, cfg.unigram_power, cfg.seed)?;

    let per_epoch: usize = paragraphs.iter().map(|p| p.tokens.len()).sum();
    let total = per_epoch * cfg.epochs;
    let lr_end = cfg.learning_rate / 100.0;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..paragraphs.len()).collect();
    let mut negatives = vec![0usize; cfg.negatives];

    for _ in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        for &pi in &order {
            let paragraph = &paragraphs[pi];
            for position in 0..paragraph.tokens.len() {
                let progress = if total > 1 {
                    step as f64 / (total - 1) as f64
                } else {
                    0.0
                };
                let lr = cfg.learning_rate + (lr_end - cfg.learning_rate) * progress;
                for slot in &mut negatives {
                    *slot = sampler.sample();
                }
                let grad = model.target_gradient(paragraph, position, &negatives);
                model.apply(&grad, lr);
                step += 1;
            }
        }
    }
    log::debug!(
        "trained {} model: {} paragraphs, {} targets",
        kind,
        paragraphs.len(),
        total
    );
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            dim: 4,
            context_size: 2,
            epochs: 3,
            learning_rate: 0.05,
            negatives: 2,
            seed: 7,
            unigram_power: 0.75,
        }
    }

    fn paragraphs() -> Vec<TrainingParagraph> {
        vec![
            TrainingParagraph {
                id: 0,
                tokens: vec![0, 1, 2, 1],
            },
            TrainingParagraph {
                id: 1,
                tokens: vec![3, 3, 4],
            },
        ]
    }

    #[test]
    fn pair_loss_examples() {
        assert!((pair_loss(0.0, true) - 2f64.ln()).abs() < 1e-12);
        assert!(pair_loss(800.0, true) < 1e-300);
        // -ln σ(-1) = ln(1 + e)
        let expected = (1.0 + 1f64.exp()).ln();
        assert!((pair_loss(1.0, false) - expected).abs() < 1e-12);
        assert!((pair_loss(1.0, false) - 1.3133).abs() < 1e-4);
        assert!(pair_loss(-800.0, false).abs() < 1e-300);
    }

    fn model_with(
        kind: ModelKind,
        ctx: usize,
        para: Vec<f64>,
        word_in: Vec<f64>,
    ) -> EmbeddingModel {
        let d = 2;
        let v = word_in.len().max(2 * d) / d;
        let word_in = if kind == ModelKind::Dm {
            word_in
        } else {
            vec![]
        };
        EmbeddingModel::from_parts(
            kind,
            v,
            para.len() / d,
            d,
            ctx,
            para,
            word_in,
            vec![0.0; v * d],
        )
        .unwrap()
    }

    #[test]
    fn dm_context_examples() {
        let p = TrainingParagraph {
            id: 0,
            tokens: vec![0, 1],
        };
        // position 0: paragraph vector alone
        let m = model_with(ModelKind::Dm, 1, vec![2.0, 0.0], vec![0.0, 2.0, 5.0, 5.0]);
        assert_eq!(m.dm_context(&p, 0).values(), &[2.0, 0.0]);
        // one predecessor: mean of (2,0) and (0,2)
        assert_eq!(m.dm_context(&p, 1).values(), &[1.0, 1.0]);

        let v = vec![0.3, -0.7];
        let q = TrainingParagraph {
            id: 0,
            tokens: vec![0, 1, 0],
        };
        let m = model_with(ModelKind::Dm, 2, v.clone(), [v.clone(), v.clone()].concat());
        let h = m.dm_context(&q, 2);
        for (a, b) in h.values().iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_token_one_negative_is_two_pair_updates() {
        let p = TrainingParagraph {
            id: 0,
            tokens: vec![0],
        };
        let m = model_with(ModelKind::Dbow, 0, vec![0.1, 0.2], vec![]);
        let g = m.target_gradient(&p, 0, &[0]);
        assert_eq!(g.d_word_out.len(), 2);
        let cfg = TrainConfig {
            epochs: 1,
            negatives: 1,
            dim: 2,
            ..TrainConfig::default()
        };
        // one target, k = 1; training succeeds on the degenerate vocabulary
        let trained = train(&[p], 1, &cfg, ModelKind::Dbow).unwrap();
        assert_eq!(trained.num_paragraphs(), 1);
    }

    #[test]
    fn first_positive_update_moves_out_vector_along_h() {
        let p = TrainingParagraph {
            id: 0,
            tokens: vec![1],
        };
        let h = vec![0.4, -0.2];
        let mut m = model_with(ModelKind::Dbow, 0, h.clone(), vec![]);
        let lr = 0.1;
        let g = m.target_gradient(&p, 0, &[]);
        // zero out-vector: no gradient reaches h
        assert!(g.d_paragraph.iter().all(|&x| x == 0.0));
        m.apply(&g, lr);
        let out = &m.word_out_matrix()[2..4];
        for (o, x) in out.iter().zip(&h) {
            assert!((o - lr * 0.5 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let a = train(&paragraphs(), 5, &small_cfg(), ModelKind::Dm).unwrap();
        let b = train(&paragraphs(), 5, &small_cfg(), ModelKind::Dm).unwrap();
        assert_eq!(a, b);
        let mut other = small_cfg();
        other.seed = 8;
        let c = train(&paragraphs(), 5, &other, ModelKind::Dm).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn train_rejects_bad_input() {
        assert!(train(&[], 5, &small_cfg(), ModelKind::Dbow).is_err());
        let bad_token = vec![TrainingParagraph {
            id: 0,
            tokens: vec![9],
        }];
        assert!(train(&bad_token, 5, &small_cfg(), ModelKind::Dbow).is_err());
        let dup = vec![
            TrainingParagraph {
                id: 0,
                tokens: vec![0],
            },
            TrainingParagraph {
                id: 0,
                tokens: vec![1],
            },
        ];
        assert!(train(&dup, 5, &small_cfg(), ModelKind::Dbow).is_err());
        let mut cfg = small_cfg();
        cfg.epochs = 0;
        assert!(train(&paragraphs(), 5, &cfg, ModelKind::Dbow).is_err());
    }

    #[test]
    fn paragraph_vector_bounds() {
        let m = train(&paragraphs(), 5, &small_cfg(), ModelKind::Dbow).unwrap();
        assert_eq!(m.paragraph_vector(1).unwrap().dim(), 4);
        assert!(matches!(
            m.paragraph_vector(2),
            Err(Error::OutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn init_rows_are_small_and_out_matrix_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = small_cfg();
        let m = EmbeddingModel::initialize(ModelKind::Dm, 5, 2, &cfg, &mut rng);
        let bound = 0.5 / cfg.dim as f64;
        assert!(m.para_matrix().iter().all(|x| x.abs() <= bound));
        assert!(m.word_in_matrix().iter().all(|x| x.abs() <= bound));
        assert!(m.word_out_matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sampler_examples() {
        let mut one = NegativeSampler::new(&[5], 0.75, 1).unwrap();
        assert!((0..100).all(|_| one.sample() == 0));
        assert_eq!(
            NegativeSampler::probabilities(&[1, 1], 0.75),
            vec![0.5, 0.5]
        );
        let p = NegativeSampler::probabilities(&[8, 1], 0.75);
        let hi = 8f64.powf(0.75) / (8f64.powf(0.75) + 1.0);
        assert!((p[0] - hi).abs() < 1e-12);
        assert!((p[0] - 0.82629).abs() < 1e-4);
        assert!((p[1] - 0.17371).abs() < 1e-4);
        assert!(NegativeSampler::new(&[], 0.75, 1).is_err());
    }

    #[test]
    fn sampler_frequencies_follow_distribution() {
        let mut s = NegativeSampler::new(&[8, 1], 0.75, 11).unwrap();
        let n = 200_000;
        let zeros = (0..n).filter(|_| s.sample() == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.82629).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let a: Vec<usize> = NegativeSampler::new(&[3, 2, 1], 0.75, 5)
            .unwrap()
            .take(50)
            .collect();
        let b: Vec<usize> = NegativeSampler::new(&[3, 2, 1], 0.75, 5)
            .unwrap()
            .take(50)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn persistence_round_trip() {
        for kind in [ModelKind::Dm, ModelKind::Dbow] {
            let m = train(&paragraphs(), 5, &small_cfg(), kind).unwrap();
            let mut buf = Vec::new();
            m.write_to(&mut buf).unwrap();
            let back = EmbeddingModel::read_from(buf.as_slice()).unwrap();
            assert_eq!(back, m);
            let mut again = Vec::new();
            back.write_to(&mut again).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn persistence_rejects_garbage() {
        assert!(EmbeddingModel::read_from(&b"nope"[..]).is_err());
        let m = train(&paragraphs(), 5, &small_cfg(), ModelKind::Dbow).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert!(EmbeddingModel::read_from(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(EmbeddingModel::read_from(buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn zero_context_dm_predictor_is_dbow_predictor(
            para in prop::collection::vec(-1.0f64..1.0, 6),
            tokens in prop::collection::vec(0usize..3, 1..6),
        ) {
            let d = 2;
            let dm = EmbeddingModel::from_parts(
                ModelKind::Dm, 3, 3, d, 0, para.clone(), vec![0.25; 3 * d], vec![0.0; 3 * d]).unwrap();
            let dbow = EmbeddingModel::from_parts(
                ModelKind::Dbow, 3, 3, d, 0, para, vec![], vec![0.0; 3 * d]).unwrap();
            let p = TrainingParagraph { id: 1, tokens };
            for j in 0..p.tokens.len() {
                prop_assert_eq!(dm.predictor(&p, j), dbow.predictor(&p, j));
            }
        }
    }
}
