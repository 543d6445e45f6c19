//! Vector representations and the similarity used as relevance.
//!
//! Sparse TF-IDF vectors and dense paragraph vectors can be used alone or
//! concatenated. A concatenation keeps its parts separately normalized and
//! scores similarity as the unweighted mean of the per-part cosines, so a
//! single-part concatenation behaves exactly like its only part.
//!
//! [`cosine`] clamps to `[0, 1]`: negative similarities, which dense
//! embeddings can produce, are treated as "unrelated".

use crate::corpus::{Token, Vocabulary};
use crate::error::{Error, Result};

/// Sparse vector with entries sorted by term id and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl SparseVector {
    /// Builds a sparse vector from `(id, weight)` pairs. Duplicate ids are
    /// summed, zeros dropped.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = pairs.into_iter().collect();
        if let Some(&(id, _)) = entries.iter().find(|(id, _)| *id >= dim) {
            return Err(Error::OutOfRange {
                index: id,
                len: dim,
            });
        }
        entries.sort_by_key(|&(id, _)| id);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (id, w) in entries {
            match merged.last_mut() {
                Some((last, acc)) if *last == id => *acc += w,
                _ => merged.push((id, w)),
            }
        }
        merged.retain(|&(_, w)| w != 0.0);
        Ok(SparseVector {
            entries: merged,
            dim,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            entries: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, id: usize) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            SparseVector {
                entries: self.entries.iter().map(|&(i, w)| (i, w / n)).collect(),
                dim: self.dim,
            }
        } else {
            self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    values: Vec<f64>,
}

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Self {
        DenseVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            DenseVector {
                values: self.values.iter().map(|x| x / n).collect(),
            }
        } else {
            self.clone()
        }
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(values: Vec<f64>) -> Self {
        DenseVector::new(values)
    }
}

/// Ordered list of independently unit-normalized parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatVector {
    parts: Vec<Vector>,
}

impl ConcatVector {
    pub fn parts(&self) -> &[Vector] {
        &self.parts
    }
}

/// Any representation a document, sentence or sub-theme can take.
#[derive(Debug, Clone, PartialEq)]
pub enum Vector {
    Sparse(SparseVector),
    Dense(DenseVector),
    Concat(ConcatVector),
}

impl Vector {
    pub fn normalized(&self) -> Vector {
        match self {
            Vector::Sparse(v) => Vector::Sparse(v.normalized()),
            Vector::Dense(v) => Vector::Dense(v.normalized()),
            Vector::Concat(c) => Vector::Concat(ConcatVector {
                parts: c.parts.iter().map(Vector::normalized).collect(),
            }),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Vector::Sparse(v) => v.norm(),
            Vector::Dense(v) => v.norm(),
            Vector::Concat(_) => unreachable!("concat parts are never nested"),
        }
    }

    fn shape(&self) -> String {
        match self {
            Vector::Sparse(v) => format!("sparse[{}]", v.dim),
            Vector::Dense(v) => format!("dense[{}]", v.dim()),
            Vector::Concat(c) => {
                let parts: Vec<_> = c.parts.iter().map(Vector::shape).collect();
                format!("concat({})", parts.join(", "))
            }
        }
    }
}

impl From<SparseVector> for Vector {
    fn from(v: SparseVector) -> Self {
        Vector::Sparse(v)
    }
}

impl From<DenseVector> for Vector {
    fn from(v: DenseVector) -> Self {
        Vector::Dense(v)
    }
}

impl From<ConcatVector> for Vector {
    fn from(v: ConcatVector) -> Self {
        Vector::Concat(v)
    }
}

/// `ln(N / df)` for a term id.
pub fn idf(vocab: &Vocabulary, term: usize) -> Result<f64> {
    let df = vocab.doc_freq(term).ok_or(Error::UnknownTerm(term))?;
    if df == 0 {
        return Err(Error::ZeroDocFreq { term });
    }
    Ok((vocab.num_docs() as f64 / f64::from(df)).ln())
}

/// Term frequency times IDF. Out-of-vocabulary tokens are skipped.
pub fn bow_vector(tokens: &[Token], vocab: &Vocabulary) -> SparseVector {
    // ids come from the vocabulary, so idf cannot fail
    tf_weighted(vocab.ids(tokens), vocab.len(), |id| {
        idf(vocab, id).unwrap_or(0.0)
    })
}

fn tf_weighted(
    ids: impl Iterator<Item = usize>,
    dim: usize,
    weight: impl Fn(usize) -> f64,
) -> SparseVector {
    let mut ids: Vec<usize> = ids.collect();
    ids.sort_unstable();
    let mut tf: Vec<(usize, f64)> = Vec::with_capacity(ids.len());
    for id in ids {
        match tf.last_mut() {
            Some((last, acc)) if *last == id => *acc += 1.0,
            _ => tf.push((id, 1.0)),
        }
    }
    let weighted = tf.into_iter().map(|(id, c)| (id, c * weight(id)));
    SparseVector::from_pairs(dim, weighted).expect("vocabulary ids are in range")
}

pub fn normalize(v: &Vector) -> Vector {
    v.normalized()
}

/// Concatenates representations, unit-normalizing each part. Nested
/// concatenations are rejected.
pub fn concat(parts: Vec<Vector>) -> Result<ConcatVector> {
    if parts.is_empty() {
        return Err(Error::Empty("concat needs at least one part"));
    }
    if parts.iter().any(|p| matches!(p, Vector::Concat(_))) {
        return Err(Error::ShapeMismatch("nested concatenation".into()));
    }
    Ok(ConcatVector {
        parts: parts.iter().map(Vector::normalized).collect(),
    })
}

fn part_cosine(a: &Vector, b: &Vector) -> Result<f64> {
    let mismatch = || Error::ShapeMismatch(format!("{} vs {}", a.shape(), b.shape()));
    let dot = match (a, b) {
        (Vector::Sparse(x), Vector::Sparse(y)) if x.dim == y.dim => x.dot(y),
        (Vector::Dense(x), Vector::Dense(y)) if x.dim() == y.dim() => x.dot(y),
        _ => return Err(mismatch()),
    };
    let denom = a.norm() * b.norm();
    Ok(if denom > 0.0 { dot / denom } else { 0.0 })
}

/// Cosine similarity clamped to `[0, 1]`. Zero vectors score 0 against
/// everything. Concatenations must agree in part count and part shapes.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64> {
    let raw = match (a, b) {
        (Vector::Concat(x), Vector::Concat(y)) => {
            if x.parts.len() != y.parts.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} vs {}",
                    a.shape(),
                    b.shape()
                )));
            }
            let mut sum = 0.0;
            for (p, q) in x.parts.iter().zip(&y.parts) {
                sum += part_cosine(p, q)?;
            }
            sum / x.parts.len() as f64
        }
        _ => part_cosine(a, b)?,
    };
    Ok(raw.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(v: &[f64]) -> Vector {
        Vector::Dense(DenseVector::new(v.to_vec()))
    }

    fn vocab_with(terms: &[(&str, u32)], num_docs: usize) -> Vocabulary {
        Vocabulary::from_parts(
            terms.iter().map(|(t, df)| (t.to_string(), *df)).collect(),
            num_docs,
        )
        .unwrap()
    }

    #[test]
    fn idf_examples() {
        let v = vocab_with(&[("a", 1), ("b", 3), ("z", 0)], 3);
        assert!((idf(&v, 0).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert!((idf(&v, 0).unwrap() - 1.0986).abs() < 1e-4);
        assert_eq!(idf(&v, 1).unwrap(), 0.0);
        assert!(matches!(idf(&v, 2), Err(Error::ZeroDocFreq { .. })));
        assert!(matches!(idf(&v, 7), Err(Error::UnknownTerm(7))));
    }

    #[test]
    fn tf_times_idf_hand_case() {
        // tokens a a b with idf(a) = 1, idf(b) = 2
        let idfs = [1.0, 2.0];
        let v = tf_weighted([0, 0, 1].into_iter(), 2, |id| idfs[id]);
        assert_eq!(v.entries(), &[(0, 2.0), (1, 2.0)]);
    }

    #[test]
    fn bow_examples() {
        let v = vocab_with(&[("a", 1), ("b", 1), ("c", 4)], 4);
        let toks: Vec<Token> = ["a", "a", "b", "c", "oov"]
            .iter()
            .map(|w| Token::new(w).unwrap())
            .collect();
        let bow = bow_vector(&toks, &v);
        let ln4 = 4f64.ln();
        assert!((bow.get(0) - 2.0 * ln4).abs() < 1e-12);
        assert!((bow.get(1) - ln4).abs() < 1e-12);
        // idf(c) = 0, dropped
        assert_eq!(bow.entries().len(), 2);

        let oov = bow_vector(&[Token::new("nope").unwrap()], &v);
        assert!(oov.is_zero());
        let zero_idf = bow_vector(&[Token::new("c").unwrap()], &v);
        assert!(zero_idf.is_zero());
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&dense(&[3.0, 4.0]));
        assert_eq!(n, dense(&[0.6, 0.8]));
        let unit = dense(&[1.0, 0.0]);
        assert_eq!(normalize(&unit), unit);
        let zero = dense(&[0.0, 0.0]);
        assert_eq!(normalize(&zero), zero);
        let sz = Vector::Sparse(SparseVector::zeros(5));
        assert_eq!(normalize(&sz), sz);
    }

    #[test]
    fn concat_examples() {
        let u = Vector::Sparse(SparseVector::from_pairs(4, [(0, 2.0), (3, 1.0)]).unwrap());
        let d = dense(&[1.0, 2.0, 2.0]);
        let c = concat(vec![u.clone(), d]).unwrap();
        assert_eq!(c.parts().len(), 2);
        match &c.parts()[1] {
            Vector::Dense(v) => assert!((v.norm() - 1.0).abs() < 1e-12),
            _ => unreachable!(),
        }
        assert!(concat(vec![]).is_err());
        let single = Vector::Concat(concat(vec![u.clone()]).unwrap());
        let other = Vector::Sparse(SparseVector::from_pairs(4, [(0, 1.0), (1, 1.0)]).unwrap());
        let other_c = Vector::Concat(concat(vec![other.clone()]).unwrap());
        let a = cosine(&single, &other_c).unwrap();
        let b = cosine(&u, &other).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cosine_examples() {
        let a = dense(&[1.0, 2.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            cosine(&dense(&[1.0, 0.0]), &dense(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let c = cosine(&dense(&[1.0, 1.0]), &dense(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_clamps_negative_and_handles_zero() {
        assert_eq!(
            cosine(&dense(&[1.0, 0.0]), &dense(&[-1.0, 0.0])).unwrap(),
            0.0
        );
        assert_eq!(
            cosine(&dense(&[0.0, 0.0]), &dense(&[1.0, 0.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn cosine_shape_mismatch() {
        assert!(cosine(&dense(&[1.0]), &dense(&[1.0, 0.0])).is_err());
        let s = Vector::Sparse(SparseVector::zeros(2));
        assert!(cosine(&s, &dense(&[1.0, 0.0])).is_err());
        let c1 = Vector::Concat(concat(vec![dense(&[1.0])]).unwrap());
        let c2 = Vector::Concat(concat(vec![dense(&[1.0]), dense(&[1.0])]).unwrap());
        assert!(cosine(&c1, &c2).is_err());
    }

    #[test]
    fn sparse_from_pairs_merges_and_drops_zeros() {
        let v = SparseVector::from_pairs(5, [(3, 1.0), (1, 2.0), (3, -1.0)]).unwrap();
        assert_eq!(v.entries(), &[(1, 2.0)]);
        assert!(SparseVector::from_pairs(2, [(2, 1.0)]).is_err());
    }

    fn arb_dense(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, dim)
    }

    fn arb_sparse() -> impl Strategy<Value = SparseVector> {
        prop::collection::vec((0usize..8, -5.0f64..5.0), 0..6)
            .prop_map(|pairs| SparseVector::from_pairs(8, pairs).unwrap())
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(a in arb_dense(4), b in arb_dense(4)) {
            let (a, b) = (dense(&a), dense(&b));
            let ab = cosine(&a, &b).unwrap();
            let ba = cosine(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn sparse_cosine_symmetric_and_bounded(a in arb_sparse(), b in arb_sparse()) {
            let (a, b) = (Vector::Sparse(a), Vector::Sparse(b));
            let ab = cosine(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn cosine_scale_invariant(a in arb_dense(3), b in arb_dense(3), alpha in 0.01f64..100.0) {
            let scaled: Vec<f64> = a.iter().map(|x| x * alpha).collect();
            let c1 = cosine(&dense(&a), &dense(&b)).unwrap();
            let c2 = cosine(&dense(&scaled), &dense(&b)).unwrap();
            prop_assert!((c1 - c2).abs() < 1e-12);
        }

        #[test]
        fn normalize_idempotent(a in arb_dense(5), s in arb_sparse()) {
            let once = normalize(&dense(&a));
            let twice = normalize(&once);
            if let (Vector::Dense(x), Vector::Dense(y)) = (&once, &twice) {
                for (p, q) in x.values().iter().zip(y.values()) {
                    prop_assert!((p - q).abs() < 1e-12);
                }
            }
            let once = s.normalized();
            let twice = once.normalized();
            for (p, q) in once.entries().iter().zip(twice.entries()) {
                prop_assert_eq!(p.0, q.0);
                prop_assert!((p.1 - q.1).abs() < 1e-12);
            }
        }

        #[test]
        fn single_part_concat_matches_plain(a in arb_sparse(), b in arb_sparse()) {
            let (a, b) = (Vector::Sparse(a), Vector::Sparse(b));
            let plain = cosine(&a, &b).unwrap();
            let ca = Vector::Concat(concat(vec![a]).unwrap());
            let cb = Vector::Concat(concat(vec![b]).unwrap());
            prop_assert!((cosine(&ca, &cb).unwrap() - plain).abs() < 1e-12);
        }

        #[test]
        fn concat_parts_are_unit_or_zero(a in arb_sparse(), d in arb_dense(3)) {
            let c = concat(vec![Vector::Sparse(a), dense(&d)]).unwrap();
            for p in c.parts() {
                let n = p.norm();
                prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
            }
        }
    }
}
