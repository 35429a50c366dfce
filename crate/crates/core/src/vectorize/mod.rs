//! Sparse tf-idf document-term matrices and pre-trained embedding ingestion.

mod embeddings;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{clean_text, Corpus, Stopwords};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use embeddings::{
    load_sentence_embeddings, load_word_embeddings, mean_sentence_embeddings, mean_word_embedding,
    synthetic_word_embeddings, write_sentence_embeddings, write_word_embeddings, EmbeddingTable,
    MeanEmbedding, SentenceEmbeddingSet,
};

/// Token lists for every document, cleaned with the stopword list of its language.
pub fn tokenize_corpus(corpus: &Corpus, stopwords: &Stopwords) -> Vec<Vec<String>> {
    corpus
        .documents()
        .iter()
        .map(|d| clean_text(&d.text, stopwords.for_lang(d.lang)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    df: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Terms with document frequency `>= min_df`, sorted lexicographically.
    pub fn build(docs: &[Vec<String>], min_df: usize) -> Result<Self> {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for tokens in docs {
            let mut uniq: Vec<&str> = tokens.iter().map(String::as_str).collect();
            uniq.sort_unstable();
            uniq.dedup();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let kept: Vec<(&str, usize)> = df
            .into_iter()
            .filter(|&(_, n)| n >= min_df.max(1))
            .collect();
        if kept.is_empty() {
            return Err(Error::Validation(format!(
                "empty vocabulary: no term reaches min_df={min_df}"
            )));
        }
        let terms: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            terms,
            index,
            df: kept.iter().map(|&(_, n)| n).collect(),
            n_docs: docs.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequencies(&self) -> &[usize] {
        &self.df
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// `ln(N / df)` for term `i`.
    pub fn idf(&self, i: usize) -> f64 {
        (self.n_docs as f64 / self.df[i] as f64).ln()
    }
}

/// Convenience wrapper: tokenize with `stopwords` and build a vocabulary.
pub fn build_vocabulary(
    corpus: &Corpus,
    stopwords: &Stopwords,
    min_df: usize,
) -> Result<Vocabulary> {
    Vocabulary::build(&tokenize_corpus(corpus, stopwords), min_df)
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut v = SparseVector::default();
        for (i, &x) in dense.iter().enumerate() {
            if x != 0.0 {
                v.indices.push(i);
                v.values.push(x);
            }
        }
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// Document-major sparse tf-idf matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTermMatrix {
    rows: Vec<SparseVector>,
    n_cols: usize,
    normalized: bool,
}

impl DocTermMatrix {
    pub fn from_rows(rows: Vec<SparseVector>, n_cols: usize, normalized: bool) -> Self {
        debug_assert!(rows
            .iter()
            .all(|r| r.indices.windows(2).all(|w| w[0] < w[1])
                && r.indices.iter().all(|&i| i < n_cols)));
        Self {
            rows,
            n_cols,
            normalized,
        }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let rows = m.iter_rows().map(SparseVector::from_dense).collect();
        Self::from_rows(rows, m.cols(), false)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &SparseVector {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SparseVector] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseVector::nnz).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.rows[i];
        r.indices.binary_search(&j).map_or(0.0, |p| r.values[p])
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows.len(), self.n_cols);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r.iter() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn select_rows(&self, indices: &[usize]) -> DocTermMatrix {
        DocTermMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            n_cols: self.n_cols,
            normalized: self.normalized,
        }
    }
}

/// Raw-count tf times `ln(N/df)`, optionally L2-normalized per row.
///
/// `docs` may be unseen documents; idf always comes from `vocab`.
/// Out-of-vocabulary tokens are ignored.
pub fn tfidf(docs: &[Vec<String>], vocab: &Vocabulary, normalize: bool) -> DocTermMatrix {
    let rows = docs
        .iter()
        .map(|tokens| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for t in tokens {
                if let Some(i) = vocab.get(t) {
                    *counts.entry(i).or_default() += 1;
                }
            }
            let mut row = SparseVector::default();
            for (i, tf) in counts {
                let w = tf as f64 * vocab.idf(i);
                if w != 0.0 {
                    row.indices.push(i);
                    row.values.push(w);
                }
            }
            if normalize {
                let n = row.norm();
                if n > 0.0 {
                    row.values.iter_mut().for_each(|v| *v /= n);
                }
            }
            row
        })
        .collect();
    DocTermMatrix::from_rows(rows, vocab.len(), normalize)
}
