//! Latent semantic indexing via a truncated singular value decomposition.
//!
//! The document-major tf-idf matrix `X` (documents × terms) is the transpose
//! of the usual term-document matrix `A`, so `A = T·diag(S)·Dᵀ` becomes
//! `X = D·diag(S)·Tᵀ`. The decomposition uses one-sided (Hestenes) Jacobi
//! rotations on the smaller side of `X`, which keeps both factors orthonormal
//! to working precision.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::vectorize::{DocTermMatrix, SparseVector};

const MAX_SWEEPS: usize = 80;
const ORTHOGONALITY_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsiModel {
    /// Term factor, terms × k, orthonormal columns.
    pub t: Matrix,
    /// Singular values, strictly positive and non-increasing.
    pub s: Vec<f64>,
    /// Document factor, documents × k, orthonormal columns.
    pub d: Matrix,
    pub k: usize,
}

/// Thin SVD of a dense matrix: `m = u · diag(s) · vᵀ`, rank-trimmed, with
/// singular values in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD. Zero singular values are dropped.
pub fn jacobi_svd(m: &Matrix) -> Result<Svd> {
    let transposed = m.rows() < m.cols();
    let work = if transposed { m.transpose() } else { m.clone() };
    let (rows, cols) = (work.rows(), work.cols());

    // column-major copies so rotations touch contiguous memory
    let mut w: Vec<Vec<f64>> = (0..cols).map(|j| work.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= ORTHOGONALITY_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi SVD did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let sigma: Vec<f64> = w.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let cutoff = smax * rows.max(cols) as f64 * f64::EPSILON;
    let kept: Vec<usize> = order.into_iter().filter(|&i| sigma[i] > cutoff).collect();

    let r = kept.len();
    let mut u = Matrix::zeros(rows, r);
    let mut vm = Matrix::zeros(cols, r);
    let mut s = Vec::with_capacity(r);
    for (out, &i) in kept.iter().enumerate() {
        s.push(sigma[i]);
        for row in 0..rows {
            u[(row, out)] = w[i][row] / sigma[i];
        }
        for row in 0..cols {
            vm[(row, out)] = v[i][row];
        }
    }
    Ok(if transposed {
        Svd { u: vm, s, v: u }
    } else {
        Svd { u, s, v: vm }
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (a, b) = (&mut left[p], &mut right[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Topic count used when none is configured: `min(100, min(docs, terms) - 1)`,
/// at least 1.
pub fn default_topics(docs: usize, terms: usize) -> usize {
    docs.min(terms).saturating_sub(1).clamp(1, 100)
}

/// Top-`k` singular triplets of the tf-idf matrix.
///
/// `k` larger than the matrix rank is clamped with a warning. Column signs
/// are fixed so that the largest-magnitude entry of each term column is
/// positive.
pub fn fit_lsi(dtm: &DocTermMatrix, k: usize) -> Result<LsiModel> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "LSI topic count must be at least 1".into(),
        ));
    }
    if dtm.nnz() == 0
        || dtm
            .rows()
            .iter()
            .all(|r| r.values.iter().all(|&v| v == 0.0))
    {
        return Err(Error::Numeric(
            "cannot fit LSI on an all-zero matrix".into(),
        ));
    }
    let svd = jacobi_svd(&dtm.to_dense())?;
    let rank = svd.s.len();
    let k_eff = if k > rank {
        warn!("requested {k} LSI topics but the matrix has rank {rank}; using {rank}");
        rank
    } else {
        k
    };

    let (docs, terms) = (dtm.n_rows(), dtm.n_cols());
    let mut t = Matrix::zeros(terms, k_eff);
    let mut d = Matrix::zeros(docs, k_eff);
    for j in 0..k_eff {
        let mut best = 0usize;
        for i in 0..terms {
            if svd.v[(i, j)].abs() > svd.v[(best, j)].abs() {
                best = i;
            }
        }
        let sign = if svd.v[(best, j)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..terms {
            t[(i, j)] = sign * svd.v[(i, j)];
        }
        for i in 0..docs {
            d[(i, j)] = sign * svd.u[(i, j)];
        }
    }
    Ok(LsiModel {
        t,
        s: svd.s[..k_eff].to_vec(),
        d,
        k: k_eff,
    })
}

impl LsiModel {
    pub fn n_terms(&self) -> usize {
        self.t.rows()
    }

    pub fn n_docs(&self) -> usize {
        self.d.rows()
    }

    /// Training document representations `D·diag(S)` (documents × k).
    pub fn doc_vectors(&self) -> Matrix {
        let mut out = self.d.clone();
        for i in 0..out.rows() {
            for (x, s) in out.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        out
    }

    /// Projects a tf-idf row onto the topic space: `xᵀ·T`. For training rows
    /// this reproduces the corresponding row of [`LsiModel::doc_vectors`].
    pub fn fold_in(&self, doc: &SparseVector) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        for (i, x) in doc.iter() {
            if i >= self.n_terms() {
                return Err(Error::InvalidArgument(format!(
                    "term index {i} outside the LSI vocabulary of {} terms",
                    self.n_terms()
                )));
            }
            for (o, t) in out.iter_mut().zip(self.t.row(i)) {
                *o += x * t;
            }
        }
        Ok(out)
    }

    pub fn fold_in_matrix(&self, dtm: &DocTermMatrix) -> Result<Matrix> {
        if dtm.n_cols() != self.n_terms() {
            return Err(Error::InvalidArgument(format!(
                "matrix has {} columns, LSI model has {} terms",
                dtm.n_cols(),
                self.n_terms()
            )));
        }
        let rows = dtm
            .rows()
            .iter()
            .map(|r| self.fold_in(r))
            .collect::<Result<Vec<_>>>()?;
        let mut m = Matrix::zeros(rows.len(), self.k);
        for (i, r) in rows.iter().enumerate() {
            m.row_mut(i).copy_from_slice(r);
        }
        Ok(m)
    }

    /// `D·diag(S)·Tᵀ`, documents × terms.
    pub fn reconstruct(&self) -> Matrix {
        self.doc_vectors().matmul(&self.t.transpose())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn semantic_similarity(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(
        a.len(),
        b.len(),
        "similarity of vectors with different dimensions"
    );
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}
