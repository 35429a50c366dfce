//! Supervised class combination: WPGMA agglomeration of fine classes in a
//! document-representation space, cut into `K` abstract classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{abstract_label, Corpus, LabelLevel};
use crate::error::{Error, Result};
use crate::linalg::{euclidean, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRepresentation {
    pub label: String,
    pub centroid: Vec<f64>,
    pub support: usize,
}

/// Mean document vector of every label in the corpus' label space. A
/// multi-label document contributes to each of its classes.
pub fn class_centroids(corpus: &Corpus, doc_vecs: &Matrix) -> Result<Vec<ClassRepresentation>> {
    if doc_vecs.rows() != corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "{} document vectors for {} documents",
            doc_vecs.rows(),
            corpus.len()
        )));
    }
    let dim = doc_vecs.cols();
    let mut acc: BTreeMap<String, (Vec<f64>, usize)> = corpus
        .label_space()
        .into_iter()
        .map(|l| (l, (vec![0.0; dim], 0)))
        .collect();
    for (doc, row) in corpus.documents().iter().zip(doc_vecs.iter_rows()) {
        for label in &doc.labels {
            let (sum, n) = acc.get_mut(label).expect("corpus labels are validated");
            sum.iter_mut().zip(row).for_each(|(s, x)| *s += x);
            *n += 1;
        }
    }
    acc.into_iter()
        .map(|(label, (mut sum, n))| {
            if n == 0 {
                return Err(Error::Validation(format!(
                    "label {label:?} has no documents"
                )));
            }
            sum.iter_mut().for_each(|s| *s /= n as f64);
            Ok(ClassRepresentation {
                label,
                centroid: sum,
                support: n,
            })
        })
        .collect()
}

/// Symmetric non-negative distances with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Matrix,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Matrix) -> Result<Self> {
        let n = labels.len();
        if values.rows() != n || values.cols() != n {
            return Err(Error::InvalidArgument(format!(
                "{n} labels for a {}x{} distance matrix",
                values.rows(),
                values.cols()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::Validation(format!("non-zero diagonal at {i}")));
            }
            for j in 0..n {
                let d = values[(i, j)];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::Validation(format!(
                        "invalid distance {d} at ({i}, {j})"
                    )));
                }
                if (d - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "asymmetric distance at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Euclidean distances between class centroids.
pub fn pairwise_distances(reps: &[ClassRepresentation]) -> Result<DistanceMatrix> {
    if reps.len() < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    let dim = reps[0].centroid.len();
    if let Some(r) = reps.iter().find(|r| r.centroid.len() != dim) {
        return Err(Error::InvalidArgument(format!(
            "centroid of {:?} has dimension {}, expected {dim}",
            r.label,
            r.centroid.len()
        )));
    }
    let n = reps.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&reps[i].centroid, &reps[j].centroid);
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    DistanceMatrix::new(reps.iter().map(|r| r.label.clone()).collect(), m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub id: usize,
}

/// Dendrogram over `n` leaves. Leaf ids are `0..n`; the cluster created by
/// merge `i` gets id `n + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

impl MergeTree {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

/// Agglomerates with the WPGMA recurrence
/// `d(i∪j, x) = (d(i, x) + d(j, x)) / 2`.
///
/// At each step the closest active pair is merged; ties go to the
/// lexicographically smallest `(a, b)` cluster-id pair with `a < b`.
/// Heights are recorded as computed and may be non-monotone.
pub fn wpgma_cluster(dist: &DistanceMatrix) -> MergeTree {
    let n = dist.len();
    assert!(n >= 2, "WPGMA needs at least two leaves");
    let total = 2 * n - 1;
    let mut d = Matrix::zeros(total, total);
    for i in 0..n {
        for j in 0..n {
            d[(i, j)] = dist.get(i, j);
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let h = d[(a, b)];
                if best.is_none_or(|(_, _, bh)| h < bh) {
                    best = Some((a, b, h));
                }
            }
        }
        let (a, b, height) = best.expect("at least two active clusters");
        let id = n + step;
        active.retain(|&c| c != a && c != b);
        for &x in &active {
            let v = (d[(a, x)] + d[(b, x)]) / 2.0;
            d[(id, x)] = v;
            d[(x, id)] = v;
        }
        active.push(id);
        merges.push(Merge { a, b, height, id });
    }
    MergeTree {
        leaves: dist.labels().to_vec(),
        merges,
    }
}

/// Fine label → abstract class id in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    pub k: usize,
    pub map: BTreeMap<String, usize>,
}

impl LabelMapping {
    pub fn get(&self, label: &str) -> Option<usize> {
        self.map.get(label).copied()
    }

    /// Fine labels grouped by abstract class.
    pub fn classes(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.k];
        for (label, &c) in &self.map {
            out[c].push(label.as_str());
        }
        out
    }

    /// JSON object `fine id → abstract id`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.map).expect("mapping serializes")
    }
}

/// Applies the first `F - k` merges, leaving exactly `k` clusters. Abstract
/// ids are assigned in ascending order of each cluster's smallest leaf id.
pub fn cut_tree(tree: &MergeTree, k: usize) -> Result<LabelMapping> {
    let n = tree.n_leaves();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot cut a tree of {n} leaves into {k} clusters"
        )));
    }
    // representative (smallest leaf) of every cluster id
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = x;
        while parent[c] != r {
            let next = parent[c];
            parent[c] = r;
            c = next;
        }
        r
    }
    for m in &tree.merges[..n - k] {
        let ra = find(&mut parent, m.a);
        let rb = find(&mut parent, m.b);
        parent[m.id] = m.id;
        parent[ra] = m.id;
        parent[rb] = m.id;
    }
    let roots: Vec<usize> = (0..n).map(|leaf| find(&mut parent, leaf)).collect();
    let mut abstract_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &roots {
        let next = abstract_of_root.len();
        abstract_of_root.entry(r).or_insert(next);
    }
    let map = tree
        .leaves
        .iter()
        .zip(&roots)
        .map(|(label, r)| (label.clone(), abstract_of_root[r]))
        .collect();
    Ok(LabelMapping { k, map })
}

/// Maps every document's labels through `mapping` and deduplicates.
pub fn relabel_corpus(corpus: &Corpus, mapping: &LabelMapping) -> Result<Corpus> {
    let labels = corpus
        .documents()
        .iter()
        .map(|d| {
            d.labels
                .iter()
                .map(|l| {
                    mapping.get(l).map(abstract_label).ok_or_else(|| {
                        Error::Validation(format!("label {l:?} missing from the label mapping"))
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    corpus.with_labels(labels, LabelLevel::Abstract(mapping.k))
}
