//! Unsupervised class abstraction: k-means over embedding units (sentences
//! or words) and majority-vote document labeling.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{abstract_label, Corpus, LabelLevel};
use crate::error::{Error, Result};
use crate::linalg::squared_euclidean;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Cluster of every training point.
    pub labels: Vec<usize>,
    /// Inertia after every Lloyd update, in order.
    pub inertia_trace: Vec<f64>,
}

impl KMeansModel {
    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("k-means needs at least one point".into()))?;
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "points must have positive dimension".into(),
        ));
    }
    if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
        return Err(Error::InvalidArgument(format!(
            "point {i} has dimension {}, expected {dim}",
            p.len()
        )));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(
            "non-finite coordinate in k-means input".into(),
        ));
    }
    Ok(dim)
}

fn distinct_points(points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_euclidean(centroid, p);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_euclidean(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 && target < w {
                chosen = Some(i);
                break;
            }
            target -= w;
        }
        // rounding can walk past the end; fall back to the last positive weight
        let idx = chosen.unwrap_or_else(|| {
            d2.iter()
                .rposition(|&w| w > 0.0)
                .expect("k does not exceed the number of distinct points")
        });
        let c = points[idx].clone();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(squared_euclidean(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint (or [`MAX_LLOYD_ITERATIONS`]). An empty cluster takes over the
/// point farthest from its centroid.
pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansModel> {
    let dim = check_points(points)?;
    let distinct = distinct_points(points);
    if k == 0 || k > distinct {
        return Err(Error::InvalidArgument(format!(
            "k = {k} but the data has {distinct} distinct points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, k, &mut rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_LLOYD_ITERATIONS {
        let next: Vec<usize> = points.iter().map(|p| nearest(&centroids, p).0).collect();
        if next == labels {
            break;
        }
        labels = next;
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for empty in (0..k).filter(|&c| counts[c] == 0).collect::<Vec<_>>() {
            let far = (0..points.len())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    let da = squared_euclidean(&points[a], &centroids[labels[a]]);
                    let db = squared_euclidean(&points[b], &centroids[labels[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("some cluster holds more than one point");
            counts[labels[far]] -= 1;
            counts[empty] = 1;
            labels[far] = empty;
            centroids[empty] = points[far].clone();
        }

        let inertia = inertia_of(points, &centroids, &labels);
        if let Some(&prev) = trace.last() {
            debug_assert!(
                inertia <= prev + 1e-9 * prev.max(1.0),
                "Lloyd inertia increased: {prev} -> {inertia}"
            );
        }
        trace.push(inertia);
    }

    let labels: Vec<usize> = points.iter().map(|p| nearest(&centroids, p).0).collect();
    let inertia = inertia_of(points, &centroids, &labels);
    Ok(KMeansModel {
        k,
        centroids,
        inertia,
        iterations,
        seed,
        labels,
        inertia_trace: trace,
    })
}

fn inertia_of(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &c)| squared_euclidean(p, &centroids[c]))
        .sum()
}

/// Nearest centroid; ties go to the lowest centroid id.
pub fn assign(model: &KMeansModel, points: &[Vec<f64>]) -> Result<Vec<usize>> {
    let dim = model.dim();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has dimension {}, model expects {dim}",
                    p.len()
                )));
            }
            Ok(nearest(&model.centroids, p).0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionRow {
    pub k: usize,
    pub inertia: f64,
    /// `None` stands for −∞ (zero inertia).
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub rows: Vec<KSelectionRow>,
    pub chosen_k: usize,
    pub criterion: String,
    pub aic_formula: String,
    pub bic_formula: String,
}

const LOG_LIKELIHOOD_TERM: &str = "n*d*ln(inertia/(n*d)) - 2*sum_j n_j*ln(n_j/n)";

/// Fits every candidate `k` and scores it under a hard-assignment spherical
/// Gaussian mixture with shared variance. The chosen `k` minimizes BIC.
pub fn select_k(points: &[Vec<f64>], k_range: &[usize], seed: u64) -> Result<KSelectionReport> {
    if k_range.is_empty() {
        return Err(Error::InvalidArgument("empty k range".into()));
    }
    let dim = check_points(points)?;
    let n = points.len() as f64;
    let d = dim as f64;
    let mut rows = Vec::with_capacity(k_range.len());
    for &k in k_range {
        let model = kmeans_fit(points, k, seed)?;
        let params = (k * (dim + 1)) as f64;
        let degenerate = model.inertia <= 0.0;
        let (aic, bic) = if degenerate {
            (None, None)
        } else {
            let mut sizes = vec![0usize; k];
            model.labels.iter().for_each(|&c| sizes[c] += 1);
            let assignment: f64 = sizes
                .iter()
                .filter(|&&s| s > 0)
                .map(|&s| s as f64 * (s as f64 / n).ln())
                .sum();
            let fit = n * d * (model.inertia / (n * d)).ln() - 2.0 * assignment;
            (Some(fit + 2.0 * params), Some(fit + params * n.ln()))
        };
        rows.push(KSelectionRow {
            k,
            inertia: model.inertia,
            aic,
            bic,
            degenerate,
        });
    }
    let score = |r: &KSelectionRow| r.bic.unwrap_or(f64::NEG_INFINITY);
    let chosen = rows
        .iter()
        .min_by(|a, b| score(a).total_cmp(&score(b)).then(a.k.cmp(&b.k)))
        .expect("non-empty range");
    Ok(KSelectionReport {
        chosen_k: chosen.k,
        criterion: "bic".into(),
        aic_formula: format!("{LOG_LIKELIHOOD_TERM} + 2*k*(d+1)"),
        bic_formula: format!("{LOG_LIKELIHOOD_TERM} + k*(d+1)*ln(n)"),
        rows,
    })
}

/// Labels each document with its most frequent unit cluster(s). Ties keep
/// every tied cluster, producing a multi-label document.
///
/// `unit_clusters[i]` lists the clusters of document `i`'s units.
pub fn label_documents(corpus: &Corpus, unit_clusters: &[Vec<usize>], k: usize) -> Result<Corpus> {
    if unit_clusters.len() != corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "{} unit lists for {} documents",
            unit_clusters.len(),
            corpus.len()
        )));
    }
    let labels = corpus
        .documents()
        .iter()
        .zip(unit_clusters)
        .map(|(doc, units)| {
            if units.is_empty() {
                return Err(Error::Validation(format!(
                    "document {:?} has no embedded units to vote with",
                    doc.id
                )));
            }
            let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
            for &c in units {
                if c >= k {
                    return Err(Error::InvalidArgument(format!(
                        "cluster id {c} outside 0..{k}"
                    )));
                }
                *votes.entry(c).or_default() += 1;
            }
            let top = *votes.values().max().expect("non-empty");
            Ok(votes
                .into_iter()
                .filter(|&(_, v)| v == top)
                .map(|(c, _)| abstract_label(c))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    corpus.with_labels(labels, LabelLevel::Abstract(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LabelHierarchy, Lang};
    use std::collections::BTreeSet;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn one_dimensional_optimum() {
        // the exhaustive minimum over all 2-partitions is {0, 0.1} | {10, 10.1}
        let points = pts(&[0.0, 0.1, 10.0, 10.1]);
        for seed in 0..10 {
            let m = kmeans_fit(&points, 2, seed).unwrap();
            assert_eq!(m.labels[0], m.labels[1]);
            assert_eq!(m.labels[2], m.labels[3]);
            assert_ne!(m.labels[0], m.labels[2]);
            let mut c: Vec<f64> = m.centroids.iter().map(|c| c[0]).collect();
            c.sort_by(f64::total_cmp);
            assert!((c[0] - 0.05).abs() < 1e-12 && (c[1] - 10.05).abs() < 1e-12);
            assert!((m.inertia - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let m = kmeans_fit(&pts(&[1.0, 2.0, 6.0]), 1, 3).unwrap();
        assert!((m.centroids[0][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_per_point_has_zero_inertia() {
        let m = kmeans_fit(&pts(&[1.0, 2.0, 6.0, -4.0]), 4, 3).unwrap();
        assert_eq!(m.inertia, 0.0);
    }

    #[test]
    fn rejects_too_many_clusters() {
        assert!(kmeans_fit(&pts(&[1.0, 1.0, 2.0]), 3, 0).is_err());
        assert!(kmeans_fit(&[], 1, 0).is_err());
        assert!(kmeans_fit(&[vec![1.0], vec![1.0, 2.0]], 1, 0).is_err());
    }

    #[test]
    fn assignment_rules() {
        let model = KMeansModel {
            k: 3,
            centroids: vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![5.0, 5.0]],
            inertia: 0.0,
            iterations: 0,
            seed: 0,
            labels: vec![],
            inertia_trace: vec![],
        };
        assert_eq!(assign(&model, &[vec![5.0, 5.0]]).unwrap(), vec![2]);
        assert_eq!(assign(&model, &[vec![1.0, 0.0]]).unwrap(), vec![0]);
        assert!(assign(&model, &[vec![1.0]]).is_err());
    }

    #[test]
    fn training_points_reproduce_assignment() {
        let points: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64 * 1.3, (i * i % 11) as f64 * 0.7])
            .collect();
        let m = kmeans_fit(&points, 4, 9).unwrap();
        assert!(m.iterations < MAX_LLOYD_ITERATIONS);
        assert_eq!(assign(&m, &points).unwrap(), m.labels);
        assert!(m.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let points: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).sin(), (i as f64).cos()])
            .collect();
        assert_eq!(
            kmeans_fit(&points, 3, 4).unwrap(),
            kmeans_fit(&points, 3, 4).unwrap()
        );
    }

    #[test]
    fn select_k_degenerate_and_single_row() {
        let same = vec![vec![1.0, 1.0]; 5];
        let r = select_k(&same, &[1], 0).unwrap();
        assert!(r.rows[0].degenerate);
        assert_eq!(r.rows[0].bic, None);
        let points = pts(&[0.0, 1.0, 2.0, 9.0, 10.0]);
        let r = select_k(&points, &[3], 0).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.chosen_k, 3);
        assert!(select_k(&points, &[], 0).is_err());
    }

    fn corpus(n: usize) -> Corpus {
        let h = LabelHierarchy::new(
            [("b".to_string(), "t".to_string())].into(),
            [("t".to_string(), "m".to_string())].into(),
        )
        .unwrap();
        let docs = (0..n)
            .map(|i| Document {
                id: format!("d{i}"),
                lang: Lang::En,
                text: String::new(),
                labels: ["b".to_string()].into(),
                sentences: vec![],
            })
            .collect();
        Corpus::new(docs, h, LabelLevel::Belief).unwrap()
    }

    #[test]
    fn majority_vote_with_ties() {
        let c = label_documents(&corpus(3), &[vec![2, 2, 5], vec![2, 5], vec![7]], 8).unwrap();
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(c.documents()[0].labels, set(&["2"]));
        assert_eq!(c.documents()[1].labels, set(&["2", "5"]));
        assert_eq!(c.documents()[2].labels, set(&["7"]));
        assert_eq!(c.active_level(), LabelLevel::Abstract(8));
        let err = label_documents(&corpus(2), &[vec![1], vec![]], 8).unwrap_err();
        assert!(err.to_string().contains("d1"));
    }
}
