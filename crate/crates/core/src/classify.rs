//! One-vs-rest gradient-boosted regression trees with logistic loss.
//!
//! Features are sparse rows of a [`DocTermMatrix`]; implicit zeros take part
//! in every split evaluation. Splits are exact and greedy over the sorted
//! distinct values of each feature, scored by variance reduction of the
//! residuals; leaves hold a Newton step.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{DocTermMatrix, SparseVector};

const PROB_CLAMP: f64 = 1e-6;
const MIN_HESSIAN: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Probability at or above which a class is predicted.
    pub threshold: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 2,
            threshold: 0.5,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &SparseVector) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = x
                        .indices
                        .binary_search(&feature)
                        .map_or(0.0, |p| x.values[p]);
                    at = if v <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEnsemble {
    pub class: String,
    /// Initial log-odds score.
    pub f0: f64,
    pub trees: Vec<RegressionTree>,
    /// Summed training logistic loss before the first round and after each
    /// round.
    pub train_loss: Vec<f64>,
}

impl ClassEnsemble {
    fn raw_score(&self, x: &SparseVector, learning_rate: f64) -> f64 {
        self.f0
            + self
                .trees
                .iter()
                .map(|t| learning_rate * t.predict(x))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    pub n_features: usize,
    pub classes: Vec<String>,
    pub ensembles: Vec<ClassEnsemble>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logistic_loss(y: f64, score: f64) -> f64 {
    // ln(1 + e^{-s}) for y = 1, ln(1 + e^{s}) for y = 0, computed stably
    let z = if y > 0.5 { -score } else { score };
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Column-major view with each column's nonzeros sorted by value.
struct SortedColumns {
    columns: Vec<Vec<(usize, f64)>>,
}

impl SortedColumns {
    fn new(x: &DocTermMatrix) -> Self {
        let mut columns = vec![Vec::new(); x.n_cols()];
        for (row, r) in x.rows().iter().enumerate() {
            for (j, v) in r.iter() {
                if v != 0.0 {
                    columns[j].push((row, v));
                }
            }
        }
        for c in &mut columns {
            c.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        Self { columns }
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct TreeBuilder<'a> {
    columns: &'a SortedColumns,
    residuals: &'a [f64],
    hessians: &'a [f64],
    params: &'a GbdtParams,
    /// Node currently holding each sample, or `usize::MAX` once placed in a leaf.
    node_of: Vec<usize>,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(mut self, samples: Vec<usize>) -> RegressionTree {
        self.nodes.push(Node::Leaf { value: 0.0 });
        for &s in &samples {
            self.node_of[s] = 0;
        }
        self.grow(0, samples, 0);
        RegressionTree { nodes: self.nodes }
    }

    fn grow(&mut self, id: usize, samples: Vec<usize>, depth: usize) {
        let split =
            if depth < self.params.max_depth && samples.len() >= 2 * self.params.min_samples_leaf {
                self.best_split(id, &samples)
            } else {
                None
            };
        let Some(split) = split else {
            let num: f64 = samples.iter().map(|&s| self.residuals[s]).sum();
            let den: f64 = samples.iter().map(|&s| self.hessians[s]).sum();
            let value = if den < MIN_HESSIAN { 0.0 } else { num / den };
            self.nodes[id] = Node::Leaf { value };
            return;
        };

        // implicit zeros go right only when the threshold is negative
        let zeros_right = split.threshold < 0.0;
        let flipped: BTreeSet<usize> = self.columns.columns[split.feature]
            .iter()
            .filter(|&&(row, v)| self.node_of[row] == id && (v > split.threshold) != zeros_right)
            .map(|&(row, _)| row)
            .collect();
        let (right, left): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|s| flipped.contains(s) != zeros_right);
        let left_id = self.nodes.len();
        let right_id = left_id + 1;
        self.nodes.push(Node::Leaf { value: 0.0 });
        self.nodes.push(Node::Leaf { value: 0.0 });
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_id,
            right: right_id,
        };
        for &s in &left {
            self.node_of[s] = left_id;
        }
        for &s in &right {
            self.node_of[s] = right_id;
        }
        self.grow(left_id, left, depth + 1);
        self.grow(right_id, right, depth + 1);
    }

    fn best_split(&self, id: usize, samples: &[usize]) -> Option<SplitCandidate> {
        let n = samples.len();
        let total: f64 = samples.iter().map(|&s| self.residuals[s]).sum();
        let parent = total * total / n as f64;
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<SplitCandidate> = None;

        for (feature, column) in self.columns.columns.iter().enumerate() {
            let entries: Vec<(f64, f64)> = column
                .iter()
                .filter(|&&(row, _)| self.node_of[row] == id)
                .map(|&(row, v)| (v, self.residuals[row]))
                .collect();
            if entries.is_empty() {
                continue;
            }
            let zeros = n - entries.len();
            let zero_sum = total - entries.iter().map(|e| e.1).sum::<f64>();
            let neg = entries.partition_point(|e| e.0 < 0.0);

            // (value, count, residual sum) groups in ascending value order;
            // implicit zeros form one group between negatives and positives
            let mut groups: Vec<(f64, usize, f64)> = Vec::new();
            let mut push = |v: f64, c: usize, s: f64| match groups.last_mut() {
                Some(g) if g.0 == v => {
                    g.1 += c;
                    g.2 += s;
                }
                _ => groups.push((v, c, s)),
            };
            for &(v, r) in &entries[..neg] {
                push(v, 1, r);
            }
            if zeros > 0 {
                push(0.0, zeros, zero_sum);
            }
            for &(v, r) in &entries[neg..] {
                push(v, 1, r);
            }

            let (mut left_n, mut left_sum) = (0usize, 0.0f64);
            for w in groups.windows(2) {
                left_n += w[0].1;
                left_sum += w[0].2;
                let right_n = n - left_n;
                if left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / left_n as f64
                    + right_sum * right_sum / right_n as f64
                    - parent;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature,
                        threshold: 0.5 * (w[0].0 + w[1].0),
                        gain,
                    });
                }
            }
        }
        best
    }
}

fn train_class(
    class: &str,
    targets: &[f64],
    x: &DocTermMatrix,
    columns: &SortedColumns,
    params: &GbdtParams,
) -> ClassEnsemble {
    let n = targets.len();
    let rate = targets.iter().sum::<f64>() / n as f64;
    let p = rate.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let f0 = (p / (1.0 - p)).ln();
    let mut scores = vec![f0; n];
    let loss = |scores: &[f64]| -> f64 {
        targets
            .iter()
            .zip(scores)
            .map(|(&y, &s)| logistic_loss(y, s))
            .sum()
    };
    let mut train_loss = vec![loss(&scores)];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let probs: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
        let residuals: Vec<f64> = targets.iter().zip(&probs).map(|(y, p)| y - p).collect();
        let hessians: Vec<f64> = probs.iter().map(|p| p * (1.0 - p)).collect();
        let tree = TreeBuilder {
            columns,
            residuals: &residuals,
            hessians: &hessians,
            params,
            node_of: vec![usize::MAX; n],
            nodes: Vec::new(),
        }
        .build((0..n).collect());
        for (s, row) in scores.iter_mut().zip(x.rows()) {
            *s += params.learning_rate * tree.predict(row);
        }
        train_loss.push(loss(&scores));
        trees.push(tree);
    }
    ClassEnsemble {
        class: class.to_owned(),
        f0,
        trees,
        train_loss,
    }
}

/// Trains one binary ensemble per class of `classes`.
pub fn train_gbdt(
    x: &DocTermMatrix,
    y: &[BTreeSet<String>],
    classes: &[String],
    params: &GbdtParams,
) -> Result<GbdtModel> {
    params.validate()?;
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::InvalidArgument("empty feature matrix".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows for {} label sets",
            x.n_rows(),
            y.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::InvalidArgument("empty label space".into()));
    }
    let targets: Vec<Vec<f64>> = classes
        .iter()
        .map(|c| {
            y.iter()
                .map(|ls| f64::from(u8::from(ls.contains(c))))
                .collect()
        })
        .collect();
    if let Some((c, _)) = classes
        .iter()
        .zip(&targets)
        .find(|(_, t)| t.iter().all(|&v| v == 0.0))
    {
        return Err(Error::Validation(format!(
            "class {c:?} has no positive examples"
        )));
    }
    let columns = SortedColumns::new(x);
    let ensembles = classes
        .par_iter()
        .zip(targets.par_iter())
        .map(|(c, t)| train_class(c, t, x, &columns, params))
        .collect();
    Ok(GbdtModel {
        params: *params,
        n_features: x.n_cols(),
        classes: classes.to_vec(),
        ensembles,
    })
}

impl GbdtModel {
    fn check_dim(&self, x: &DocTermMatrix) -> Result<()> {
        if x.n_cols() != self.n_features {
            return Err(Error::InvalidArgument(format!(
                "feature matrix has {} columns, model expects {}",
                x.n_cols(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Class probabilities per document, in [`GbdtModel::classes`] order.
    pub fn predict_scores(&self, x: &DocTermMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        let lr = self.params.learning_rate;
        Ok(x.rows()
            .iter()
            .map(|row| {
                self.ensembles
                    .iter()
                    .map(|e| sigmoid(e.raw_score(row, lr)))
                    .collect()
            })
            .collect())
    }

    /// Classes with probability `>= threshold`, falling back to the argmax so
    /// that every document gets at least one label.
    pub fn predict(&self, x: &DocTermMatrix, threshold: f64) -> Result<Vec<BTreeSet<String>>> {
        Ok(self
            .predict_scores(x)?
            .iter()
            .map(|probs| decide(&self.classes, probs, threshold))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::Validation(format!("invalid model JSON: {e}")))
    }
}

/// Multi-label decision rule shared by all classifiers.
pub fn decide(classes: &[String], probs: &[f64], threshold: f64) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = classes
        .iter()
        .zip(probs)
        .filter(|&(_, &p)| p >= threshold)
        .map(|(c, _)| c.clone())
        .collect();
    if out.is_empty() {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        out.insert(classes[best].clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use proptest::prelude::*;

    fn labels(ls: &[&str]) -> BTreeSet<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    fn stump_data() -> (DocTermMatrix, Vec<BTreeSet<String>>) {
        // x in 1..=10, positives above 5
        let xs: Vec<Vec<f64>> = (1..=10).map(|i| vec![i as f64]).collect();
        let y = (1..=10)
            .map(|i| {
                if i > 5 {
                    labels(&["pos"])
                } else {
                    labels(&["neg"])
                }
            })
            .collect();
        (DocTermMatrix::from_dense(&Matrix::from_rows(&xs)), y)
    }

    #[test]
    fn separable_stump() {
        let (x, y) = stump_data();
        let params = GbdtParams {
            n_trees: 10,
            max_depth: 1,
            ..GbdtParams::default()
        };
        let classes = vec!["neg".to_string(), "pos".to_string()];
        let model = train_gbdt(&x, &y, &classes, &params).unwrap();
        let first = &model.ensembles[1].trees[0];
        assert_eq!(first.depth(), 1);
        match first.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 5.5);
            }
            _ => panic!("expected a split"),
        }
        // first round: p = 0.5, residuals ±0.5, hessian 0.25 → leaves ±2
        assert_eq!(first.nodes[1], Node::Leaf { value: -2.0 });
        assert_eq!(first.nodes[2], Node::Leaf { value: 2.0 });
        let scores = model.predict_scores(&x).unwrap();
        for (i, s) in scores.iter().enumerate() {
            assert_eq!(s[1] > 0.5, i >= 5);
        }
        assert_eq!(model.predict(&x, 0.5).unwrap(), y);
    }

    #[test]
    fn empty_ensemble_predicts_prior() {
        let (x, _) = stump_data();
        let y: Vec<_> = (0..10)
            .map(|i| {
                if i < 3 {
                    labels(&["a"])
                } else {
                    labels(&["b"])
                }
            })
            .collect();
        let params = GbdtParams {
            n_trees: 0,
            ..GbdtParams::default()
        };
        let classes = vec!["a".to_string(), "b".to_string()];
        let model = train_gbdt(&x, &y, &classes, &params).unwrap();
        for s in model.predict_scores(&x).unwrap() {
            assert!((s[0] - 0.3).abs() < 1e-12);
            assert!((s[1] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn all_positive_class_is_clamped() {
        let (x, _) = stump_data();
        let y = vec![labels(&["a"]); 10];
        let model = train_gbdt(&x, &y, &["a".to_string()], &GbdtParams::default()).unwrap();
        let e = &model.ensembles[0];
        assert!((e.f0 - (0.999_999f64 / 1e-6).ln()).abs() < 1e-9);
        for s in model.predict_scores(&x).unwrap() {
            assert!(s[0] > 0.999_99);
        }
    }

    #[test]
    fn errors() {
        let (x, y) = stump_data();
        let classes = vec!["neg".to_string(), "zzz".to_string()];
        assert!(matches!(
            train_gbdt(&x, &y, &classes, &GbdtParams::default()),
            Err(Error::Validation(_))
        ));
        let empty = DocTermMatrix::from_rows(vec![], 3, false);
        assert!(train_gbdt(&empty, &[], &["a".to_string()], &GbdtParams::default()).is_err());
        let model = train_gbdt(&x, &y, &["neg".to_string()], &GbdtParams::default()).unwrap();
        let wide = DocTermMatrix::from_rows(vec![SparseVector::default()], 2, false);
        assert!(model.predict_scores(&wide).is_err());
    }

    #[test]
    fn negative_values_split_around_implicit_zeros() {
        let xs: Vec<Vec<f64>> = [-3.0, -2.0, -1.0, 0.0, 0.0, 0.0]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let x = DocTermMatrix::from_dense(&Matrix::from_rows(&xs));
        let y: Vec<_> = (0..6)
            .map(|i| {
                if i < 3 {
                    labels(&["lo"])
                } else {
                    labels(&["hi"])
                }
            })
            .collect();
        let params = GbdtParams {
            n_trees: 20,
            max_depth: 1,
            ..GbdtParams::default()
        };
        let classes = vec!["hi".to_string(), "lo".to_string()];
        let model = train_gbdt(&x, &y, &classes, &params).unwrap();
        assert_eq!(model.predict(&x, 0.5).unwrap(), y);
    }

    #[test]
    fn decision_rule() {
        let classes = vec!["A".to_string(), "B".to_string()];
        assert_eq!(decide(&classes, &[0.9, 0.2], 0.5), labels(&["A"]));
        assert_eq!(decide(&classes, &[0.3, 0.2], 0.5), labels(&["A"]));
        assert_eq!(decide(&classes, &[0.6, 0.7], 0.5), labels(&["A", "B"]));
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (x, y) = stump_data();
        let classes = vec!["neg".to_string(), "pos".to_string()];
        let model = train_gbdt(
            &x,
            &y,
            &classes,
            &GbdtParams {
                n_trees: 5,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        let back = GbdtModel::from_json(&model.to_json()).unwrap();
        assert_eq!(
            back.predict_scores(&x).unwrap(),
            model.predict_scores(&x).unwrap()
        );
    }

    fn random_problem(
        seed: u64,
        rows: usize,
        cols: usize,
    ) -> (DocTermMatrix, Vec<BTreeSet<String>>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(rows, cols);
        let mut y = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if rng.random_bool(0.4) {
                    m[(i, j)] = rng.random_range(0.0..1.0);
                }
            }
            let mut ls = BTreeSet::new();
            for c in ["a", "b", "c"] {
                if rng.random_bool(0.4) {
                    ls.insert(c.to_string());
                }
            }
            if ls.is_empty() {
                ls.insert("a".to_string());
            }
            y.push(ls);
        }
        // make sure every class has a positive
        for (i, c) in ["a", "b", "c"].iter().enumerate() {
            y[i].insert(c.to_string());
        }
        (DocTermMatrix::from_dense(&m), y)
    }

    fn abc() -> Vec<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn training_loss_never_increases(seed in 0u64..1000, lr in 0.01f64..0.3) {
            let (x, y) = random_problem(seed, 40, 6);
            let params = GbdtParams { n_trees: 30, learning_rate: lr, ..GbdtParams::default() };
            let model = train_gbdt(&x, &y, &abc(), &params).unwrap();
            for e in &model.ensembles {
                prop_assert!(e.trees.iter().all(|t| t.depth() <= params.max_depth));
                for w in e.train_loss.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
                }
            }
        }

        #[test]
        fn monotone_feature_transform_keeps_predictions(seed in 0u64..1000) {
            let (x, y) = random_problem(seed, 30, 4);
            let warped_rows = x.rows().iter().map(|r| SparseVector {
                indices: r.indices.clone(),
                values: r.values.iter().map(|v| v * v * v + 2.0 * v).collect(),
            }).collect();
            let warped = DocTermMatrix::from_rows(warped_rows, x.n_cols(), false);
            let params = GbdtParams { n_trees: 10, ..GbdtParams::default() };
            let a = train_gbdt(&x, &y, &abc(), &params).unwrap();
            let b = train_gbdt(&warped, &y, &abc(), &params).unwrap();
            prop_assert_eq!(a.predict_scores(&x).unwrap(), b.predict_scores(&warped).unwrap());
        }

        #[test]
        fn ensembles_are_independent(seed in 0u64..1000) {
            let (x, y) = random_problem(seed, 30, 5);
            let params = GbdtParams { n_trees: 8, ..GbdtParams::default() };
            let full = train_gbdt(&x, &y, &abc(), &params).unwrap();
            let without_b = train_gbdt(&x, &y, &["a".to_string(), "c".to_string()], &params).unwrap();
            let fs = full.predict_scores(&x).unwrap();
            let ws = without_b.predict_scores(&x).unwrap();
            for (f, w) in fs.iter().zip(&ws) {
                prop_assert_eq!(f[0], w[0]);
                prop_assert_eq!(f[2], w[1]);
            }
            prop_assert_eq!(train_gbdt(&x, &y, &abc(), &params).unwrap(), full);
        }
    }
}
