//! Multi-label metrics: exact match, micro/macro F1, normalized entropy,
//! and the adjusted Rand index used to compare partitions.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_aligned(gold: &[BTreeSet<String>], pred: &[BTreeSet<String>]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold label sets vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    Ok(())
}

/// Fraction of samples whose predicted set equals the gold set.
pub fn exact_match(gold: &[BTreeSet<String>], pred: &[BTreeSet<String>]) -> Result<f64> {
    check_aligned(gold, pred)?;
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_: f64,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Micro F1 pools TP/FP/FN over all labels; macro F1 is the unweighted mean
/// of per-class F1 over `label_space`. Classes without any TP, FP or FN
/// contribute 0 to the macro average.
pub fn f1_scores(
    gold: &[BTreeSet<String>],
    pred: &[BTreeSet<String>],
    label_space: &[String],
) -> Result<F1Scores> {
    check_aligned(gold, pred)?;
    if label_space.is_empty() {
        return Err(Error::InvalidArgument("empty label space".into()));
    }
    let index: HashMap<&str, usize> = label_space
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut per_class = vec![(0usize, 0usize, 0usize); label_space.len()];
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        for l in g.union(p) {
            let (in_g, in_p) = (g.contains(l), p.contains(l));
            let slot = index.get(l.as_str()).map(|&i| &mut per_class[i]);
            match (in_g, in_p, slot) {
                (true, true, slot) => {
                    tp += 1;
                    if let Some(s) = slot {
                        s.0 += 1;
                    }
                }
                (false, true, slot) => {
                    fp += 1;
                    if let Some(s) = slot {
                        s.1 += 1;
                    }
                }
                (true, false, slot) => {
                    fn_ += 1;
                    if let Some(s) = slot {
                        s.2 += 1;
                    }
                }
                (false, false, _) => unreachable!(),
            }
        }
    }
    let macro_ =
        per_class.iter().map(|&(a, b, c)| f1(a, b, c)).sum::<f64>() / label_space.len() as f64;
    Ok(F1Scores {
        micro: f1(tp, fp, fn_),
        macro_,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedEntropy {
    pub value: f64,
    /// Set when there is a single class, which carries no balance information.
    pub degenerate: bool,
}

/// Shannon entropy of the class distribution divided by `ln K`, where `K`
/// counts every class including empty ones. 1 means perfectly balanced.
pub fn normalized_entropy(counts: &[usize]) -> Result<NormalizedEntropy> {
    let total: usize = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return Err(Error::InvalidArgument(
            "normalized entropy of an empty distribution".into(),
        ));
    }
    if counts.len() == 1 {
        return Ok(NormalizedEntropy {
            value: 0.0,
            degenerate: true,
        });
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(NormalizedEntropy {
        value: (h / (counts.len() as f64).ln()).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Adjusted Rand index between two flat partitions of the same items.
pub fn adjusted_rand_index<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "partitions of different sizes");
    let pairs = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
    let mut table: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| pairs(n)).sum();
    let row_sum: f64 = rows.values().map(|&n| pairs(n)).sum();
    let col_sum: f64 = cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(a.len());
    if total == 0.0 {
        return 1.0;
    }
    let expected = row_sum * col_sum / total;
    let max = 0.5 * (row_sum + col_sum);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(raw: &[&[&str]]) -> Vec<BTreeSet<String>> {
        raw.iter()
            .map(|s| s.iter().map(|l| l.to_string()).collect())
            .collect()
    }

    fn space(ls: &[&str]) -> Vec<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_match_counts() {
        let gold = sets(&[&["A"], &["B"], &["A", "B"], &["C"]]);
        let pred = sets(&[&["A"], &["B"], &["A", "B"], &["A"]]);
        assert_eq!(exact_match(&gold, &pred).unwrap(), 0.75);
        assert_eq!(
            exact_match(&sets(&[&["A", "B"]]), &sets(&[&["A"]])).unwrap(),
            0.0
        );
        assert_eq!(exact_match(&gold, &gold).unwrap(), 1.0);
        assert!(exact_match(&gold, &pred[..2]).is_err());
    }

    #[test]
    fn f1_hand_counted() {
        let gold = sets(&[&["A"], &["A", "B"], &["B"]]);
        let pred = sets(&[&["A"], &["A"], &["A", "B"]]);
        let s = f1_scores(&gold, &pred, &space(&["A", "B"])).unwrap();
        assert!((s.micro - 0.75).abs() < 1e-15);
        assert!((s.macro_ - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-15);

        let p = f1_scores(&gold, &gold, &space(&["A", "B"])).unwrap();
        assert_eq!((p.micro, p.macro_), (1.0, 1.0));

        let disjoint = sets(&[&["B"], &["C"], &["A"]]);
        let d = f1_scores(&gold, &disjoint, &space(&["A", "B", "C"])).unwrap();
        assert_eq!((d.micro, d.macro_), (0.0, 0.0));
    }

    #[test]
    fn zero_support_class_counts_as_zero() {
        let gold = sets(&[&["A"]]);
        let s = f1_scores(&gold, &gold, &space(&["A", "Z"])).unwrap();
        assert_eq!(s.micro, 1.0);
        assert_eq!(s.macro_, 0.5);
    }

    #[test]
    fn entropy_values() {
        assert!((normalized_entropy(&[25, 25, 25, 25]).unwrap().value - 1.0).abs() < 1e-15);
        assert!((normalized_entropy(&[50, 50]).unwrap().value - 1.0).abs() < 1e-15);
        // direct evaluation of -Σ p ln p / ln 4 for [97, 1, 1, 1]
        let v = normalized_entropy(&[97, 1, 1, 1]).unwrap().value;
        assert!((v - 0.120_970_366_426_605_46).abs() < 1e-12, "{v}");
        assert_eq!(normalized_entropy(&[10, 0]).unwrap().value, 0.0);
        let single = normalized_entropy(&[7]).unwrap();
        assert!(single.degenerate && single.value == 0.0);
        assert!(normalized_entropy(&[0, 0]).is_err());
        assert!(normalized_entropy(&[]).is_err());
    }

    #[test]
    fn entropy_is_scale_and_permutation_invariant() {
        let a = normalized_entropy(&[3, 9, 1, 0, 4]).unwrap().value;
        let b = normalized_entropy(&[27, 9, 81, 36, 0]).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ari_cases() {
        assert_eq!(
            adjusted_rand_index(&[0, 0, 1, 1], &["x", "x", "y", "y"]),
            1.0
        );
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        let v = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        assert!(v < 0.0);
        // a value checked by hand from the contingency table [[2,1],[0,2]]
        let v = adjusted_rand_index(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 1]);
        assert!((v - 1.0 / 6.0).abs() < 1e-12, "{v}");
    }
}
