use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 8;

/// Partition of document indices into test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    /// Document indices of each test fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every document index outside `fold`, ascending.
    pub fn train(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Test fold document ids, for reports.
    pub fn test_ids(&self, corpus: &Corpus, fold: usize) -> Vec<String> {
        self.folds[fold]
            .iter()
            .map(|&i| corpus.documents()[i].id.clone())
            .collect()
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Seeded shuffle followed by round-robin assignment to `folds` folds.
pub fn make_folds(corpus: &Corpus, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds == 0 {
        return Err(Error::InvalidArgument(
            "fold count must be at least 1".into(),
        ));
    }
    if folds > corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds requested for {} documents",
            corpus.len()
        )));
    }
    let mut plan = vec![Vec::new(); folds];
    for (pos, doc) in shuffled(corpus.len(), seed).into_iter().enumerate() {
        plan[pos % folds].push(doc);
    }
    for fold in &mut plan {
        fold.sort_unstable();
    }
    Ok(FoldPlan { seed, folds: plan })
}

/// Seeded train/test split with `floor(n * train_fraction)` training
/// documents, adjusted so neither side is empty. Returns index lists.
pub fn holdout_split(
    corpus: &Corpus,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = corpus.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} documents without leaving one side empty"
        )));
    }
    let n_train = ((n as f64 * train_fraction).floor() as usize).clamp(1, n - 1);
    let order = shuffled(n, seed);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
