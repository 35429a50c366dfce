use std::collections::BTreeSet;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::metrics::{exact_match, f1_scores, normalized_entropy};
use super::report::{mean_report, FoldTag, Method, MetricsReport, SkippedFold, PROTOCOL_NOTE};
use crate::classify::{train_gbdt, GbdtParams};
use crate::corpus::{Corpus, Stopwords};
use crate::error::{Error, Result};
use crate::lsi::{default_topics, fit_lsi};
use crate::vectorize::{tfidf, tokenize_corpus, DocTermMatrix, Vocabulary};

/// Classifier input representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[default]
    Tfidf,
    Lsi,
}

/// Everything fitted inside a fold: vectorizer, optional LSI projection, classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub features: FeatureKind,
    /// LSI topics for `FeatureKind::Lsi`; `None` uses [`default_topics`].
    pub lsi_topics: Option<usize>,
    pub min_df: usize,
    pub normalize: bool,
    pub gbdt: GbdtParams,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            features: FeatureKind::Tfidf,
            lsi_topics: None,
            min_df: 2,
            normalize: true,
            gbdt: GbdtParams::default(),
        }
    }
}

/// Metadata copied into every report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportContext {
    pub corpus: String,
    pub method: Method,
    pub config_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub folds: Vec<MetricsReport>,
    pub mean: MetricsReport,
    pub skipped: Vec<SkippedFold>,
}

enum FoldResult {
    Done(MetricsReport),
    Skipped(SkippedFold),
}

fn features(
    cfg: &CvConfig,
    train: &[Vec<String>],
    test: &[Vec<String>],
) -> Result<(DocTermMatrix, DocTermMatrix)> {
    let vocab = Vocabulary::build(train, cfg.min_df)?;
    let x_train = tfidf(train, &vocab, cfg.normalize);
    let x_test = tfidf(test, &vocab, cfg.normalize);
    match cfg.features {
        FeatureKind::Tfidf => Ok((x_train, x_test)),
        FeatureKind::Lsi => {
            let k = cfg
                .lsi_topics
                .unwrap_or_else(|| default_topics(x_train.n_rows(), x_train.n_cols()));
            let lsi = fit_lsi(&x_train, k)?;
            Ok((
                DocTermMatrix::from_dense(&lsi.doc_vectors()),
                DocTermMatrix::from_dense(&lsi.fold_in_matrix(&x_test)?),
            ))
        }
    }
}

/// Per-corpus data shared by all folds.
struct Shared<'a> {
    corpus: &'a Corpus,
    tokens: Vec<Vec<String>>,
    labels: Vec<BTreeSet<String>>,
    space: Vec<String>,
    cfg: &'a CvConfig,
    plan: &'a FoldPlan,
    ctx: &'a ReportContext,
}

fn run_fold(sh: &Shared<'_>, fold: usize) -> Result<FoldResult> {
    let Shared {
        corpus,
        tokens,
        labels,
        space,
        cfg,
        plan,
        ctx,
    } = sh;
    let train_idx = plan.train(fold);
    let test_idx = plan.test(fold);
    let y_train: Vec<BTreeSet<String>> = train_idx.iter().map(|&i| labels[i].clone()).collect();
    let missing: Vec<String> = space
        .iter()
        .filter(|c| !y_train.iter().any(|ls| ls.contains(*c)))
        .cloned()
        .collect();
    if !missing.is_empty() {
        warn!("fold {fold}: classes {missing:?} absent from training split; skipping fold");
        return Ok(FoldResult::Skipped(SkippedFold {
            fold,
            missing_classes: missing,
        }));
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| tokens[i].clone()).collect::<Vec<_>>();
    let (x_train, x_test) = features(cfg, &pick(&train_idx), &pick(test_idx))?;
    let model = train_gbdt(&x_train, &y_train, space, &cfg.gbdt)?;
    let pred = model.predict(&x_test, cfg.gbdt.threshold)?;

    let gold: Vec<BTreeSet<String>> = test_idx.iter().map(|&i| labels[i].clone()).collect();
    let f1 = f1_scores(&gold, &pred, space)?;
    let counts = corpus.subset(test_idx).label_counts();
    let ne = normalized_entropy(&counts.values().copied().collect::<Vec<_>>())?;
    Ok(FoldResult::Done(MetricsReport {
        corpus: ctx.corpus.clone(),
        method: ctx.method,
        k: space.len(),
        fold: FoldTag::Index(fold),
        em: exact_match(&gold, &pred)?,
        f1_macro: f1.macro_,
        f1_micro: f1.micro,
        ne: ne.value,
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        ne_basis: "gold".into(),
        ne_degenerate: ne.degenerate,
        n_test: test_idx.len(),
        protocol: format!("{}-fold: {PROTOCOL_NOTE}", plan.n_folds()),
        skipped_folds: Vec::new(),
        config: ctx.config.clone(),
    }))
}

/// Trains and evaluates the classifier once per fold of `plan`, fitting all
/// learned components on the training folds only. Folds run in parallel;
/// results are collected in fold order.
pub fn cross_validate(
    corpus: &Corpus,
    stopwords: &Stopwords,
    cfg: &CvConfig,
    plan: &FoldPlan,
    ctx: &ReportContext,
) -> Result<CvOutcome> {
    cfg.gbdt.validate()?;
    if plan.folds.iter().flatten().any(|&i| i >= corpus.len()) {
        return Err(Error::InvalidArgument(
            "fold plan does not match corpus".into(),
        ));
    }
    let shared = Shared {
        corpus,
        tokens: tokenize_corpus(corpus, stopwords),
        labels: corpus.labels(),
        space: corpus.label_space(),
        cfg,
        plan,
        ctx,
    };
    let results: Vec<FoldResult> = (0..plan.n_folds())
        .into_par_iter()
        .map(|f| run_fold(&shared, f))
        .collect::<Result<_>>()?;

    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            FoldResult::Done(rep) => folds.push(rep),
            FoldResult::Skipped(s) => skipped.push(s),
        }
    }
    if folds.is_empty() {
        return Err(Error::Validation(format!(
            "every fold was skipped for missing training classes: {skipped:?}"
        )));
    }
    let mut mean = mean_report(&folds)?;
    mean.skipped_folds = skipped.clone();
    info!(
        "{} K={}: em {:.3} f1_macro {:.3} f1_micro {:.3} ne {:.3} over {} folds",
        ctx.method,
        mean.k,
        mean.em,
        mean.f1_macro,
        mean.f1_micro,
        mean.ne,
        folds.len()
    );
    Ok(CvOutcome {
        folds,
        mean,
        skipped,
    })
}
