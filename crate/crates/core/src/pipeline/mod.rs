//! End-to-end experiments: label abstraction by one of three methods,
//! cross-validated classification, and report artifacts.

mod config;
mod stats;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use log::info;
use serde::Serialize;

use crate::class_cluster::{
    class_centroids, cut_tree, pairwise_distances, relabel_corpus, wpgma_cluster, LabelMapping,
    MergeTree,
};
use crate::corpus::{load_corpus, Corpus, LabelLevel, Lang, StopwordList, Stopwords};
use crate::error::{Error, Result};
use crate::eval::{
    cross_validate, make_folds, results_table, CvOutcome, Method, MetricsReport, ReportContext,
    ResultsTable,
};
use crate::lsi::{default_topics, fit_lsi};
use crate::unsup_cluster::{kmeans_fit, label_documents, KMeansModel};
use crate::vectorize::{
    load_sentence_embeddings, load_word_embeddings, mean_word_embedding, tfidf, tokenize_corpus,
    EmbeddingTable, SentenceEmbeddingSet, Vocabulary,
};

pub use config::{EmbeddingKind, RunConfig};
pub use stats::{corpus_stats, stats_markdown, StatsRow};

/// Pre-trained vectors for unsupervised abstraction.
#[derive(Debug, Clone)]
pub enum EmbeddingSource {
    Word(EmbeddingTable),
    Sentence(SentenceEmbeddingSet),
}

/// Everything a run reads from disk, loaded up front.
#[derive(Debug, Clone)]
pub struct Inputs {
    /// Belief-level corpus. Segmented when sentence embeddings are used.
    pub corpus: Corpus,
    pub stopwords: Stopwords,
    pub embeddings: Option<EmbeddingSource>,
}

/// By-products of label abstraction, written next to the reports.
#[derive(Debug, Clone)]
pub enum Artifacts {
    Expert {
        level: LabelLevel,
    },
    Supervised {
        lsi_topics: usize,
        tree: MergeTree,
        mapping: LabelMapping,
    },
    Unsupervised {
        model: KMeansModel,
        /// Cluster of each unit, grouped by document.
        doc_units: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone)]
pub struct Abstraction {
    pub corpus: Corpus,
    pub artifacts: Artifacts,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub abstraction: Abstraction,
    pub cv: CvOutcome,
}

fn load_stopwords(cfg: &RunConfig) -> Result<Stopwords> {
    let mut sw = Stopwords::builtin();
    if let Some(p) = &cfg.stopwords_en {
        sw = sw.with_list(StopwordList::from_file(Lang::En, p)?);
    }
    if let Some(p) = &cfg.stopwords_de {
        sw = sw.with_list(StopwordList::from_file(Lang::De, p)?);
    }
    Ok(sw)
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let stopwords = load_stopwords(cfg)?;
        let mut corpus = load_corpus(&cfg.corpus, cfg.format, &cfg.hierarchy)?;
        let embeddings = match (&cfg.embedding_file, cfg.method) {
            (Some(path), Method::UnsupervisedCa) => Some(match cfg.embedding_kind {
                EmbeddingKind::Word => EmbeddingSource::Word(load_word_embeddings(path)?),
                EmbeddingKind::Sentence => {
                    corpus = corpus.segmented();
                    EmbeddingSource::Sentence(load_sentence_embeddings(path, &corpus)?)
                }
            }),
            _ => None,
        };
        Ok(Self {
            corpus,
            stopwords,
            embeddings,
        })
    }
}

/// The expert level whose label-space size equals `k`, finest first.
pub fn expert_level(corpus: &Corpus, k: usize) -> Result<LabelLevel> {
    let h = corpus.hierarchy();
    let sizes = [
        (LabelLevel::Belief, h.beliefs().len()),
        (LabelLevel::Theme, h.themes().len()),
        (LabelLevel::Main, h.mains().len()),
    ];
    sizes
        .iter()
        .find(|&&(_, n)| n == k)
        .map(|&(l, _)| l)
        .ok_or_else(|| {
            Error::Config(format!(
                "no expert level has K = {k} classes (belief {}, theme {}, main {})",
                sizes[0].1, sizes[1].1, sizes[2].1
            ))
        })
}

fn supervised(corpus: &Corpus, cfg: &RunConfig, stopwords: &Stopwords) -> Result<Abstraction> {
    let fine = corpus.label_space().len();
    if cfg.k > fine {
        return Err(Error::Config(format!(
            "K = {} exceeds the {fine} fine classes",
            cfg.k
        )));
    }
    let tokens = tokenize_corpus(corpus, stopwords);
    let vocab = Vocabulary::build(&tokens, cfg.min_df)?;
    let x = tfidf(&tokens, &vocab, cfg.normalize);
    let topics = cfg
        .lsi_topics
        .unwrap_or_else(|| default_topics(x.n_rows(), x.n_cols()));
    let lsi = fit_lsi(&x, topics).map_err(|e| e.in_stage("lsi"))?;
    let reps = class_centroids(corpus, &lsi.doc_vectors())?;
    let tree = wpgma_cluster(&pairwise_distances(&reps)?);
    let mapping = cut_tree(&tree, cfg.k)?;
    Ok(Abstraction {
        corpus: relabel_corpus(corpus, &mapping)?,
        artifacts: Artifacts::Supervised {
            lsi_topics: lsi.k,
            tree,
            mapping,
        },
    })
}

fn unsupervised(
    corpus: &Corpus,
    cfg: &RunConfig,
    stopwords: &Stopwords,
    embeddings: Option<&EmbeddingSource>,
) -> Result<Abstraction> {
    let source =
        embeddings.ok_or_else(|| Error::Config("unsupervised-ca requires embeddings".into()))?;
    // (document, vector) for every unit in document order
    let mut owners = Vec::new();
    let mut points = Vec::new();
    match source {
        EmbeddingSource::Word(table) => {
            for (i, doc) in corpus.documents().iter().enumerate() {
                let m = mean_word_embedding(doc, table, stopwords.for_lang(doc.lang));
                if m.coverage > 0.0 {
                    owners.push(i);
                    points.push(m.vector);
                }
            }
        }
        EmbeddingSource::Sentence(set) => {
            for (i, doc) in corpus.documents().iter().enumerate() {
                for s in 0..doc.sentences.len() {
                    let v = set.get(&doc.id, s).ok_or_else(|| {
                        Error::Validation(format!("no embedding for sentence ({}, {s})", doc.id))
                    })?;
                    owners.push(i);
                    points.push(v.to_vec());
                }
            }
        }
    }
    let model = kmeans_fit(&points, cfg.k, cfg.seed).map_err(|e| e.in_stage("kmeans"))?;
    let mut doc_units = vec![Vec::new(); corpus.len()];
    for (&doc, &c) in owners.iter().zip(&model.labels) {
        doc_units[doc].push(c);
    }
    Ok(Abstraction {
        corpus: label_documents(corpus, &doc_units, cfg.k)?,
        artifacts: Artifacts::Unsupervised { model, doc_units },
    })
}

/// Replaces the corpus' labels with `cfg.k` abstract or expert classes.
pub fn abstract_labels(cfg: &RunConfig, inputs: &Inputs) -> Result<Abstraction> {
    let corpus = &inputs.corpus;
    match cfg.method {
        Method::Expert => {
            let level = expert_level(corpus, cfg.k)?;
            Ok(Abstraction {
                corpus: corpus.project_labels(level)?,
                artifacts: Artifacts::Expert { level },
            })
        }
        Method::SupervisedCa => supervised(corpus, cfg, &inputs.stopwords),
        Method::UnsupervisedCa => {
            unsupervised(corpus, cfg, &inputs.stopwords, inputs.embeddings.as_ref())
        }
    }
}

/// Abstraction on the full corpus, then cross-validated classification of
/// the abstract labels.
pub fn execute(cfg: &RunConfig, inputs: &Inputs) -> Result<RunOutput> {
    cfg.validate()?;
    let abstraction = abstract_labels(cfg, inputs).map_err(|e| e.in_stage("abstraction"))?;
    info!(
        "{}: {} documents relabeled into {} classes",
        cfg.method,
        abstraction.corpus.len(),
        abstraction.corpus.label_space().len()
    );
    let plan =
        make_folds(&abstraction.corpus, cfg.folds, cfg.seed).map_err(|e| e.in_stage("folds"))?;
    let ctx = ReportContext {
        corpus: cfg.corpus_name(),
        method: cfg.method,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg.echo(),
    };
    let cv = cross_validate(
        &abstraction.corpus,
        &inputs.stopwords,
        &cfg.cv_config(),
        &plan,
        &ctx,
    )
    .map_err(|e| e.in_stage("cross-validation"))?;
    Ok(RunOutput { abstraction, cv })
}

/// Loads inputs, executes, and writes artifacts when `cfg.out` is set.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg).map_err(|e| e.in_stage("load"))?;
    let output = execute(cfg, &inputs)?;
    if let Some(dir) = &cfg.out {
        output.write(dir).map_err(|e| e.in_stage("write"))?;
    }
    Ok(output)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Assignment<'a> {
    doc_id: &'a str,
    labels: &'a BTreeSet<String>,
    units: &'a [usize],
}

impl RunOutput {
    /// Writes reports, the comparison table and abstraction artifacts.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(
            &dir.join("report_mean.json"),
            &(self.cv.mean.to_json() + "\n"),
        )?;
        for r in &self.cv.folds {
            if let crate::eval::FoldTag::Index(i) = r.fold {
                write_file(
                    &dir.join(format!("report_fold_{i}.json")),
                    &(r.to_json() + "\n"),
                )?;
            }
        }
        write_file(
            &dir.join("table.md"),
            &results_table(std::slice::from_ref(&self.cv.mean)).to_markdown(),
        )?;
        match &self.abstraction.artifacts {
            Artifacts::Expert { .. } => {}
            Artifacts::Supervised { tree, mapping, .. } => {
                write_file(&dir.join("mergetree.json"), &(tree.to_json() + "\n"))?;
                write_file(&dir.join("mapping.json"), &(mapping.to_json() + "\n"))?;
            }
            Artifacts::Unsupervised { doc_units, .. } => {
                let path = dir.join("assignments.jsonl");
                let mut w = std::io::BufWriter::new(
                    std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?,
                );
                for (doc, units) in self.abstraction.corpus.documents().iter().zip(doc_units) {
                    let line = serde_json::to_string(&Assignment {
                        doc_id: &doc.id,
                        labels: &doc.labels,
                        units,
                    })
                    .expect("assignment serializes");
                    writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(())
    }
}

/// Reads `report_mean.json` from a run directory.
pub fn load_mean_report(dir: &Path) -> Result<MetricsReport> {
    let path = dir.join("report_mean.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    MetricsReport::from_json(&text).map_err(|e| match e {
        Error::Validation(m) => Error::parse(&path, 0, m),
        other => other,
    })
}

/// Combines mean reports of several runs, which must share one corpus id.
pub fn compare(reports: &[MetricsReport]) -> Result<ResultsTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports to compare".into()))?;
    if let Some(other) = reports.iter().find(|r| r.corpus != first.corpus) {
        return Err(Error::Validation(format!(
            "conflicting corpus ids {:?} and {:?}",
            first.corpus, other.corpus
        )));
    }
    Ok(results_table(reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::GbdtParams;
    use crate::corpus::{generate_synthetic_corpus, SynthSpec};

    fn inputs(spec: &SynthSpec) -> Inputs {
        Inputs {
            corpus: generate_synthetic_corpus(spec).unwrap(),
            stopwords: Stopwords::builtin(),
            embeddings: None,
        }
    }

    fn spec() -> SynthSpec {
        SynthSpec {
            fine_classes: 6,
            groups: 2,
            docs_per_class: 16,
            ..SynthSpec::default()
        }
    }

    fn cfg(method: Method, k: usize) -> RunConfig {
        let mut c = RunConfig::new("synth.jsonl", "h.json", method, k);
        c.classifier = GbdtParams {
            n_trees: 15,
            ..GbdtParams::default()
        };
        c.folds = 4;
        c
    }

    #[test]
    fn expert_level_lookup() {
        let c = generate_synthetic_corpus(&spec()).unwrap();
        assert_eq!(expert_level(&c, 6).unwrap(), LabelLevel::Belief);
        assert_eq!(expert_level(&c, 2).unwrap(), LabelLevel::Theme);
        assert!(matches!(expert_level(&c, 5), Err(Error::Config(_))));
    }

    #[test]
    fn supervised_identity_cut_matches_expert_beliefs() {
        let inp = inputs(&spec());
        let sup = execute(&cfg(Method::SupervisedCa, 6), &inp).unwrap();
        let exp = execute(&cfg(Method::Expert, 6), &inp).unwrap();
        let s = &sup.cv.mean;
        let e = &exp.cv.mean;
        assert_eq!(
            (s.em, s.f1_macro, s.f1_micro, s.ne),
            (e.em, e.f1_macro, e.f1_micro, e.ne)
        );
    }

    #[test]
    fn supervised_recovers_groups() {
        let inp = inputs(&spec());
        let out = abstract_labels(&cfg(Method::SupervisedCa, 2), &inp).unwrap();
        let Artifacts::Supervised { mapping, .. } = &out.artifacts else {
            panic!("wrong artifacts")
        };
        let s = spec();
        for c in 0..6 {
            for d in 0..6 {
                let same =
                    mapping.get(&SynthSpec::belief_id(c)) == mapping.get(&SynthSpec::belief_id(d));
                assert_eq!(same, s.group_of(c) == s.group_of(d));
            }
        }
    }

    #[test]
    fn stage_errors_are_named() {
        let inp = inputs(&spec());
        let err = execute(&cfg(Method::SupervisedCa, 7), &inp).unwrap_err();
        assert!(err.to_string().starts_with("abstraction:"), "{err}");
        assert_eq!(err.kind(), crate::ErrorKind::Config);
    }

    #[test]
    fn compare_rejects_mixed_corpora() {
        let inp = inputs(&spec());
        let a = execute(&cfg(Method::Expert, 2), &inp).unwrap().cv.mean;
        let mut b = a.clone();
        b.method = Method::SupervisedCa;
        assert_eq!(compare(&[a.clone(), b.clone()]).unwrap().rows.len(), 1);
        b.corpus = "other".into();
        assert!(compare(&[a, b]).is_err());
    }
}
