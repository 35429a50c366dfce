use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::GbdtParams;
use crate::corpus::CorpusFormat;
use crate::error::{Error, Result};
use crate::eval::{CvConfig, FeatureKind, Method, DEFAULT_FOLDS};

/// Unit that unsupervised abstraction clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// One mean word vector per document.
    Word,
    /// One vector per sentence; documents vote with their sentences.
    #[default]
    Sentence,
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(EmbeddingKind::Word),
            "sentence" => Ok(EmbeddingKind::Sentence),
            other => Err(Error::Config(format!("unknown embedding kind {other:?}"))),
        }
    }
}

fn default_min_df() -> usize {
    2
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_true() -> bool {
    true
}

/// One experiment: a label-abstraction method at a target class count,
/// followed by cross-validated classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub hierarchy: PathBuf,
    #[serde(default)]
    pub format: CorpusFormat,
    /// Name used in reports; defaults to the corpus file stem.
    #[serde(default)]
    pub corpus_id: Option<String>,
    #[serde(default)]
    pub stopwords_en: Option<PathBuf>,
    #[serde(default)]
    pub stopwords_de: Option<PathBuf>,
    pub method: Method,
    #[serde(rename = "K", alias = "k")]
    pub k: usize,
    /// LSI topics for supervised abstraction and LSI classifier features.
    #[serde(default)]
    pub lsi_topics: Option<usize>,
    #[serde(default)]
    pub embedding_kind: EmbeddingKind,
    #[serde(default)]
    pub embedding_file: Option<PathBuf>,
    #[serde(default)]
    pub features: FeatureKind,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub classifier: GbdtParams,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output directory. Not part of the config hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// A config with every optional field at its default.
    pub fn new(
        corpus: impl Into<PathBuf>,
        hierarchy: impl Into<PathBuf>,
        method: Method,
        k: usize,
    ) -> Self {
        Self {
            corpus: corpus.into(),
            hierarchy: hierarchy.into(),
            format: CorpusFormat::default(),
            corpus_id: None,
            stopwords_en: None,
            stopwords_de: None,
            method,
            k,
            lsi_topics: None,
            embedding_kind: EmbeddingKind::default(),
            embedding_file: None,
            features: FeatureKind::default(),
            min_df: default_min_df(),
            normalize: true,
            classifier: GbdtParams::default(),
            folds: default_folds(),
            seed: 0,
            out: None,
        }
    }

    /// Parses a TOML file, or JSON when the extension is `.json`. Relative
    /// paths are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.hierarchy);
        for p in [
            &mut self.stopwords_en,
            &mut self.stopwords_de,
            &mut self.embedding_file,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks field combinations that do not depend on the corpus.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.lsi_topics == Some(0) {
            return Err(Error::Config("lsi_topics must be at least 1".into()));
        }
        if self.min_df == 0 {
            return Err(Error::Config("min_df must be at least 1".into()));
        }
        match (self.method, &self.embedding_file) {
            (Method::UnsupervisedCa, None) => {
                return Err(Error::Config(
                    "unsupervised-ca requires embedding_file".into(),
                ))
            }
            (Method::Expert | Method::SupervisedCa, Some(_)) => {
                return Err(Error::Config(format!(
                    "embedding_file is only used by unsupervised-ca, not {}",
                    self.method
                )))
            }
            _ => {}
        }
        self.classifier
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// The full config with defaults filled in, as echoed into reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical (sorted-key) JSON echo.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.echo()).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn corpus_name(&self) -> String {
        self.corpus_id.clone().unwrap_or_else(|| {
            self.corpus
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".into())
        })
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            features: self.features,
            lsi_topics: self.lsi_topics,
            min_df: self.min_df,
            normalize: self.normalize,
            gbdt: self.classifier,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_defaults() {
        let cfg = RunConfig::from_toml(
            r#"
            corpus = "c.jsonl"
            hierarchy = "h.json"
            method = "supervised-ca"
            K = 3
            [classifier]
            n_trees = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.folds, 8);
        assert_eq!(cfg.min_df, 2);
        assert_eq!(cfg.classifier.n_trees, 10);
        assert_eq!(cfg.classifier.max_depth, GbdtParams::default().max_depth);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml(
            "corpus = 'c'\nhierarchy = 'h'\nmethod = 'expert'\nK = 4\nfoldz = 3\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("foldz"), "{err}");
        assert!(RunConfig::from_json(
            r#"{"corpus":"c","hierarchy":"h","method":"expert","K":4,"classifier":{"trees":3}}"#
        )
        .is_err());
    }

    #[test]
    fn embedding_file_iff_unsupervised() {
        let mut cfg = RunConfig::new("c", "h", Method::UnsupervisedCa, 3);
        assert!(cfg.validate().is_err());
        cfg.embedding_file = Some("e".into());
        cfg.validate().unwrap();
        cfg.method = Method::Expert;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = RunConfig::new("c", "h", Method::Expert, 4);
        let h = a.hash();
        a.out = Some("/tmp/x".into());
        assert_eq!(a.hash(), h);
        assert!(a.echo().get("out").is_none());
        a.seed = 9;
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn relative_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(
            &p,
            "corpus='c.jsonl'\nhierarchy='/abs/h.json'\nmethod='expert'\nK=4\nout='o'\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.corpus, dir.path().join("c.jsonl"));
        assert_eq!(cfg.hierarchy, PathBuf::from("/abs/h.json"));
        assert_eq!(cfg.out, Some(dir.path().join("o")));
        assert_eq!(cfg.corpus_name(), "c");
    }
}
