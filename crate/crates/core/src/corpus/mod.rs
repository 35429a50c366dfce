//! Multi-label documents, the three-level label hierarchy, and corpus I/O.

mod synth;
mod text;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{generate_synthetic_corpus, SynthSpec};
pub use text::{clean_text, segment_sentences, StopwordList, Stopwords, STRIPPED_CHARS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    De,
}

impl Lang {
    pub fn as_str(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::De => "de",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Lang::En),
            "de" => Ok(Lang::De),
            other => Err(Error::Validation(format!(
                "unsupported language tag {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: Lang,
    pub text: String,
    pub labels: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentences: Vec<String>,
}

impl Document {
    /// Returns a copy with `sentences` filled by [`segment_sentences`],
    /// unless sentences were supplied with the document.
    pub fn segmented(&self) -> Document {
        if !self.sentences.is_empty() {
            return self.clone();
        }
        Document {
            sentences: segment_sentences(&self.text),
            ..self.clone()
        }
    }
}

/// Belief → theme → main theme tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelHierarchy {
    pub belief_to_theme: BTreeMap<String, String>,
    pub theme_to_main: BTreeMap<String, String>,
}

impl LabelHierarchy {
    pub fn new(
        belief_to_theme: BTreeMap<String, String>,
        theme_to_main: BTreeMap<String, String>,
    ) -> Result<Self> {
        let h = Self {
            belief_to_theme,
            theme_to_main,
        };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        if self.belief_to_theme.is_empty() {
            return Err(Error::Validation("hierarchy has no beliefs".into()));
        }
        for (belief, theme) in &self.belief_to_theme {
            if !self.theme_to_main.contains_key(theme) {
                return Err(Error::Validation(format!(
                    "belief {belief:?} maps to theme {theme:?} which has no main theme"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let h: LabelHierarchy = serde_json::from_str(&raw)
            .map_err(|e| Error::parse(path, e.line(), format!("invalid hierarchy JSON: {e}")))?;
        h.validate()?;
        Ok(h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("hierarchy serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn beliefs(&self) -> BTreeSet<&str> {
        self.belief_to_theme.keys().map(String::as_str).collect()
    }

    pub fn themes(&self) -> BTreeSet<&str> {
        self.theme_to_main.keys().map(String::as_str).collect()
    }

    pub fn mains(&self) -> BTreeSet<&str> {
        self.theme_to_main.values().map(String::as_str).collect()
    }

    /// Maps a label at `from` to its ancestor at `to`, when `to` is the same
    /// level or coarser.
    fn lift(&self, label: &str, from: LabelLevel, to: LabelLevel) -> Option<String> {
        use LabelLevel::*;
        match (from, to) {
            (a, b) if a == b => Some(label.to_owned()),
            (Belief, Theme) => self.belief_to_theme.get(label).cloned(),
            (Belief, Main) => self
                .belief_to_theme
                .get(label)
                .and_then(|t| self.theme_to_main.get(t))
                .cloned(),
            (Theme, Main) => self.theme_to_main.get(label).cloned(),
            _ => None,
        }
    }
}

/// Granularity denoted by the documents' label sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelLevel {
    Belief,
    Theme,
    Main,
    /// Abstract classes `"0"..="K-1"` produced by class abstraction.
    Abstract(usize),
}

impl fmt::Display for LabelLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelLevel::Belief => f.write_str("belief"),
            LabelLevel::Theme => f.write_str("theme"),
            LabelLevel::Main => f.write_str("main"),
            LabelLevel::Abstract(k) => write!(f, "abstract-{k}"),
        }
    }
}

/// Label id used for abstract class `index`.
pub fn abstract_label(index: usize) -> String {
    index.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    #[default]
    Jsonl,
    Csv,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    hierarchy: LabelHierarchy,
    active_level: LabelLevel,
}

impl Corpus {
    /// Validates documents against the hierarchy at `active_level`.
    pub fn new(
        documents: Vec<Document>,
        hierarchy: LabelHierarchy,
        active_level: LabelLevel,
    ) -> Result<Self> {
        let corpus = Self {
            documents,
            hierarchy,
            active_level,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<()> {
        let space: HashSet<String> = self.label_space().into_iter().collect();
        let mut seen = HashSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate document id {:?}",
                    doc.id
                )));
            }
            if doc.labels.is_empty() {
                return Err(Error::Validation(format!(
                    "document {:?} has an empty label set",
                    doc.id
                )));
            }
            if let Some(bad) = doc.labels.iter().find(|l| !space.contains(*l)) {
                return Err(Error::Validation(format!(
                    "unknown label {bad:?} in document {:?} (level {})",
                    doc.id, self.active_level
                )));
            }
        }
        Ok(())
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn hierarchy(&self) -> &LabelHierarchy {
        &self.hierarchy
    }

    pub fn active_level(&self) -> LabelLevel {
        self.active_level
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// All valid label ids at the active level, sorted.
    pub fn label_space(&self) -> Vec<String> {
        match self.active_level {
            LabelLevel::Belief => self.hierarchy.belief_to_theme.keys().cloned().collect(),
            LabelLevel::Theme => self.hierarchy.theme_to_main.keys().cloned().collect(),
            LabelLevel::Main => self
                .hierarchy
                .mains()
                .into_iter()
                .map(str::to_owned)
                .collect(),
            LabelLevel::Abstract(k) => {
                let mut ids: Vec<String> = (0..k).map(abstract_label).collect();
                ids.sort();
                ids
            }
        }
    }

    pub fn labels(&self) -> Vec<BTreeSet<String>> {
        self.documents.iter().map(|d| d.labels.clone()).collect()
    }

    /// Number of documents carrying each label of the label space.
    pub fn label_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> =
            self.label_space().into_iter().map(|l| (l, 0)).collect();
        for doc in &self.documents {
            for l in &doc.labels {
                *counts.get_mut(l).expect("validated label") += 1;
            }
        }
        counts
    }

    /// Copy containing only the documents at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
            hierarchy: self.hierarchy.clone(),
            active_level: self.active_level,
        }
    }

    /// Fills every document's sentence list.
    pub fn segmented(&self) -> Corpus {
        Corpus {
            documents: self.documents.iter().map(Document::segmented).collect(),
            ..self.clone()
        }
    }

    /// Replaces all label sets; the result is validated at `level`.
    pub fn with_labels(&self, labels: Vec<BTreeSet<String>>, level: LabelLevel) -> Result<Corpus> {
        assert_eq!(
            labels.len(),
            self.documents.len(),
            "one label set per document"
        );
        let documents = self
            .documents
            .iter()
            .zip(labels)
            .map(|(d, labels)| Document {
                labels,
                ..d.clone()
            })
            .collect();
        Corpus::new(documents, self.hierarchy.clone(), level)
    }

    /// Maps every label set up the hierarchy to `target` and deduplicates.
    pub fn project_labels(&self, target: LabelLevel) -> Result<Corpus> {
        if matches!(target, LabelLevel::Abstract(_))
            || matches!(self.active_level, LabelLevel::Abstract(_))
        {
            return Err(Error::InvalidArgument(format!(
                "cannot project labels from {} to {target}",
                self.active_level
            )));
        }
        let from = self.active_level;
        let labels = self
            .documents
            .iter()
            .map(|d| {
                d.labels
                    .iter()
                    .map(|l| {
                        self.hierarchy.lift(l, from, target).ok_or_else(|| {
                            Error::InvalidArgument(format!(
                                "cannot project labels from {from} to {target}"
                            ))
                        })
                    })
                    .collect::<Result<BTreeSet<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_labels(labels, target)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for doc in &self.documents {
            let rec = DocumentRecord {
                id: doc.id.clone(),
                lang: doc.lang,
                text: doc.text.clone(),
                labels: doc.labels.iter().cloned().collect(),
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    lang: Lang,
    text: String,
    labels: Vec<String>,
}

impl DocumentRecord {
    fn into_document(self) -> Document {
        Document {
            id: self.id,
            lang: self.lang,
            text: self.text,
            labels: self.labels.into_iter().collect(),
            sentences: Vec::new(),
        }
    }
}

/// Loads and validates a corpus at the belief level.
pub fn load_corpus(path: &Path, format: CorpusFormat, hierarchy_path: &Path) -> Result<Corpus> {
    let hierarchy = LabelHierarchy::load(hierarchy_path)?;
    let documents = match format {
        CorpusFormat::Jsonl => read_jsonl(path)?,
        CorpusFormat::Csv => read_csv(path)?,
    };
    if documents.is_empty() {
        return Err(Error::Validation(format!(
            "corpus {} contains no documents",
            path.display()
        )));
    }
    Corpus::new(documents, hierarchy, LabelLevel::Belief)
}

fn read_jsonl(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, i + 1, format!("malformed document: {e}")))?;
        docs.push(rec.into_document());
    }
    Ok(docs)
}

/// CSV with header `id,lang,text,labels`; labels are `;`-joined.
fn read_csv(path: &Path) -> Result<Vec<Document>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut docs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "expected 4 fields (id,lang,text,labels), found {}",
                    rec.len()
                ),
            ));
        }
        let lang = rec[1]
            .parse()
            .map_err(|e: Error| Error::parse(path, line, e.to_string()))?;
        let labels = rec[3]
            .split(';')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect();
        docs.push(Document {
            id: rec[0].to_owned(),
            lang,
            text: rec[2].to_owned(),
            labels,
            sentences: Vec::new(),
        });
    }
    Ok(docs)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn hierarchy() -> LabelHierarchy {
        let b2t = [("b1", "t1"), ("b2", "t1"), ("b3", "t4")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let t2m = [("t1", "m1"), ("t4", "m2")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        LabelHierarchy::new(b2t, t2m).unwrap()
    }

    fn doc(id: &str, labels: &[&str]) -> Document {
        Document {
            id: id.into(),
            lang: Lang::En,
            text: format!("text of {id}"),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            sentences: vec![],
        }
    }

    fn write_fixture(dir: &Path, lines: &[&str]) -> (std::path::PathBuf, std::path::PathBuf) {
        let c = dir.join("corpus.jsonl");
        let h = dir.join("hierarchy.json");
        fs::write(&c, lines.join("\n")).unwrap();
        hierarchy().save(&h).unwrap();
        (c, h)
    }

    #[test]
    fn loads_minimal_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let (c, h) = write_fixture(
            dir.path(),
            &[
                r#"{"id":"d1","lang":"en","text":"Tea is good.","labels":["b1"]}"#,
                r#"{"id":"d2","lang":"de","text":"Tee ist gut.","labels":["b2","b3"]}"#,
            ],
        );
        let corpus = load_corpus(&c, CorpusFormat::Jsonl, &h).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.active_level(), LabelLevel::Belief);
        assert_eq!(corpus.hierarchy().beliefs().len(), 3);
    }

    #[test]
    fn rejects_empty_labels_naming_doc() {
        let dir = tempfile::tempdir().unwrap();
        let (c, h) = write_fixture(
            dir.path(),
            &[r#"{"id":"lonely","lang":"en","text":"x","labels":[]}"#],
        );
        let err = load_corpus(&c, CorpusFormat::Jsonl, &h).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("lonely"), "{err}");
    }

    #[test]
    fn rejects_unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        let (c, h) = write_fixture(
            dir.path(),
            &[r#"{"id":"d1","lang":"en","text":"x","labels":["belief:milk"]}"#],
        );
        let err = load_corpus(&c, CorpusFormat::Jsonl, &h).unwrap_err();
        assert!(err.to_string().contains("unknown label"), "{err}");
    }

    #[test]
    fn rejects_duplicate_ids_and_reports_parse_line() {
        let dir = tempfile::tempdir().unwrap();
        let (c, h) = write_fixture(
            dir.path(),
            &[
                r#"{"id":"d1","lang":"en","text":"x","labels":["b1"]}"#,
                r#"{"id":"d1","lang":"en","text":"y","labels":["b1"]}"#,
            ],
        );
        let err = load_corpus(&c, CorpusFormat::Jsonl, &h).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let (c, h) = write_fixture(
            dir.path(),
            &[
                r#"{"id":"d1","lang":"en","text":"x","labels":["b1"]}"#,
                "{not json",
            ],
        );
        match load_corpus(&c, CorpusFormat::Jsonl, &h).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (c, h) = write_fixture(dir.path(), &[]);
        assert!(load_corpus(&c, CorpusFormat::Jsonl, &h).is_err());
    }

    #[test]
    fn loads_csv() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("c.csv");
        let h = dir.path().join("h.json");
        fs::write(
            &c,
            "id,lang,text,labels\nd1,en,\"Hello, world.\",b1;b3\nd2,de,Hallo,b2\n",
        )
        .unwrap();
        hierarchy().save(&h).unwrap();
        let corpus = load_corpus(&c, CorpusFormat::Csv, &h).unwrap();
        assert_eq!(corpus.documents()[0].labels.len(), 2);
        assert_eq!(corpus.documents()[0].text, "Hello, world.");
        assert_eq!(corpus.documents()[1].lang, Lang::De);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::new(
            vec![doc("a", &["b1", "b2"]), doc("b", &["b3"])],
            hierarchy(),
            LabelLevel::Belief,
        )
        .unwrap();
        let c = dir.path().join("rt.jsonl");
        let h = dir.path().join("rt.json");
        corpus.write_jsonl(&c).unwrap();
        corpus.hierarchy().save(&h).unwrap();
        assert_eq!(load_corpus(&c, CorpusFormat::Jsonl, &h).unwrap(), corpus);
    }

    #[test]
    fn projection_dedups_and_preserves_parents() {
        let corpus = Corpus::new(
            vec![doc("a", &["b1", "b2"]), doc("b", &["b1", "b3"])],
            hierarchy(),
            LabelLevel::Belief,
        )
        .unwrap();
        let themes = corpus.project_labels(LabelLevel::Theme).unwrap();
        assert_eq!(
            themes.documents()[0].labels,
            BTreeSet::from(["t1".to_string()])
        );
        assert_eq!(
            themes.documents()[1].labels,
            BTreeSet::from(["t1".to_string(), "t4".to_string()])
        );
        assert_eq!(themes.active_level(), LabelLevel::Theme);
        // idempotent on the target level
        assert_eq!(themes.project_labels(LabelLevel::Theme).unwrap(), themes);
        let mains = corpus.project_labels(LabelLevel::Main).unwrap();
        assert_eq!(mains, themes.project_labels(LabelLevel::Main).unwrap());
        // commutes with subsetting
        assert_eq!(
            corpus
                .subset(&[1])
                .project_labels(LabelLevel::Theme)
                .unwrap(),
            themes.subset(&[1])
        );
    }

    #[test]
    fn hierarchy_must_be_total() {
        let b2t = BTreeMap::from([("b1".to_string(), "t9".to_string())]);
        assert!(LabelHierarchy::new(b2t, BTreeMap::new()).is_err());
    }
}
