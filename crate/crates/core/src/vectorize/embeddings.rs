//! fastText-style word vectors and precomputed sentence embeddings.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{clean_text, Corpus, Document, StopwordList, Stopwords, SynthSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    duplicates: Vec<String>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation(
                "embedding dimension must be positive".into(),
            ));
        }
        Ok(Self {
            dim,
            vectors: HashMap::new(),
            duplicates: Vec::new(),
        })
    }

    /// Inserts a vector; a repeated token replaces the earlier vector and is
    /// recorded in [`EmbeddingTable::duplicates`].
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "vector of length {} in a table of dimension {}",
                vector.len(),
                self.dim
            )));
        }
        let token = token.into();
        if self.vectors.insert(token.clone(), vector).is_some() {
            self.duplicates.push(token);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Tokens that appeared more than once while loading (last one won).
    pub fn duplicates(&self) -> &[String] {
        &self.duplicates
    }

    fn sorted_entries(&self) -> Vec<(&String, &Vec<f64>)> {
        let mut entries: Vec<_> = self.vectors.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        entries
    }
}

/// Reads the fastText text format: a `<count> <dim>` header followed by
/// `token v1 .. v_dim` lines.
pub fn load_word_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "missing `<count> <dim>` header")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (parse_usize(c), parse_usize(d)) {
            (Some(c), Some(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(path, 1, format!("invalid header {header:?}"))),
        },
        _ => return Err(Error::parse(path, 1, format!("invalid header {header:?}"))),
    };

    let mut table = EmbeddingTable::new(dim)?;
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let vector = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::parse(path, line_no, format!("invalid float {p:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.len() != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "dimension mismatch: expected {dim} values, found {}",
                    vector.len()
                ),
            ));
        }
        rows += 1;
        let before = table.duplicates.len();
        table.insert(token, vector)?;
        if table.duplicates.len() > before {
            warn!(
                "{}:{line_no}: duplicate token {token:?}, keeping the later vector",
                path.display()
            );
        }
    }
    if rows != count {
        warn!(
            "{}: header announces {count} vectors but {rows} were read",
            path.display()
        );
    }
    Ok(table)
}

pub fn write_word_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", table.len(), table.dim).map_err(io)?;
    for (token, v) in table.sorted_entries() {
        let nums: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        writeln!(w, "{token} {}", nums.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One vector per (document id, sentence index).
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbeddingSet {
    dim: usize,
    vectors: BTreeMap<(String, usize), Vec<f64>>,
}

impl SentenceEmbeddingSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, doc_id: &str, sentence: usize) -> Option<&[f64]> {
        self.vectors
            .get(&(doc_id.to_owned(), sentence))
            .map(Vec::as_slice)
    }

    /// Builds a complete set from an in-memory function, e.g. a synthetic
    /// encoder. The corpus must already be segmented.
    pub fn from_fn(
        corpus: &Corpus,
        dim: usize,
        mut encode: impl FnMut(&Document, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        for doc in corpus.documents() {
            for s in 0..doc.sentences.len() {
                let v = encode(doc, s);
                if v.len() != dim {
                    return Err(Error::Validation(format!(
                        "sentence ({}, {s}) has dimension {}, expected {dim}",
                        doc.id,
                        v.len()
                    )));
                }
                vectors.insert((doc.id.clone(), s), v);
            }
        }
        Ok(Self { dim, vectors })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SentenceRecord {
    doc_id: String,
    sentence_index: usize,
    vector: Vec<f64>,
}

/// Reads `{"doc_id", "sentence_index", "vector"}` JSONL and checks that every
/// sentence of the (already segmented) corpus is covered.
pub fn load_sentence_embeddings(path: &Path, corpus: &Corpus) -> Result<SentenceEmbeddingSet> {
    let sentence_counts: HashMap<&str, usize> = corpus
        .documents()
        .iter()
        .map(|d| (d.id.as_str(), d.sentences.len()))
        .collect();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dim: Option<usize> = None;
    let mut vectors = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, format!("malformed record: {e}")))?;
        let Some(&n_sent) = sentence_counts.get(rec.doc_id.as_str()) else {
            return Err(Error::parse(
                path,
                line_no,
                format!("unknown doc id {:?}", rec.doc_id),
            ));
        };
        if rec.sentence_index >= n_sent {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "document {:?} has {n_sent} sentences, index {} out of range",
                    rec.doc_id, rec.sentence_index
                ),
            ));
        }
        let d = *dim.get_or_insert(rec.vector.len());
        if d == 0 || rec.vector.len() != d {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "dimension mismatch: expected {d}, found {}",
                    rec.vector.len()
                ),
            ));
        }
        if vectors
            .insert((rec.doc_id.clone(), rec.sentence_index), rec.vector)
            .is_some()
        {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate pair ({}, {})", rec.doc_id, rec.sentence_index),
            ));
        }
    }
    for doc in corpus.documents() {
        for s in 0..doc.sentences.len() {
            if !vectors.contains_key(&(doc.id.clone(), s)) {
                return Err(Error::Validation(format!(
                    "missing sentence embedding for ({}, {s})",
                    doc.id
                )));
            }
        }
    }
    Ok(SentenceEmbeddingSet {
        dim: dim.unwrap_or(0),
        vectors,
    })
}

pub fn write_sentence_embeddings(set: &SentenceEmbeddingSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for ((doc_id, sentence_index), vector) in &set.vectors {
        let rec = SentenceRecord {
            doc_id: doc_id.clone(),
            sentence_index: *sentence_index,
            vector: vector.clone(),
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanEmbedding {
    pub vector: Vec<f64>,
    /// Fraction of tokens found in the table (0 when there are no tokens).
    pub coverage: f64,
}

/// Mean (with multiplicity) of the vectors of in-vocabulary tokens.
pub fn mean_word_embedding(
    doc: &Document,
    table: &EmbeddingTable,
    stopwords: &StopwordList,
) -> MeanEmbedding {
    mean_of_tokens(&clean_text(&doc.text, stopwords), table)
}

pub(crate) fn mean_of_tokens(tokens: &[String], table: &EmbeddingTable) -> MeanEmbedding {
    let mut sum = vec![0.0; table.dim()];
    let mut covered = 0usize;
    for t in tokens {
        if let Some(v) = table.get(t) {
            covered += 1;
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
    }
    if covered > 0 {
        sum.iter_mut().for_each(|s| *s /= covered as f64);
    }
    MeanEmbedding {
        vector: sum,
        coverage: if tokens.is_empty() {
            0.0
        } else {
            covered as f64 / tokens.len() as f64
        },
    }
}

/// Sentence vectors formed as the mean word vector of each sentence's
/// tokens (zero when no token is covered). The corpus must be segmented.
pub fn mean_sentence_embeddings(
    corpus: &Corpus,
    table: &EmbeddingTable,
    stopwords: &Stopwords,
) -> Result<SentenceEmbeddingSet> {
    SentenceEmbeddingSet::from_fn(corpus, table.dim(), |doc, s| {
        mean_of_tokens(
            &clean_text(&doc.sentences[s], stopwords.for_lang(doc.lang)),
            table,
        )
        .vector
    })
}

/// Word vectors that mirror a synthetic corpus' planted structure: words of
/// one group sit around a shared group center, class signatures add a small
/// class offset, noise words are drawn around the origin.
pub fn synthetic_word_embeddings(
    spec: &SynthSpec,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("valid normal");
    let draw = |scale: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| scale * unit.sample(rng)).collect()
    };
    let add = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };

    let centers: Vec<Vec<f64>> = (0..spec.groups).map(|_| draw(3.0, &mut rng)).collect();
    for (g, center) in centers.iter().enumerate() {
        for w in spec.group_vocab(g) {
            let jitter = draw(0.3, &mut rng);
            table.insert(w, add(center, &jitter))?;
        }
    }
    for c in 0..spec.fine_classes {
        let offset = add(&centers[spec.group_of(c)], &draw(0.8, &mut rng));
        for w in spec.class_signature(c) {
            let jitter = draw(0.3, &mut rng);
            table.insert(w, add(&offset, &jitter))?;
        }
    }
    for w in spec.noise_vocab() {
        let v = draw(1.0, &mut rng);
        table.insert(w, v)?;
    }
    if spec.outlier_docs > 0 {
        let center = draw(3.0, &mut rng);
        for w in spec.outlier_vocab() {
            let jitter = draw(0.3, &mut rng);
            table.insert(w, add(&center, &jitter))?;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelHierarchy, LabelLevel, Lang};
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_well_formed_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "v.vec", "2 3\nfoo 1 2 3\nbar 0.5 -1 2e-1\n");
        let t = load_word_embeddings(&p).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("bar"), Some(&[0.5, -1.0, 0.2][..]));
    }

    #[test]
    fn dimension_mismatch_cites_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "v.vec", "2 3\nfoo 1 2 3\nbar 1 2\n");
        match load_word_embeddings(&p).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("dimension mismatch"));
            }
            e => panic!("unexpected {e}"),
        }
        let p = write(dir.path(), "bad.vec", "two three\n");
        assert!(load_word_embeddings(&p).is_err());
        assert!(load_word_embeddings(&dir.path().join("missing.vec")).is_err());
    }

    #[test]
    fn duplicate_token_last_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "v.vec", "2 2\nfoo 1 1\nfoo 2 2\n");
        let t = load_word_embeddings(&p).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("foo"), Some(&[2.0, 2.0][..]));
        assert_eq!(t.duplicates(), &["foo".to_string()]);
    }

    #[test]
    fn word_vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = synthetic_word_embeddings(&SynthSpec::default(), 8, 1).unwrap();
        let p = dir.path().join("rt.vec");
        write_word_embeddings(&t, &p).unwrap();
        let back = load_word_embeddings(&p).unwrap();
        assert_eq!(back.len(), t.len());
        for (tok, v) in t.sorted_entries() {
            assert_eq!(back.get(tok).unwrap(), v.as_slice());
        }
    }

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("a", vec![1.0, 0.0]).unwrap();
        t.insert("b", vec![0.0, 1.0]).unwrap();
        t
    }

    fn doc(text: &str) -> Document {
        Document {
            id: "d".into(),
            lang: Lang::En,
            text: text.into(),
            labels: ["b1".to_string()].into(),
            sentences: vec![],
        }
    }

    #[test]
    fn mean_embedding_cases() {
        let none = StopwordList::empty(Lang::En);
        assert_eq!(
            mean_word_embedding(&doc("a b"), &table(), &none).vector,
            vec![0.5, 0.5]
        );
        let m = mean_word_embedding(&doc("zz yy"), &table(), &none);
        assert_eq!(m.vector, vec![0.0, 0.0]);
        assert_eq!(m.coverage, 0.0);
        let m = mean_word_embedding(&doc("a a b"), &table(), &none);
        assert!((m.vector[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.vector[1] - 1.0 / 3.0).abs() < 1e-15);
        let m = mean_word_embedding(&doc("a zz"), &table(), &none);
        assert_eq!(m.coverage, 0.5);
    }

    fn small_corpus() -> Corpus {
        let h = LabelHierarchy::new(
            [("b1".to_string(), "t1".to_string())].into(),
            [("t1".to_string(), "m1".to_string())].into(),
        )
        .unwrap();
        let docs = vec![
            Document {
                id: "x".into(),
                ..doc("One. Two.")
            },
            Document {
                id: "y".into(),
                ..doc("Three!")
            },
        ];
        Corpus::new(docs, h, LabelLevel::Belief)
            .unwrap()
            .segmented()
    }

    #[test]
    fn sentence_embeddings_complete_set() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus();
        let p = write(
            dir.path(),
            "s.jsonl",
            concat!(
                r#"{"doc_id":"x","sentence_index":0,"vector":[1,0]}"#,
                "\n",
                r#"{"doc_id":"x","sentence_index":1,"vector":[0,1]}"#,
                "\n",
                r#"{"doc_id":"y","sentence_index":0,"vector":[1,1]}"#,
                "\n",
            ),
        );
        let set = load_sentence_embeddings(&p, &corpus).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.get("y", 0), Some(&[1.0, 1.0][..]));
    }

    #[test]
    fn sentence_embeddings_errors() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus();
        let missing = write(
            dir.path(),
            "m.jsonl",
            concat!(
                r#"{"doc_id":"x","sentence_index":0,"vector":[1,0]}"#,
                "\n",
                r#"{"doc_id":"y","sentence_index":0,"vector":[1,1]}"#,
                "\n",
            ),
        );
        let e = load_sentence_embeddings(&missing, &corpus).unwrap_err();
        assert!(e.to_string().contains("(x, 1)"), "{e}");

        let unknown = write(
            dir.path(),
            "u.jsonl",
            r#"{"doc_id":"zzz","sentence_index":0,"vector":[1,0]}"#,
        );
        assert!(load_sentence_embeddings(&unknown, &corpus)
            .unwrap_err()
            .to_string()
            .contains("unknown doc id"));

        let mut body = String::new();
        body.push_str(&format!(
            "{}\n",
            serde_json::json!({"doc_id":"x","sentence_index":0,"vector":vec![0.0; 512]})
        ));
        body.push_str(&format!(
            "{}\n",
            serde_json::json!({"doc_id":"x","sentence_index":1,"vector":vec![0.0; 511]})
        ));
        let dims = write(dir.path(), "d.jsonl", &body);
        assert!(load_sentence_embeddings(&dims, &corpus)
            .unwrap_err()
            .to_string()
            .contains("dimension mismatch"));
    }

    #[test]
    fn sentence_embedding_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = small_corpus();
        let set = SentenceEmbeddingSet::from_fn(&corpus, 3, |d, s| {
            vec![s as f64, d.id.len() as f64, 0.25]
        })
        .unwrap();
        let p = dir.path().join("s.jsonl");
        write_sentence_embeddings(&set, &p).unwrap();
        assert_eq!(load_sentence_embeddings(&p, &corpus).unwrap(), set);
    }
}
