//! Planted-structure corpus generator.
//!
//! Each fine class owns a disjoint signature vocabulary; classes of the same
//! coarse group additionally share a group vocabulary. The returned
//! hierarchy encodes the planted grouping: belief `bNN` → theme `tG` → main
//! `mG` (the main level mirrors the theme level).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Document, LabelHierarchy, LabelLevel, Lang};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub fine_classes: usize,
    pub groups: usize,
    pub docs_per_class: usize,
    pub signature_size: usize,
    pub group_vocab_size: usize,
    pub noise_vocab_size: usize,
    /// Probability that a token is drawn from the shared noise vocabulary.
    pub noise_rate: f64,
    /// Probability that a non-noise token comes from the group vocabulary
    /// rather than the class signature.
    pub group_share: f64,
    pub doc_length: usize,
    pub sentence_length: usize,
    /// Probability that a document carries a second fine class.
    pub multi_label_rate: f64,
    /// Size of an extra far-away fine class (0 disables it). It gets its
    /// own tiny vocabulary and belongs to theme `t0`.
    pub outlier_docs: usize,
    pub outlier_signature_size: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            fine_classes: 12,
            groups: 3,
            docs_per_class: 30,
            signature_size: 12,
            group_vocab_size: 12,
            noise_vocab_size: 200,
            noise_rate: 0.3,
            group_share: 0.5,
            doc_length: 24,
            sentence_length: 8,
            multi_label_rate: 0.0,
            outlier_docs: 0,
            outlier_signature_size: 4,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic spec: {m}")));
        if self.fine_classes == 0 || self.groups == 0 {
            return bad("fine_classes and groups must be positive");
        }
        if !self.fine_classes.is_multiple_of(self.groups) {
            return bad("fine_classes must be divisible by groups");
        }
        if self.docs_per_class == 0 {
            return bad("docs_per_class must be at least 1");
        }
        if self.signature_size == 0 || self.doc_length == 0 || self.sentence_length == 0 {
            return bad("signature_size, doc_length and sentence_length must be positive");
        }
        if self.group_share > 0.0 && self.group_vocab_size == 0 {
            return bad("group_share > 0 requires a group vocabulary");
        }
        if self.noise_rate > 0.0 && self.noise_vocab_size == 0 {
            return bad("noise_rate > 0 requires a noise vocabulary");
        }
        if self.outlier_docs > 0 && self.outlier_signature_size == 0 {
            return bad("outlier class needs a vocabulary");
        }
        for (name, p) in [
            ("noise_rate", self.noise_rate),
            ("group_share", self.group_share),
            ("multi_label_rate", self.multi_label_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn group_of(&self, class: usize) -> usize {
        if class >= self.fine_classes {
            0
        } else {
            class % self.groups
        }
    }

    pub fn belief_id(class: usize) -> String {
        format!("b{class:02}")
    }

    pub fn theme_id(group: usize) -> String {
        format!("t{group}")
    }

    pub fn class_signature(&self, class: usize) -> Vec<String> {
        (0..self.signature_size)
            .map(|j| format!("sig{class:02}w{j:02}"))
            .collect()
    }

    pub fn group_vocab(&self, group: usize) -> Vec<String> {
        (0..self.group_vocab_size)
            .map(|j| format!("grp{group}w{j:02}"))
            .collect()
    }

    pub fn noise_vocab(&self) -> Vec<String> {
        (0..self.noise_vocab_size)
            .map(|j| format!("nz{j:03}"))
            .collect()
    }

    pub fn outlier_vocab(&self) -> Vec<String> {
        (0..self.outlier_signature_size)
            .map(|j| format!("outlier{j:02}"))
            .collect()
    }

    pub fn hierarchy(&self) -> LabelHierarchy {
        let mut b2t = BTreeMap::new();
        for c in 0..self.total_classes() {
            b2t.insert(Self::belief_id(c), Self::theme_id(self.group_of(c)));
        }
        let t2m = (0..self.groups)
            .map(|g| (Self::theme_id(g), format!("m{g}")))
            .collect();
        LabelHierarchy::new(b2t, t2m).expect("synthetic hierarchy is a tree")
    }

    pub fn total_classes(&self) -> usize {
        self.fine_classes + usize::from(self.outlier_docs > 0)
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &'a [String]) -> &'a str {
    &words[rng.random_range(0..words.len())]
}

/// Deterministic corpus with planted class/group structure.
pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let signatures: Vec<Vec<String>> = (0..spec.fine_classes)
        .map(|c| spec.class_signature(c))
        .collect();
    let group_vocab: Vec<Vec<String>> = (0..spec.groups).map(|g| spec.group_vocab(g)).collect();
    let noise = spec.noise_vocab();

    let mut documents = Vec::new();
    for class in 0..spec.fine_classes {
        for _ in 0..spec.docs_per_class {
            let mut classes = vec![class];
            if spec.fine_classes > 1 && rng.random_bool(spec.multi_label_rate) {
                let mut other = rng.random_range(0..spec.fine_classes - 1);
                if other >= class {
                    other += 1;
                }
                classes.push(other);
            }
            let tokens: Vec<&str> = (0..spec.doc_length)
                .map(|_| {
                    if rng.random_bool(spec.noise_rate) {
                        return pick(&mut rng, &noise);
                    }
                    let c = classes[rng.random_range(0..classes.len())];
                    if rng.random_bool(spec.group_share) {
                        pick(&mut rng, &group_vocab[spec.group_of(c)])
                    } else {
                        pick(&mut rng, &signatures[c])
                    }
                })
                .collect();
            documents.push(make_document(documents.len(), &tokens, spec, &classes));
        }
    }
    if spec.outlier_docs > 0 {
        let vocab = spec.outlier_vocab();
        for _ in 0..spec.outlier_docs {
            let tokens: Vec<&str> = (0..spec.doc_length)
                .map(|_| pick(&mut rng, &vocab))
                .collect();
            documents.push(make_document(
                documents.len(),
                &tokens,
                spec,
                &[spec.fine_classes],
            ));
        }
    }
    Corpus::new(documents, spec.hierarchy(), LabelLevel::Belief)
}

fn make_document(index: usize, tokens: &[&str], spec: &SynthSpec, classes: &[usize]) -> Document {
    let text = tokens
        .chunks(spec.sentence_length)
        .map(|s| format!("{}.", s.join(" ")))
        .collect::<Vec<_>>()
        .join(" ");
    Document {
        id: format!("doc{index:05}"),
        lang: Lang::En,
        text,
        labels: classes
            .iter()
            .map(|&c| SynthSpec::belief_id(c))
            .collect::<BTreeSet<_>>(),
        sentences: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{clean_text, StopwordList};

    #[test]
    fn counts_follow_spec() {
        let spec = SynthSpec::default();
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(corpus.len(), 360);
        assert_eq!(corpus.hierarchy().beliefs().len(), 12);
        assert_eq!(corpus.hierarchy().themes().len(), 3);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SynthSpec {
            multi_label_rate: 0.2,
            ..SynthSpec::default()
        };
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_uses_only_class_and_group_words() {
        let spec = SynthSpec {
            noise_rate: 0.0,
            ..SynthSpec::default()
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let none = StopwordList::empty(Lang::En);
        for doc in corpus.documents() {
            let belief = doc.labels.iter().next().unwrap();
            let class: usize = belief[1..].parse().unwrap();
            let mut allowed = spec.class_signature(class);
            allowed.extend(spec.group_vocab(spec.group_of(class)));
            for tok in clean_text(&doc.text, &none) {
                assert!(allowed.contains(&tok), "{tok} in {}", doc.id);
            }
        }
    }

    #[test]
    fn outlier_class_is_appended() {
        let spec = SynthSpec {
            outlier_docs: 3,
            ..SynthSpec::default()
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(corpus.len(), 363);
        assert_eq!(corpus.label_counts()["b12"], 3);
        assert_eq!(corpus.hierarchy().belief_to_theme["b12"], "t0");
    }

    #[test]
    fn rejects_invalid_specs() {
        for spec in [
            SynthSpec {
                fine_classes: 10,
                groups: 3,
                ..SynthSpec::default()
            },
            SynthSpec {
                docs_per_class: 0,
                ..SynthSpec::default()
            },
            SynthSpec {
                signature_size: 0,
                ..SynthSpec::default()
            },
            SynthSpec {
                noise_rate: 1.5,
                ..SynthSpec::default()
            },
        ] {
            assert!(generate_synthetic_corpus(&spec).is_err());
        }
    }
}
