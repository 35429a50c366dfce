use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{segment_sentences, Corpus, LabelLevel, Lang};
use crate::error::{Error, Result};

/// Per-language label and size counts of a belief-level corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub lang: Lang,
    pub main_themes: usize,
    pub themes: usize,
    pub beliefs: usize,
    pub documents: usize,
    pub sentences: usize,
}

/// One row per language present. Label counts include only labels used by
/// that language's documents; sentences come from the supplied
/// segmentation, or the built-in segmenter when none is given.
pub fn corpus_stats(corpus: &Corpus) -> Result<Vec<StatsRow>> {
    if corpus.active_level() != LabelLevel::Belief {
        return Err(Error::InvalidArgument(format!(
            "statistics need a belief-level corpus, got {}",
            corpus.active_level()
        )));
    }
    let h = corpus.hierarchy();
    let langs: BTreeSet<Lang> = corpus.documents().iter().map(|d| d.lang).collect();
    Ok(langs
        .into_iter()
        .map(|lang| {
            let docs: Vec<_> = corpus
                .documents()
                .iter()
                .filter(|d| d.lang == lang)
                .collect();
            let beliefs: BTreeSet<&str> = docs
                .iter()
                .flat_map(|d| d.labels.iter().map(String::as_str))
                .collect();
            let themes: BTreeSet<&str> = beliefs
                .iter()
                .map(|b| h.belief_to_theme[*b].as_str())
                .collect();
            let mains: BTreeSet<&str> = themes
                .iter()
                .map(|t| h.theme_to_main[*t].as_str())
                .collect();
            let sentences = docs
                .iter()
                .map(|d| {
                    if d.sentences.is_empty() {
                        segment_sentences(&d.text).len()
                    } else {
                        d.sentences.len()
                    }
                })
                .sum();
            StatsRow {
                lang,
                main_themes: mains.len(),
                themes: themes.len(),
                beliefs: beliefs.len(),
                documents: docs.len(),
                sentences,
            }
        })
        .collect())
}

pub fn stats_markdown(rows: &[StatsRow]) -> String {
    let mut out =
        String::from("| Language | Main themes | Themes | Beliefs | Documents | Sentences |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            r.lang.as_str().to_uppercase(),
            r.main_themes,
            r.themes,
            r.beliefs,
            r.documents,
            r.sentences
        ));
    }
    out
}
