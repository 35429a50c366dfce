//! Text cleaning, tokenization, sentence segmentation and stopword lists.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::Lang;
use crate::error::{Error, Result};

const BUILTIN_EN: &str = include_str!("stopwords_en.txt");
const BUILTIN_DE: &str = include_str!("stopwords_de.txt");

/// Characters replaced by whitespace before tokenization.
pub const STRIPPED_CHARS: &[char] = &[
    '(', ')', '[', ']', '{', '}', '<', '>', '"', '\'', '`', '\u{2018}', '\u{2019}', '\u{201A}',
    '\u{201C}', '\u{201D}', '\u{201E}', '\u{00AB}', '\u{00BB}', '\n', '\r',
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    pub lang: Lang,
    words: HashSet<String>,
}

impl StopwordList {
    pub fn new(lang: Lang, words: impl IntoIterator<Item = String>) -> Self {
        Self {
            lang,
            words: words.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }

    /// An empty list; useful for tests and for disabling stopword removal.
    pub fn empty(lang: Lang) -> Self {
        Self {
            lang,
            words: HashSet::new(),
        }
    }

    pub fn builtin(lang: Lang) -> Self {
        let raw = match lang {
            Lang::En => BUILTIN_EN,
            Lang::De => BUILTIN_DE,
        };
        Self::new(lang, parse_lines(raw))
    }

    /// Reads one token per line (UTF-8). Blank lines are ignored.
    pub fn from_file(lang: Lang, path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let list = Self::new(lang, parse_lines(&raw));
        if list.words.is_empty() {
            return Err(Error::Validation(format!(
                "stopword file {} contains no words",
                path.display()
            )));
        }
        Ok(list)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn parse_lines(raw: &str) -> impl Iterator<Item = String> + '_ {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
}

/// Stopword lists keyed by language.
#[derive(Debug, Clone)]
pub struct Stopwords {
    lists: BTreeMap<Lang, StopwordList>,
}

impl Stopwords {
    pub fn builtin() -> Self {
        let lists = [Lang::En, Lang::De]
            .into_iter()
            .map(|l| (l, StopwordList::builtin(l)))
            .collect();
        Self { lists }
    }

    pub fn none() -> Self {
        let lists = [Lang::En, Lang::De]
            .into_iter()
            .map(|l| (l, StopwordList::empty(l)))
            .collect();
        Self { lists }
    }

    pub fn with_list(mut self, list: StopwordList) -> Self {
        self.lists.insert(list.lang, list);
        self
    }

    pub fn for_lang(&self, lang: Lang) -> &StopwordList {
        &self.lists[&lang]
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::builtin()
    }
}

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").expect("valid url regex"))
}

/// Lowercased letter/digit tokens with URLs, brackets, quotes, line feeds
/// and stopwords removed.
pub fn clean_text(text: &str, stopwords: &StopwordList) -> Vec<String> {
    let without_urls = url_pattern().replace_all(text, " ");
    let stripped: String = without_urls
        .chars()
        .map(|c| if STRIPPED_CHARS.contains(&c) { ' ' } else { c })
        .collect();
    stripped
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !t.starts_with("http") && !t.starts_with("www"))
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Rule-based sentence splitter.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace or end of text,
/// except when the period closes a single-letter token ("e.g.", "U. S.").
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for (pos, &(byte, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_boundary = chars.get(pos + 1).is_none_or(|&(_, n)| n.is_whitespace());
        if !at_boundary {
            continue;
        }
        if c == '.' && is_single_letter_before(&chars, pos) {
            continue;
        }
        let end = byte + c.len_utf8();
        push_trimmed(&mut sentences, &text[start..end]);
        start = end;
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn is_single_letter_before(chars: &[(usize, char)], pos: usize) -> bool {
    let mut letters = 0;
    let mut i = pos;
    while i > 0 && chars[i - 1].1.is_alphabetic() {
        letters += 1;
        i -= 1;
    }
    letters == 1
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_owned());
    }
}
