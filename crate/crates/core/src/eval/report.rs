use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Where the evaluated label space came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Expert,
    SupervisedCa,
    UnsupervisedCa,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Expert, Method::SupervisedCa, Method::UnsupervisedCa];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Expert => "expert",
            Method::SupervisedCa => "supervised-ca",
            Method::UnsupervisedCa => "unsupervised-ca",
        }
    }

    fn column_title(self) -> &'static str {
        match self {
            Method::Expert => "Expert",
            Method::SupervisedCa => "Supervised CA",
            Method::UnsupervisedCa => "Unsupervised CA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// A single fold index or the cross-fold mean. Serializes as a number or `"mean"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FoldTag {
    Index(usize),
    Mean,
}

impl Serialize for FoldTag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FoldTag::Index(i) => s.serialize_u64(*i as u64),
            FoldTag::Mean => s.serialize_str("mean"),
        }
    }
}

impl<'de> Deserialize<'de> for FoldTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(FoldTag::Index(i)),
            Raw::Name(s) if s == "mean" => Ok(FoldTag::Mean),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("invalid fold tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub fold: usize,
    pub missing_classes: Vec<String>,
}

pub const PROTOCOL_NOTE: &str = "k-fold cross-validation, each fold tested once; \
the 80/20 holdout split is available separately and not used here";

/// Scores for one fold or the mean over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub corpus: String,
    pub method: Method,
    #[serde(rename = "K")]
    pub k: usize,
    pub fold: FoldTag,
    pub em: f64,
    pub f1_macro: f64,
    pub f1_micro: f64,
    pub ne: f64,
    pub config_hash: String,
    pub seed: u64,
    /// Always `"gold"`: entropy is taken over gold label counts of the test documents.
    #[serde(default = "gold")]
    pub ne_basis: String,
    #[serde(default)]
    pub ne_degenerate: bool,
    #[serde(default)]
    pub n_test: usize,
    #[serde(default)]
    pub protocol: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_folds: Vec<SkippedFold>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

fn gold() -> String {
    "gold".into()
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::Validation(format!("invalid report JSON: {e}")))
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("em", self.em),
            ("f1_macro", self.f1_macro),
            ("f1_micro", self.f1_micro),
            ("ne", self.ne),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Average of the four metrics over `folds`. Metadata is taken from the first fold.
pub fn mean_report(folds: &[MetricsReport]) -> Result<MetricsReport> {
    let first = folds
        .first()
        .ok_or_else(|| Error::Validation("no evaluated folds to average".into()))?;
    let n = folds.len() as f64;
    let avg = |f: fn(&MetricsReport) -> f64| folds.iter().map(f).sum::<f64>() / n;
    let mean = MetricsReport {
        fold: FoldTag::Mean,
        em: avg(|r| r.em),
        f1_macro: avg(|r| r.f1_macro),
        f1_micro: avg(|r| r.f1_micro),
        ne: avg(|r| r.ne),
        ne_degenerate: folds.iter().any(|r| r.ne_degenerate),
        n_test: folds.iter().map(|r| r.n_test).sum(),
        ..first.clone()
    };
    mean.check()?;
    Ok(mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub em: f64,
    pub f1_macro: f64,
    pub f1_micro: f64,
    pub ne: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub corpus: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub expert: Option<TableCell>,
    pub supervised_ca: Option<TableCell>,
    pub unsupervised_ca: Option<TableCell>,
}

impl TableRow {
    fn cell(&self, m: Method) -> Option<&TableCell> {
        match m {
            Method::Expert => self.expert.as_ref(),
            Method::SupervisedCa => self.supervised_ca.as_ref(),
            Method::UnsupervisedCa => self.unsupervised_ca.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

const MISSING: &str = "—";

impl ResultsTable {
    pub fn to_markdown(&self) -> String {
        let mut header = vec!["Corpus".to_owned(), "Labels".to_owned()];
        for m in Method::ALL {
            for metric in ["Em", "Fma", "Fmi", "Ne"] {
                header.push(format!("{} {metric}", m.column_title()));
            }
        }
        let mut out = format!("| {} |\n", header.join(" | "));
        out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
        for row in &self.rows {
            let mut cells = vec![row.corpus.clone(), row.k.to_string()];
            for m in Method::ALL {
                match row.cell(m) {
                    Some(c) => cells.extend(
                        [c.em, c.f1_macro, c.f1_micro, c.ne].map(|v| format!("{:.2}", round2(v))),
                    ),
                    None => cells.extend(std::iter::repeat_n(MISSING.to_owned(), 4)),
                }
            }
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("table serializes")
    }
}

/// Groups reports into rows keyed by (corpus, K) with one column group per
/// method. Values are rounded to 2 decimals. Per-fold reports are ignored
/// whenever a mean report for the same cell is present; otherwise the last
/// report for a cell wins.
pub fn results_table(reports: &[MetricsReport]) -> ResultsTable {
    let mut cells: BTreeMap<(String, usize), BTreeMap<Method, (bool, TableCell)>> = BTreeMap::new();
    for r in reports {
        let is_mean = r.fold == FoldTag::Mean;
        let cell = TableCell {
            em: round2(r.em),
            f1_macro: round2(r.f1_macro),
            f1_micro: round2(r.f1_micro),
            ne: round2(r.ne),
        };
        let slot = cells.entry((r.corpus.clone(), r.k)).or_default();
        match slot.get(&r.method) {
            Some((true, _)) if !is_mean => {}
            _ => {
                slot.insert(r.method, (is_mean, cell));
            }
        }
    }
    let rows = cells
        .into_iter()
        .map(|((corpus, k), by_method)| {
            let get = |m| by_method.get(&m).map(|&(_, c)| c);
            TableRow {
                corpus,
                k,
                expert: get(Method::Expert),
                supervised_ca: get(Method::SupervisedCa),
                unsupervised_ca: get(Method::UnsupervisedCa),
            }
        })
        .collect();
    ResultsTable { rows }
}
