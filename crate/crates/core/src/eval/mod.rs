//! Fold planning, multi-label metrics, cross-validation and comparison tables.

mod cv;
mod folds;
mod metrics;
mod report;

pub use cv::{cross_validate, CvConfig, CvOutcome, FeatureKind, ReportContext};
pub use folds::{holdout_split, make_folds, FoldPlan, DEFAULT_FOLDS};
pub use metrics::{
    adjusted_rand_index, exact_match, f1_scores, normalized_entropy, F1Scores, NormalizedEntropy,
};
pub use report::{
    mean_report, results_table, FoldTag, Method, MetricsReport, ResultsTable, SkippedFold,
    TableCell, TableRow, PROTOCOL_NOTE,
};
