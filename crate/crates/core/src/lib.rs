//! Coarsening of fine-grained multi-label text annotations.
//!
//! Three ways to obtain a smaller label space are provided: projecting
//! through an expert hierarchy, clustering class centroids in an LSI space
//! with WPGMA, and k-means over sentence or document embeddings. Each result
//! is evaluated by cross-validated one-vs-rest gradient boosting.

pub mod class_cluster;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod lsi;
pub mod pipeline;
pub mod unsup_cluster;
pub mod vectorize;

pub use corpus::{Corpus, Document, LabelHierarchy, LabelLevel, Lang};
pub use error::{Error, ErrorKind, Result};
pub use eval::{Method, MetricsReport};
pub use linalg::Matrix;
pub use pipeline::RunConfig;
