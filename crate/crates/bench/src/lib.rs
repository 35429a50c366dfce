//! Seeded inputs shared by the benchmarks in `benches/`.

use classabs::class_cluster::DistanceMatrix;
use classabs::corpus::{generate_synthetic_corpus, Stopwords, SynthSpec};
use classabs::vectorize::{tfidf, tokenize_corpus, DocTermMatrix, Vocabulary};
use classabs::{Corpus, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus(fine_classes: usize, docs_per_class: usize) -> Corpus {
    generate_synthetic_corpus(&SynthSpec {
        fine_classes,
        groups: 3.min(fine_classes),
        docs_per_class,
        ..SynthSpec::default()
    })
    .expect("valid spec")
}

pub fn tokens(corpus: &Corpus) -> Vec<Vec<String>> {
    tokenize_corpus(corpus, &Stopwords::builtin())
}

pub fn doc_term_matrix(corpus: &Corpus) -> DocTermMatrix {
    let toks = tokens(corpus);
    let vocab = Vocabulary::build(&toks, 2).expect("non-empty vocabulary");
    tfidf(&toks, &vocab, true)
}

/// Euclidean distances between `n` uniform random points in the unit square.
pub fn distance_matrix(n: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
        }
    }
    DistanceMatrix::new((0..n).map(|i| format!("c{i}")).collect(), m).expect("valid distances")
}

/// `k` well-separated Gaussian-ish blobs of `per_blob` points in `dim` dimensions.
pub fn blobs(k: usize, per_blob: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k * per_blob)
        .map(|i| {
            let c = (i / per_blob) as f64 * 10.0;
            (0..dim).map(|_| c + rng.random_range(-1.0..1.0)).collect()
        })
        .collect()
}
