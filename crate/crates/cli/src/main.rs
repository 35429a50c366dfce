use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use classabs::corpus::{generate_synthetic_corpus, load_corpus, CorpusFormat, SynthSpec};
use classabs::eval::FeatureKind;
use classabs::pipeline::{
    compare, corpus_stats, load_mean_report, run, stats_markdown, EmbeddingKind,
};
use classabs::vectorize::{
    mean_sentence_embeddings, synthetic_word_embeddings, write_sentence_embeddings,
    write_word_embeddings,
};
use classabs::{Error, ErrorKind, Method, RunConfig};

#[derive(Parser)]
#[command(
    name = "classabs",
    version,
    about = "Label-space abstraction experiments for multi-label text"
)]
struct Cli {
    /// Log progress (repeat for debug output). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-language label and size statistics of a corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long, default_value = "jsonl", value_parser = parse_format)]
        format: CorpusFormat,
        /// Print JSON instead of markdown.
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic corpus with planted class groups.
    Synth(SynthArgs),
    /// Abstract labels, cross-validate a classifier and write reports.
    Run(Box<RunArgs>),
    /// Merge the mean reports of several runs into one table.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Also write table.md and table.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthSpec::default().fine_classes)]
    fine_classes: usize,
    #[arg(long, default_value_t = SynthSpec::default().groups)]
    groups: usize,
    #[arg(long, default_value_t = SynthSpec::default().docs_per_class)]
    docs_per_class: usize,
    #[arg(long, default_value_t = SynthSpec::default().noise_rate)]
    noise_rate: f64,
    #[arg(long, default_value_t = SynthSpec::default().multi_label_rate)]
    multi_label_rate: f64,
    /// Documents in an extra far-away class (0 for none).
    #[arg(long, default_value_t = 0)]
    outlier_docs: usize,
    #[arg(long, default_value_t = SynthSpec::default().seed)]
    seed: u64,
    /// Dimension of the word vectors and sentence embeddings to write; 0 skips them.
    #[arg(long, default_value_t = 16)]
    embedding_dim: usize,
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    corpus_id: Option<String>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(short = 'k', long = "k")]
    k: Option<usize>,
    #[arg(long)]
    lsi_topics: Option<usize>,
    #[arg(long, value_parser = parse_embedding_kind)]
    embedding_kind: Option<EmbeddingKind>,
    #[arg(long)]
    embedding_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_features)]
    features: Option<FeatureKind>,
    #[arg(long)]
    min_df: Option<usize>,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stopwords_en: Option<PathBuf>,
    #[arg(long)]
    stopwords_de: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_embedding_kind(s: &str) -> Result<EmbeddingKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_features(s: &str) -> Result<FeatureKind, String> {
    match s {
        "tfidf" => Ok(FeatureKind::Tfidf),
        "lsi" => Ok(FeatureKind::Lsi),
        other => Err(format!("unknown feature kind {other:?} (tfidf or lsi)")),
    }
}

impl RunArgs {
    fn into_config(self) -> classabs::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let missing =
                    |name: &str| Error::Config(format!("--{name} is required without --config"));
                RunConfig::new(
                    self.corpus.clone().ok_or_else(|| missing("corpus"))?,
                    self.hierarchy.clone().ok_or_else(|| missing("hierarchy"))?,
                    self.method.ok_or_else(|| missing("method"))?,
                    self.k.ok_or_else(|| missing("k"))?,
                )
            }
        };
        macro_rules! set {
            ($($field:ident).+ = $value:expr) => {
                if let Some(v) = $value {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(corpus = self.corpus);
        set!(hierarchy = self.hierarchy);
        set!(format = self.format);
        set!(method = self.method);
        set!(k = self.k);
        set!(embedding_kind = self.embedding_kind);
        set!(features = self.features);
        set!(min_df = self.min_df);
        set!(classifier.n_trees = self.n_trees);
        set!(classifier.max_depth = self.max_depth);
        set!(classifier.learning_rate = self.learning_rate);
        set!(classifier.min_samples_leaf = self.min_samples_leaf);
        set!(classifier.threshold = self.threshold);
        set!(folds = self.folds);
        set!(seed = self.seed);
        if self.corpus_id.is_some() {
            cfg.corpus_id = self.corpus_id;
        }
        if self.lsi_topics.is_some() {
            cfg.lsi_topics = self.lsi_topics;
        }
        if self.embedding_file.is_some() {
            cfg.embedding_file = self.embedding_file;
        }
        if self.stopwords_en.is_some() {
            cfg.stopwords_en = self.stopwords_en;
        }
        if self.stopwords_de.is_some() {
            cfg.stopwords_de = self.stopwords_de;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        Ok(cfg)
    }
}

fn cmd_stats(
    corpus: &Path,
    hierarchy: &Path,
    format: CorpusFormat,
    json: bool,
) -> classabs::Result<()> {
    let c = load_corpus(corpus, format, hierarchy)?;
    let rows = corpus_stats(&c)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).expect("rows serialize")
        );
    } else {
        print!("{}", stats_markdown(&rows));
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> classabs::Result<()> {
    let spec = SynthSpec {
        fine_classes: args.fine_classes,
        groups: args.groups,
        docs_per_class: args.docs_per_class,
        noise_rate: args.noise_rate,
        multi_label_rate: args.multi_label_rate,
        outlier_docs: args.outlier_docs,
        seed: args.seed,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic_corpus(&spec)?.segmented();
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    corpus.write_jsonl(&args.out.join("corpus.jsonl"))?;
    corpus.hierarchy().save(&args.out.join("hierarchy.json"))?;
    if args.embedding_dim > 0 {
        let table = synthetic_word_embeddings(&spec, args.embedding_dim, spec.seed)?;
        write_word_embeddings(&table, &args.out.join("words.vec"))?;
        let sentences = mean_sentence_embeddings(&corpus, &table, &Default::default())?;
        write_sentence_embeddings(&sentences, &args.out.join("sentences.jsonl"))?;
    }
    println!(
        "wrote {} documents ({} fine classes) to {}",
        corpus.len(),
        spec.total_classes(),
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> classabs::Result<()> {
    let cfg = args.into_config()?;
    info!("config hash {}", cfg.hash());
    let output = run(&cfg)?;
    for s in &output.cv.skipped {
        eprintln!(
            "fold {} skipped: classes {:?} missing from training",
            s.fold, s.missing_classes
        );
    }
    print!(
        "{}",
        classabs::eval::results_table(std::slice::from_ref(&output.cv.mean)).to_markdown()
    );
    if let Some(dir) = &cfg.out {
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

fn cmd_compare(dirs: &[PathBuf], out: Option<&Path>) -> classabs::Result<()> {
    let reports = dirs
        .iter()
        .map(|d| load_mean_report(d))
        .collect::<classabs::Result<Vec<_>>>()?;
    let table = compare(&reports)?;
    let md = table.to_markdown();
    print!("{md}");
    if let Some(dir) = out {
        let io = |path: PathBuf| move |e| Error::Io { path, source: e };
        std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let md_path = dir.join("table.md");
        std::fs::write(&md_path, &md).map_err(io(md_path.clone()))?;
        let json_path = dir.join("table.json");
        std::fs::write(&json_path, table.to_json() + "\n").map_err(io(json_path.clone()))?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Stats {
            corpus,
            hierarchy,
            format,
            json,
        } => cmd_stats(&corpus, &hierarchy, format, json),
        Command::Synth(args) => cmd_synth(&args),
        Command::Run(args) => cmd_run(*args),
        Command::Compare { dirs, out } => cmd_compare(&dirs, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
