mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "targettype", version, about = "Target type ranking for entity-bearing queries")]
pub struct Cli {
    /// Root seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More logging; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Bm25,
    Lm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    /// Entity-centric: aggregate entity scores onto types.
    Ec,
    /// Type-centric: rank pseudo type documents.
    Tc,
    /// Count relevant entities per type (needs --entity-qrels).
    Oracle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackgroundArg {
    /// Statistics over pseudo type documents.
    Types,
    /// idf and collection probabilities from the entity index.
    Entities,
}

#[derive(Args, Debug, Clone)]
pub struct RetrievalArgs {
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub mu: f64,
}

#[derive(Args, Debug, Clone)]
pub struct KbArgs {
    #[arg(long)]
    pub types: PathBuf,
    #[arg(long)]
    pub entities: PathBuf,
    #[arg(long)]
    pub entity_types: PathBuf,
    /// Prebuilt index; rebuilt from the entities when omitted.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Use direct type assignments only, without ancestor closure.
    #[arg(long)]
    pub no_closure: bool,
    /// Index entity names along with descriptions (ignored with --index).
    #[arg(long)]
    pub include_names: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 1000)]
    pub trees: usize,
    /// Fraction of features tried at each split.
    #[arg(long, default_value_t = 0.10)]
    pub max_features: f64,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long)]
    pub no_bootstrap: bool,
    /// Gain that maps to a training target of 1.
    #[arg(long, default_value_t = 7.0)]
    pub max_gain: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the entity inverted index.
    BuildIndex {
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        include_names: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve entities for each query.
    RankEntities {
        #[arg(long)]
        index: PathBuf,
        /// `qid<TAB>text` file.
        #[arg(long, required_unless_present = "query", conflicts_with = "query")]
        queries: Option<PathBuf>,
        /// A single query, reported under qid `query`.
        #[arg(long)]
        query: Option<String>,
        #[arg(long, value_enum, default_value = "bm25")]
        model: ModelArg,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank taxonomy types for each query with a baseline or the oracle.
    RankTypes {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_enum, default_value = "ec")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "bm25")]
        model: ModelArg,
        /// Entities aggregated by the entity-centric method.
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        entity_qrels: Option<PathBuf>,
        /// Background statistics for type-centric scoring.
        #[arg(long, value_enum, default_value = "types")]
        tc_background: BackgroundArg,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the 25 features for (query, type) candidates.
    ExtractFeatures {
        #[command(flatten)]
        kb: KbArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Type judgments; fills the target column.
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Every taxonomy type is a candidate (default).
        #[arg(long, conflicts_with = "pool")]
        all_types: bool,
        /// Candidates are the union of these runs' top types.
        #[arg(long, num_args = 1..)]
        pool: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        pool_depth: usize,
        /// Keep negative cosines instead of clamping at 0.
        #[arg(long)]
        no_clamp: bool,
        /// Background statistics for type-centric scoring.
        #[arg(long, value_enum, default_value = "types")]
        tc_background: BackgroundArg,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a random forest on a labeled feature file.
    TrainLtr {
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        forest: ForestArgs,
        /// Also write feature importance as TSV.
        #[arg(long)]
        importance: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the candidates of a feature file with a trained model.
    PredictLtr {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query-grouped cross-validation.
    Cv {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[command(flatten)]
        forest: ForestArgs,
        /// Also write the qid → fold manifest.
        #[arg(long)]
        folds_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// NDCG@1/@5 when adding features in order of importance.
    Ablation {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a run against type judgments.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// NDCG cutoffs, comma separated.
        #[arg(long = "k", alias = "cutoffs", value_delimiter = ',', default_values_t = [1, 5])]
        cutoffs: Vec<usize>,
        /// `qid<TAB>category` file for per-category means.
        #[arg(long)]
        groups: Option<PathBuf>,
        /// Second run for a paired t-test per cutoff.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Use 2^gain - 1 instead of the raw gain.
        #[arg(long)]
        exponential: bool,
        #[arg(long)]
        per_query: bool,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pool candidate types for annotation.
    Pool {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Taxonomy for writing one micro-task per top-level subtree.
        #[arg(long, requires = "tasks_out")]
        types: Option<PathBuf>,
        #[arg(long)]
        tasks_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate worker votes into graded type judgments.
    MergeAnnotations {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long = "taxonomy", alias = "types")]
        types: PathBuf,
        /// Keep same-path votes apart.
        #[arg(long)]
        no_merge: bool,
        /// Also write the main-type distribution.
        #[arg(long)]
        distribution: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fleiss' kappa of worker annotations.
    Kappa {
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Full experiment from raw inputs to a summary table.
    Pipeline {
        #[arg(long)]
        types: PathBuf,
        #[arg(long)]
        entities: PathBuf,
        #[arg(long)]
        entity_types: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        categories: Option<PathBuf>,
        #[arg(long)]
        entity_qrels: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Pool candidates to this depth instead of using every type.
        #[arg(long)]
        pool_depth: Option<usize>,
        #[arg(long)]
        no_closure: bool,
        #[arg(long)]
        include_names: bool,
        #[command(flatten)]
        forest: ForestArgs,
        /// Background statistics for type-centric scoring.
        #[arg(long, value_enum, default_value = "types")]
        tc_background: BackgroundArg,
        #[command(flatten)]
        retrieval: RetrievalArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(3);
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 usage, 2 data validation, 3 anything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<targettype::Error>() {
        Some(err) if err.is_usage_error() => 1,
        Some(err) if err.is_data_error() => 2,
        _ => 3,
    }
}
