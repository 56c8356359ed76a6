use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

use config::{Config, ConfigError, Overrides};

/// Extract pairwise bacterial interactions from biomedical text.
#[derive(Debug, Parser)]
#[command(name = "bactint", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    common: CommonFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonFlags {
    /// Base seed; run i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of repeated runs.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Decision threshold on interaction scores.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Entity tagging service; overrides the config file and environment.
    #[arg(long, global = true, value_name = "URL")]
    ner_endpoint: Option<String>,
    /// Pair scoring service; overrides the config file and environment.
    #[arg(long, global = true, value_name = "URL")]
    score_endpoint: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annotated corpus utilities.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Convert external relation corpora into one sentence-level corpus.
    Harmonize {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        descriptors: Vec<PathBuf>,
    },
    /// Entity-pair classification datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train or evaluate the logistic baseline with repeated runs.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Run the extraction pipeline and write prediction records.
    Extract {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Text file or directory (`ss-ner-ie`, `ner-ie`), or BRAT
        /// directory (`only-ie`).
        input: PathBuf,
        /// Output file; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score all three pipeline modes against a passage-level gold corpus.
    Ablate {
        corpus: PathBuf,
        /// Use gold sentence boundaries in place of the segmenter.
        #[arg(long)]
        oracle_ss: bool,
        /// Use gold entities in place of the tagger.
        #[arg(long)]
        oracle_ner: bool,
        /// Use gold labels in place of the scorer.
        #[arg(long)]
        oracle_ie: bool,
        /// All three oracles.
        #[arg(long)]
        oracle: bool,
    },
    /// Validate an association network against literature sentences.
    #[command(subcommand)]
    Casestudy(CasestudyCommand),
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Parse every .txt/.ann pair and report violations.
    Validate { dir: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SegmenterArg {
    /// One sentence per non-blank line.
    Line,
    /// Punctuation rules with the abbreviation guard.
    Rule,
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Write one JSON record per entity pair.
    Build {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Treat the corpus as passages and split them with this segmenter.
        #[arg(long, value_enum)]
        segmenter: Option<SegmenterArg>,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// JSONL records from `dataset build`, or a sentence-level BRAT directory.
    #[arg(required_unless_present = "synthetic")]
    data: Option<PathBuf>,
    /// Use N template-generated sentences instead of a corpus.
    #[arg(long, value_name = "N", conflicts_with = "data")]
    synthetic: Option<usize>,
    /// Fraction of instances used for training in each run.
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum BaselineCommand {
    /// Fit on each run's training split and report test metrics.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Also fit on all instances and save the weights as JSON.
        #[arg(long, value_name = "FILE")]
        save: Option<PathBuf>,
    },
    /// Score each run's test split with saved weights.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum CasestudyCommand {
    /// Fetch sentences per edge, run the pipeline, report probable sentences.
    Run {
        network: PathBuf,
        /// Directory of per-pair sentence files; no network access needed.
        #[arg(long)]
        offline_store: Option<PathBuf>,
        /// Query the live literature search service.
        #[arg(long, conflicts_with = "offline_store")]
        online: bool,
        /// Write the full report as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        /// Maximum sentences per edge.
        #[arg(long)]
        fetch_cap: Option<usize>,
        /// Edges processed concurrently.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Precision from manual verdicts filled into a JSON report.
    Audit { report: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum ModeArg {
    SsNerIe,
    NerIe,
    OnlyIe,
}

impl From<ModeArg> for bactint::pipeline::PipelineMode {
    fn from(m: ModeArg) -> Self {
        use bactint::pipeline::PipelineMode;
        match m {
            ModeArg::SsNerIe => PipelineMode::SsNerIe,
            ModeArg::NerIe => PipelineMode::NerIe,
            ModeArg::OnlyIe => PipelineMode::OnlyIe,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprintln!("config error: {c}");
                return ExitCode::from(c.exit_code() as u8);
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// `Ok(false)` means the command ran but found problems.
fn run(cli: Cli) -> anyhow::Result<bool> {
    let (config, origin) = match &cli.config {
        Some(p) => (Config::load(p)?, p.display().to_string()),
        None => (Config::default(), "command line".to_string()),
    };
    let mut flags = Overrides {
        seed: cli.common.seed,
        runs: cli.common.runs,
        threshold: cli.common.threshold,
        ner_endpoint: cli.common.ner_endpoint,
        score_endpoint: cli.common.score_endpoint,
        ..Default::default()
    };
    match &cli.command {
        Command::Baseline(BaselineCommand::Train { data, .. } | BaselineCommand::Eval { data, .. }) => {
            flags.train_fraction = data.train_fraction;
        }
        Command::Casestudy(CasestudyCommand::Run { fetch_cap, workers, online, .. }) => {
            flags.fetch_cap = *fetch_cap;
            flags.workers = *workers;
            flags.online = *online;
        }
        _ => {}
    }
    let settings = config::resolve(config, flags, &origin)?;
    log::debug!("settings: {settings:?}");

    match cli.command {
        Command::Corpus(CorpusCommand::Validate { dir }) => commands::corpus_validate(&dir),
        Command::Harmonize { out, descriptors } => commands::harmonize(&settings, &out, &descriptors),
        Command::Dataset(DatasetCommand::Build { corpus, out, segmenter }) => {
            let seg = segmenter.map(|s| matches!(s, SegmenterArg::Rule));
            commands::dataset_build(&settings, &corpus, &out, seg)
        }
        Command::Baseline(BaselineCommand::Train { data, save }) => {
            commands::baseline_train(&settings, data.data.as_deref(), data.synthetic, save.as_deref())
        }
        Command::Baseline(BaselineCommand::Eval { data, model }) => {
            commands::baseline_eval(&settings, data.data.as_deref(), data.synthetic, &model)
        }
        Command::Extract { mode, input, out } => commands::extract(&settings, mode.into(), &input, out.as_deref()),
        Command::Ablate { corpus, oracle_ss, oracle_ner, oracle_ie, oracle } => commands::ablate(
            &settings,
            &corpus,
            commands::OracleChoice { ss: oracle || oracle_ss, ner: oracle || oracle_ner, ie: oracle || oracle_ie },
        ),
        Command::Casestudy(CasestudyCommand::Run { network, offline_store, json, .. }) => {
            commands::casestudy_run(&settings, &network, offline_store.as_deref(), json.as_deref())
        }
        Command::Casestudy(CasestudyCommand::Audit { report }) => commands::casestudy_audit(&report),
    }
}
