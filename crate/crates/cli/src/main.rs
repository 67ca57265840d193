mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seqrec::data::{Split, SynthOrder};
use seqrec::{Error, ModelKind, Result};

use config::{Flavor, Precision, RunConfig};

#[derive(Parser)]
#[command(name = "seqrec", version, about = "Session-based next-item recommendation toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each overrides the matching value of
/// the `--config` file.
#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    precision: Option<Precision>,
    #[arg(long, global = true, value_enum)]
    dataset_flavor: Option<Flavor>,
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    #[arg(long, global = true)]
    n_e: Option<usize>,
    #[arg(long, global = true)]
    n_h: Option<usize>,
    /// Length of the recommendation list.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Number of future items that count as relevant; repeatable.
    #[arg(long = "n", global = true)]
    n: Vec<usize>,
    /// Sequence-length buckets, e.g. `2-5,6-25,26-200`.
    #[arg(long, global = true)]
    buckets: Option<String>,
    /// Evaluation report (or its run directory) to compute uplift against.
    #[arg(long, global = true)]
    baseline_report: Option<PathBuf>,
    /// Dataset cache, or a run directory holding `dataset.bin`.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory; default is a fresh directory under `--runs-root`.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    runs_root: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a click log, split it and cache the result.
    Preprocess {
        /// Delimited file of (session, timestamp, item) rows.
        input: Option<PathBuf>,
        #[arg(long)]
        delimiter: Option<char>,
        /// The first row is a header.
        #[arg(long)]
        header: bool,
    },
    /// Generate a synthetic Markov dataset with a known optimum.
    Synth {
        #[arg(long, value_parser = parse_order)]
        order: Option<SynthOrder>,
        #[arg(long)]
        n_items: Option<usize>,
        #[arg(long)]
        n_sequences: Option<usize>,
        #[arg(long)]
        min_len: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        fanout: Option<usize>,
        #[arg(long)]
        skew: Option<f64>,
        #[arg(long)]
        groups: Option<usize>,
    },
    /// Train a network or fit a baseline on a cached dataset.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        decay_steps: Option<u64>,
    },
    /// Score a checkpoint on a cached split.
    Eval {
        /// Checkpoint file, or a training run directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
        #[arg(long)]
        max_offset: Option<usize>,
        #[arg(long)]
        resamples: Option<usize>,
    },
    /// Print the parameter count of every model for given vocabulary sizes.
    Params {
        /// Vocabulary size; repeatable. Defaults to the `--data` vocabulary.
        #[arg(long)]
        n_items: Vec<usize>,
    },
    /// Dataset statistics for every split of a cache.
    Stats,
}

fn parse_order(s: &str) -> std::result::Result<SynthOrder, String> {
    match s {
        "markov1" => Ok(SynthOrder::Markov1),
        "markov2" => Ok(SynthOrder::Markov2),
        "cycle" => Ok(SynthOrder::Cycle),
        "uniform" => Ok(SynthOrder::Uniform),
        _ => Err("expected markov1, markov2, cycle or uniform".into()),
    }
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        _ => Err("expected train, valid or test".into()),
    }
}

fn merge(common: Common, command: &Command) -> Result<RunConfig> {
    let mut c = RunConfig::load(common.config.as_deref())?;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(c.seed, common.seed);
    set!(c.threads, common.threads);
    set!(c.precision, common.precision);
    set!(c.dataset_flavor, common.dataset_flavor);
    set!(c.model.kind, common.model);
    set!(c.model.n_e, common.n_e);
    set!(c.model.n_h, common.n_h);
    set!(c.eval.k, common.k);
    set!(c.eval.buckets, common.buckets);
    set!(c.runs_root, common.runs_root);
    if !common.n.is_empty() {
        c.eval.n = common.n;
    }
    if common.baseline_report.is_some() {
        c.paths.baseline_report = common.baseline_report;
    }
    if common.data.is_some() {
        c.paths.data = common.data;
    }
    if common.run_dir.is_some() {
        c.run_dir = common.run_dir;
    }
    match command {
        Command::Preprocess { input, delimiter, header } => {
            if input.is_some() {
                c.paths.input = input.clone();
            }
            set!(c.input.delimiter, delimiter.map(String::from));
            c.input.header |= *header;
        }
        Command::Synth {
            order,
            n_items,
            n_sequences,
            min_len,
            max_len,
            fanout,
            skew,
            groups,
        } => {
            set!(c.synth.order, *order);
            set!(c.synth.n_items, *n_items);
            set!(c.synth.n_sequences, *n_sequences);
            set!(c.synth.min_len, *min_len);
            set!(c.synth.max_len, *max_len);
            set!(c.synth.fanout, *fanout);
            set!(c.synth.skew, *skew);
            set!(c.synth.groups, *groups);
        }
        Command::Train {
            epochs,
            batch_size,
            decay_steps,
        } => {
            set!(c.train.epochs, *epochs);
            set!(c.train.batch_size, *batch_size);
            set!(c.train.schedule.decay_steps, *decay_steps);
        }
        Command::Eval {
            checkpoint,
            split,
            max_offset,
            resamples,
        } => {
            if checkpoint.is_some() {
                c.paths.checkpoint = checkpoint.clone();
            }
            set!(c.eval.split, *split);
            set!(c.eval.max_offset, *max_offset);
            set!(c.eval.resamples, *resamples);
        }
        Command::Params { .. } | Command::Stats => {}
    }
    c.resolve()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = merge(cli.common, &cli.command)?;
    match cli.command {
        Command::Preprocess { .. } => commands::preprocess(&cfg),
        Command::Synth { .. } => commands::synth(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Eval { .. } => commands::eval(&cfg),
        Command::Params { n_items } => commands::params(&cfg, &n_items),
        Command::Stats => commands::stats(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_usage() {
        2
    } else {
        1
    }
}
