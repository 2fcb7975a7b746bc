use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sgsm::mixer::MaskConfig;
use sgsm::pipeline::{stages, PipelineConfig, PipelineError};
use sgsm::selection::{ClassifierKind, Metric};

#[derive(Parser)]
#[command(name = "sgsm", version, about = "Pre-train and query a semi-generalist sensing model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config (`"schema": 1`); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Work directory; overrides the config.
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic unlabeled pool and labeled task.
    Synth(#[command(flatten)] Common),
    /// Apply every registered method to a dataset.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = stages::UNLABELED)]
        dataset: String,
    },
    /// Train one compressor per method on the transformed unlabeled pool.
    TrainCompressors(#[command(flatten)] Common),
    /// Train the mixer on the concatenated codes.
    TrainMixer(#[command(flatten)] Common),
    /// Embed a labeled dataset under one mask.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = stages::TASK)]
        dataset: String,
        /// T/F per channel in registry order; all open when omitted.
        #[arg(long)]
        mask: Option<MaskConfig>,
    },
    /// Score method subsets on a labeled dataset and pick the best.
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = stages::TASK)]
        dataset: String,
        /// Comma-separated masks; every non-empty subset when omitted.
        #[arg(long, value_delimiter = ',')]
        masks: Vec<MaskConfig>,
        /// Fail when the best mask beats the runner-up by less than this.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Fail when the best mask's train/holdout gap exceeds this.
        #[arg(long)]
        varsigma: Option<f64>,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        /// Use a one-hidden-layer classifier of this width instead of
        /// logistic regression.
        #[arg(long)]
        hidden: Option<usize>,
    },
    /// Print training losses and the stored selection table.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = stages::TASK)]
        dataset: String,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "accuracy" => Ok(Metric::Accuracy),
        "f1" | "f1_macro" | "f1-macro" => Ok(Metric::F1Macro),
        other => Err(format!("unknown metric {other:?} (accuracy, f1_macro)")),
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default_five(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.work_dir {
        cfg.work_dir.clone_from(dir);
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<String, PipelineError> {
    match command {
        Command::Synth(c) => stages::synth(&load_config(&c)?),
        Command::Transform { common, dataset } => stages::transform(&load_config(&common)?, &dataset),
        Command::TrainCompressors(c) => stages::train_compressors(&load_config(&c)?),
        Command::TrainMixer(c) => stages::train_mixer(&load_config(&c)?),
        Command::Embed { common, dataset, mask } => {
            let cfg = load_config(&common)?;
            let mask = mask.unwrap_or_else(|| MaskConfig::all_open(cfg.channel_count()));
            stages::embed(&cfg, &dataset, &mask)
        }
        Command::Select {
            common,
            dataset,
            masks,
            epsilon,
            varsigma,
            metric,
            hidden,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = metric {
                cfg.classifier.metric = m;
            }
            if let Some(hidden) = hidden {
                cfg.classifier.kind = ClassifierKind::Dense { hidden };
            }
            let masks = (!masks.is_empty()).then_some(masks.as_slice());
            stages::select(&cfg, &dataset, masks, epsilon, varsigma).map(|r| r.to_table())
        }
        Command::Report { common, dataset } => stages::report(&load_config(&common)?, &dataset),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(msg) => {
            println!("{}", msg.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sgsm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
