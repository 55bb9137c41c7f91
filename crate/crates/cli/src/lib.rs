//! Command-line driver: configuration loading, flag overrides and exit codes.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{Ctx, Status};
use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(name = "toposcale", version, about = "Multi-topology annotation, reward modelling and selection")]
pub struct Cli {
    /// JSON pipeline configuration; missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for generation, training and curation; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory that relative paths in the configuration resolve against.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic arithmetic problems to the problems file.
    MakeProblems {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Generate responses for every problem under every topology.
    Generate {
        /// Samples per problem and topology.
        #[arg(long)]
        n: Option<u32>,
        /// World profile for mock generation.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Hard-label responses and compute per-topology topo labels.
    Annotate,
    /// Assign difficulty tiers from topo-label quantiles.
    Segment {
        #[arg(long)]
        q_low: Option<f64>,
        #[arg(long)]
        q_high: Option<f64>,
    },
    /// Train the reward model on the training split.
    TrainTrm {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Evaluate the reward model on the held-out split.
    EvalTrm,
    /// Select a topology and answer per problem with the reward model.
    Compete {
        /// mean or max
        #[arg(long)]
        aggregate: Option<String>,
    },
    /// Build the fine-tuning set by tiered sampling and rejection sampling.
    Curate {
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Write dataset metrics and the strategy comparison table.
    Report,
    /// Run every stage from generation to report.
    Pipeline,
}

fn build_context(cli: &Cli) -> Result<Ctx> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    match &cli.command {
        Command::MakeProblems { count } => {
            if let Some(c) = count {
                cfg.generation.problems = *c;
            }
        }
        Command::Generate { n, profile } => {
            if let Some(n) = n {
                cfg.generation.n = *n;
            }
            if let Some(p) = profile {
                cfg.generation.profile = p.clone();
            }
        }
        Command::Segment { q_low, q_high } => {
            if let Some(q) = q_low {
                cfg.segment.q_low = *q;
            }
            if let Some(q) = q_high {
                cfg.segment.q_high = *q;
            }
        }
        Command::TrainTrm { epochs, learning_rate } => {
            if let Some(e) = epochs {
                cfg.trm.epochs = *e;
            }
            if let Some(lr) = learning_rate {
                cfg.trm.learning_rate = *lr;
            }
        }
        Command::Compete { aggregate } => {
            if let Some(a) = aggregate {
                cfg.compete.aggregate = a.parse()?;
            }
        }
        Command::Curate { fraction, top_k } => {
            if let Some(f) = fraction {
                cfg.curate.fraction = *f;
            }
            if let Some(k) = top_k {
                cfg.curate.top_k = *k;
            }
        }
        Command::Annotate | Command::EvalTrm | Command::Report | Command::Pipeline => {}
    }
    cfg.validate()?;
    let paths = cfg.paths.resolve(&cli.workdir);
    Ok(Ctx { cfg, paths })
}

pub fn execute(cli: &Cli) -> Result<Status> {
    let ctx = build_context(cli)?;
    match cli.command {
        Command::MakeProblems { .. } => commands::make_problems(&ctx),
        Command::Generate { .. } => commands::generate(&ctx),
        Command::Annotate => commands::annotate(&ctx),
        Command::Segment { .. } => commands::segment(&ctx),
        Command::TrainTrm { .. } => commands::train_trm(&ctx),
        Command::EvalTrm => commands::eval_trm(&ctx),
        Command::Compete { .. } => commands::compete_cmd(&ctx),
        Command::Curate { .. } => commands::curate(&ctx),
        Command::Report => commands::report(&ctx),
        Command::Pipeline => commands::pipeline(&ctx),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 success, 1 configuration or validation error,
/// 2 partial request failure, 3 every request failed.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
