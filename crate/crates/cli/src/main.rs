//! `storeplace`: synthesize cities, mine demand, evaluate and rank
//! candidate store locations, and serve the results over HTTP.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use storeplace::learners::ModelSpec;

use crate::config::{ProtocolKind, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "storeplace", version, about = "Demand-driven store placement")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Input data directory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Brand or category name.
    #[arg(long, global = true)]
    target: Option<String>,
    /// Learner: lasso, krr, random_forest (rf), gbdt, lambda_mart (lambdamart) or baseline.
    #[arg(long, global = true)]
    learner: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic city with planted ground truth.
    Synth,
    /// Mine demand, exclude supplied demand and cluster the gap.
    Demand {
        /// Weight of distance against supply in the retention score.
        #[arg(long)]
        alpha: Option<f64>,
        /// Heatmap cell size in meters.
        #[arg(long)]
        cell_m: Option<f64>,
    },
    /// Score a learner against the random baseline.
    Eval {
        #[arg(long, value_enum)]
        protocol: Option<ProtocolKind>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        brand: Option<String>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Rank candidate locations by predicted customers.
    Rank {
        /// Fitted model.json to use instead of training.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Random-forest feature importance for the target's category.
    Importance,
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let c = &cli.common;
    if let Some(s) = c.seed {
        cfg.seed = s;
        cfg.city.seed = s;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(d) = &c.data {
        cfg.data = Some(d.clone());
    }
    if let Some(t) = &c.target {
        cfg.target = Some(t.clone());
    }
    if let Some(name) = &c.learner {
        let spec = ModelSpec::named(name).ok_or_else(|| CliError::Usage(format!("unknown learner {name:?}")))?;
        if spec.name() != cfg.model.name() {
            cfg.model = spec;
        }
    }
    match &cli.command {
        Command::Demand { alpha, cell_m } => {
            if let Some(a) = alpha {
                cfg.params.demand.exclusion.alpha = *a;
            }
            if let Some(c) = cell_m {
                cfg.heatmap_cell_m = *c;
            }
        }
        Command::Eval {
            protocol,
            k,
            brand,
            repeats,
        } => {
            if let Some(p) = protocol {
                cfg.eval.protocol = *p;
            }
            if let Some(k) = k {
                cfg.k = *k;
            }
            if brand.is_some() {
                cfg.eval.brand = brand.clone();
            }
            if let Some(r) = repeats {
                cfg.eval.repeats = *r;
            }
        }
        Command::Rank { model, top_k } => {
            if model.is_some() {
                cfg.model_file = model.clone();
            }
            if top_k.is_some() {
                cfg.params.top_k = *top_k;
            }
        }
        Command::Serve { port, host } => {
            if let Some(p) = port {
                cfg.serve.port = *p;
            }
            if let Some(h) = host {
                cfg.serve.host = h.clone();
            }
        }
        Command::Synth | Command::Importance => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Demand { .. } => commands::demand(&cfg),
        Command::Eval { .. } => commands::eval(&cfg),
        Command::Rank { .. } => commands::rank(&cfg),
        Command::Importance => commands::importance(&cfg),
        Command::Serve { .. } => commands::serve(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
