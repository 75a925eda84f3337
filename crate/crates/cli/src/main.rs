//! lfsim: trace-driven simulation of distributed DTN cache delivery and
//! knowledge-graph data discovery, from one reproducible config.

mod cmd_ckat;
mod cmd_sim;
mod cmd_workload;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::ScenarioConfig;
use lfsim_core::delivery::Mode;

#[derive(Parser)]
#[command(name = "lfsim", version, about = "Simulate intelligent data delivery and discovery for large-facility workloads", max_term_width = 100)]
struct Cli {
    /// Scenario config JSON; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding conventionally named inputs (overrides the config's data_dir).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catalog, request trace, and ground truth.
    GenTrace {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify per-user access patterns from a trace.
    Classify,
    /// Compute per-user and aggregate affinity statistics.
    Stats,
    /// Replay a trace under one delivery mode.
    Simulate {
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay a trace across modes x seeds, in parallel worker slots.
    Sweep {
        /// Comma-separated modes (default: all four).
        #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
        modes: Option<Vec<Mode>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Build the collaborative knowledge graph from a catalog and trace.
    KgBuild,
    /// Train the recommender and write a model checkpoint.
    Train {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Disable the attention mechanism.
        #[arg(long)]
        no_attention: bool,
    },
    /// Rank top-K items per user from a trained checkpoint.
    Recommend {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Users to recommend for (default: every user in the model).
        #[arg(long)]
        user: Vec<String>,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Recall@K / NDCG@K of a checkpoint against its held-out split.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Knowledge-combination study across source subsets and attention modes.
    Combos {
        #[arg(long)]
        noise: Option<usize>,
    },
    /// Summarize a sweep's metrics.csv into per-mode tables.
    Report {
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| {
        format!("unknown mode {s:?}; expected no_cache, lru_only, virtual_groups, or smart_cache")
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = ScenarioConfig::load(cli.config.as_deref())?;
    if let Some(data) = &cli.data {
        cfg.data_dir = Some(data.clone());
    }
    let out = &cli.out;

    match cli.command {
        Command::GenTrace { seed } => {
            let seed = seed.unwrap_or(cfg.seed);
            cmd_workload::gen_trace(&cfg, seed, out)
        }
        Command::Classify => cmd_workload::classify(&cfg, out),
        Command::Stats => cmd_workload::stats(&cfg, out),
        Command::Simulate { mode, seed } => {
            let mode = mode.unwrap_or(cfg.delivery.mode);
            let seed = seed.unwrap_or(cfg.seed);
            cmd_sim::simulate(&cfg, mode, seed, out)
        }
        Command::Sweep { modes, seeds, jobs } => {
            if let Some(m) = modes {
                cfg.modes = m;
            }
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            cmd_sim::sweep(&cfg, out)
        }
        Command::KgBuild => cmd_ckat::kg_build(&cfg, out),
        Command::Train {
            seed,
            epochs,
            no_attention,
        } => {
            if let Some(s) = seed {
                cfg.train.seed = s;
                cfg.seed = s;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if no_attention {
                cfg.train.attention = false;
            }
            cmd_ckat::train_cmd(&cfg, out)
        }
        Command::Recommend { model, user, k } => {
            let model = cmd_ckat::model_path(&model, out)?;
            cmd_ckat::recommend(&model, &user, k, out)
        }
        Command::Eval { model, k } => {
            let model = cmd_ckat::model_path(&model, out)?;
            cmd_ckat::eval_cmd(&model, k, out)
        }
        Command::Combos { noise } => {
            if let Some(n) = noise {
                cfg.noise_triples = n;
            }
            cmd_ckat::combos(&cfg, out)
        }
        Command::Report { metrics } => {
            let metrics = metrics.unwrap_or_else(|| out.join("metrics.csv"));
            cmd_workload::report(&metrics, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
