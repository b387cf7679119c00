//! `flowfit`: data generation, training regimes, evaluation and audits
//! driven by TOML configs.

mod artifacts;
mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use flowfit::parallel::workers_from_env;

use artifacts::{RunDir, FAILURE_FILE, METRICS_FILE};
use commands::RunContext;

#[derive(Parser)]
#[command(name = "flowfit", version, about = "Flow-guided body regressor workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. `train.lambda_of=0.05`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Global seed; overrides the config's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Render a synthetic corpus with exact flow and labels.
    SynthGen,
    /// Supervised pre-training on a fraction of the labels.
    Pretrain,
    /// Refinement with labels and flow-supervised frame pairs.
    Refine,
    /// Label-free refinement anchored to the baseline's estimates.
    RefineUnsup,
    /// Direct optimization of one sequence's per-frame estimates.
    OptimizeSeq,
    /// Accuracy and smoothness of a checkpoint on a corpus.
    Eval,
    /// Motion from flow versus motion from body estimates.
    FlowAudit,
}

fn run(cli: &Cli) -> Result<()> {
    let config = config::load(cli.config.as_deref(), &cli.overrides, cli.seed, cli.out.as_deref())?;
    let out = config
        .out
        .clone()
        .context("no output directory: pass --out DIR or set `out` in the config")?;
    let template = commands::load_template(config.inputs.template.as_deref())?;
    let run = RunDir::prepare(&out, cli.force)?;
    run.write_provenance(&config)?;
    let ctx = RunContext {
        config: &config,
        run: &run,
        template,
        workers: workers_from_env(),
    };
    let result = match cli.command {
        Command::SynthGen => commands::synth_gen(&ctx),
        Command::Pretrain => commands::pretrain(&ctx),
        Command::Refine => commands::refine(&ctx),
        Command::RefineUnsup => commands::refine_unsup(&ctx),
        Command::OptimizeSeq => commands::optimize_seq(&ctx),
        Command::Eval => commands::eval(&ctx),
        Command::FlowAudit => commands::flow_audit(&ctx),
    };
    match result {
        Ok(metrics) => run.write(METRICS_FILE, metrics.to_text()),
        Err(e) => {
            run.write(FAILURE_FILE, format!("{e:#}\n"))?;
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
