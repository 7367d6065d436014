//! `lsvlab`: runs limit-theorem experiments for intermittent maps from a TOML config.
//!
//! Exit status is 0 when every configured threshold holds, 1 when some check
//! fails (each one listed on stderr) and 2 when the config is invalid or a
//! stage cannot complete.

mod config;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::ExperimentConfig;
use pipeline::{summary_path, Command, Format, Run};

#[derive(Debug, Parser)]
#[command(name = "lsvlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true, default_value = "lsvlab.toml")]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "LSVLAB_THREADS")]
    threads: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Sample files from an earlier `simulate`, used by `gof` instead of new orbits.
    #[arg(long, global = true, num_args = 1..)]
    samples: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.sampling.seed = seed;
    }
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out.clone());
    let stages = cli.command.stages();
    let stages: Vec<_> = match cli.command {
        // renewal is optional in a full run
        Command::Pipeline if cfg.renewal.is_none() => stages
            .iter()
            .copied()
            .filter(|&s| s != pipeline::Stage::Renewal)
            .collect(),
        _ => stages.to_vec(),
    };
    let summary = Run::new(&cfg, cli.command, cli.format, out.clone())
        .with_inputs(cli.samples)
        .execute(&stages)?;

    if cli.format == Format::Json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        eprintln!("summary written to {}", summary_path(&out).display());
    }
    if let Some(f) = &summary.failure {
        eprintln!("stage {} failed: {}", f.stage, f.message);
        return Ok(ExitCode::from(2));
    }
    let failed: Vec<_> = summary.failed_checks().collect();
    if failed.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for c in failed {
        eprintln!("check {} failed: {} > {}", c.name, c.value, c.bound);
    }
    Ok(ExitCode::from(1))
}
