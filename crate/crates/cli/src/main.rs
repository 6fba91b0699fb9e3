//! `wavekin <experiment> --config <path> [--out <dir>] [--threads N] [--seed S]`

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::Parser;

use config::Experiment;

#[derive(Parser, Debug)]
#[command(name = "wavekin", version, about = "Wave kinetic experiments on periodic lattices")]
struct Cli {
    experiment: Experiment,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; must not exist yet.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "WAVEKIN_OUT", default_value = "results")]
    out_root: PathBuf,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `ensemble.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("wavekin {}: error: {e:#}", cli.experiment.tag());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let loaded = config::load(&cli.config)?;
    let dir = cli.out.clone().unwrap_or_else(|| {
        let stem = cli.config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        cli.out_root.join(format!("{stem}-{}", cli.experiment.tag()))
    });
    output::check_fresh(&dir)?;
    let artifacts = experiments::run(cli.experiment, &loaded.config, cli.seed)?;
    let manifest = output::RunManifest {
        tool: "wavekin".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cli.experiment.tag().into(),
        config: serde_json::to_value(&loaded.echo)?,
        config_sha256: output::sha256(loaded.raw.as_bytes()),
        seed_override: cli.seed,
        threads: rayon::current_num_threads(),
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        files: Vec::new(),
        summary: artifacts.summary,
    };
    output::commit(&dir, artifacts.files, manifest)?;
    Ok(dir)
}
