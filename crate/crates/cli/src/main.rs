//! `thermospec`: batch runner for the thermodynamic-formalism estimators.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use thermospec::report::write_artifact;
use thermospec::suite::DEFAULT_SEED;

#[derive(Parser, Debug)]
#[command(name = "thermospec", version, about = "Entropy, pressure and intersection estimators on marked length spectra")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads for spectrum and estimator sums.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    threads: usize,
    /// Random seed; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// List conjugacy classes up to the word-length cap.
    Enumerate,
    /// Marked length spectrum and its plain-text cache.
    Spectrum,
    /// Topological entropy from orbit counts.
    Entropy,
    /// Pressure of a multiple of the length function.
    Pressure,
    /// Intersection and renormalized intersection of two representations.
    Intersection,
    /// Second difference of the renormalized intersection along a path.
    PressureForm,
    /// First variations of h * l along a path, with the pressure form.
    DegenerateTest,
    /// Eigenprojection trace limits for a pair of classes.
    Typk,
    /// The acceptance battery, run twice to check determinism.
    RigiditySuite,
}

fn run(cli: &Cli) -> Result<bool> {
    if cli.threads == 0 {
        anyhow::bail!("--threads must be at least 1");
    }
    let cfg = match &cli.config {
        Some(p) => Some(config::load(p)?),
        None => None,
    };
    let seed = cli
        .seed
        .or(cfg.as_ref().and_then(|c| c.seed))
        .unwrap_or(DEFAULT_SEED);
    let out_dir = cli
        .out
        .clone()
        .or(cfg.as_ref().and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));

    let artifacts = if cli.command == Command::RigiditySuite {
        // the battery manages its own pools
        commands::rigidity_suite(seed, cli.threads)?
    } else {
        let cfg = cfg.context("this subcommand needs --config PATH")?;
        let base_dir = cli
            .config
            .as_deref()
            .and_then(Path::parent)
            .unwrap_or(Path::new("."))
            .to_path_buf();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build()?;
        pool.install(|| match cli.command {
            Command::Enumerate => commands::enumerate(&cfg, seed),
            Command::Spectrum => commands::spectrum(&cfg, seed, &base_dir),
            Command::Entropy => commands::entropy_cmd(&cfg, seed, &base_dir),
            Command::Pressure => commands::pressure_cmd(&cfg, seed, &base_dir),
            Command::Intersection => commands::intersection_cmd(&cfg, seed, &base_dir),
            Command::PressureForm => commands::pressure_form_cmd(&cfg, seed, &base_dir),
            Command::DegenerateTest => commands::degenerate_cmd(&cfg, seed, &base_dir),
            Command::Typk => commands::typk_cmd(&cfg, seed, &base_dir),
            Command::RigiditySuite => unreachable!(),
        })?
    };

    for line in &artifacts.summary {
        println!("{line}");
    }
    for (name, contents) in &artifacts.files {
        let path = write_artifact(&out_dir, name, contents).with_context(|| format!("writing {name}"))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(artifacts.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
