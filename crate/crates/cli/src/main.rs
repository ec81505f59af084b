use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_uav::check;
use irs_uav::config::{load_config, RunConfig, PRESETS};
use irs_uav::experiment::{self, Outcome};
use irs_uav::train::Scheme;
use irs_uav::Error;

/// Overrides the output directory unless `--out` is given.
const OUT_DIR_ENV: &str = "IRSUAV_OUT_DIR";

#[derive(Parser)]
#[command(name = "irs-uav", version, about = "Energy-efficiency experiments for IRS-assisted multi-UAV networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learning scheme (c-ddpg, p-ddpg, c-ppo, p-ppo).
    Train(RunArgs),
    /// Run the MPT and RSS baselines, or the one named by --scheme.
    Baseline(RunArgs),
    /// Train one scheme at every element count in `sweep_elements`.
    Sweep(RunArgs),
    /// Run the metric oracle, gradient checks and invariant suites.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; missing keys take the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a shipped preset instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Validation(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(s) = args.scheme {
        cfg.scheme = s;
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(e) = args.episodes {
        cfg.episodes = e;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    } else if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        cfg.out_dir = PathBuf::from(dir);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_outcome(cfg: &RunConfig, outcome: &Outcome) {
    for row in &outcome.summary {
        println!(
            "{:<7} K={:<3} final-{} EE {:.5} ± {:.5} bits/Hz/J over {} seed(s)",
            row.scheme.tag(),
            row.elements,
            experiment::FINAL_WINDOW,
            row.mean(),
            row.std(),
            row.seeds.len()
        );
    }
    println!("wrote {}", cfg.out_dir.display());
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(args) => {
            let cfg = resolve(&args)?;
            if cfg.scheme.is_baseline() {
                return Err(Failure::Validation(format!("{} is a baseline; use the baseline subcommand", cfg.scheme)));
            }
            let outcome = experiment::run(&cfg, &[cfg.scheme])?;
            print_outcome(&cfg, &outcome);
        }
        Command::Baseline(args) => {
            let cfg = resolve(&args)?;
            let schemes = match args.scheme {
                Some(s) if s.is_baseline() => vec![s],
                Some(s) => return Err(Failure::Validation(format!("{s} is not a baseline (expected mpt or rss)"))),
                None => vec![Scheme::Mpt, Scheme::Rss],
            };
            let outcome = experiment::run(&cfg, &schemes)?;
            print_outcome(&cfg, &outcome);
        }
        Command::Sweep(args) => {
            let cfg = resolve(&args)?;
            let outcome = experiment::sweep(&cfg, cfg.scheme)?;
            print_outcome(&cfg, &outcome);
        }
        Command::Check { seed } => {
            let reports = check::run_all(seed);
            let mut failed = 0;
            for r in &reports {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(Failure::Runtime(format!("{failed} of {} checks failed", reports.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code == 1 {
                eprintln!("presets: {}", PRESETS.join(", "));
            }
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
