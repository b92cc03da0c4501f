use std::path::PathBuf;
use std::process::ExitCode;

use astrorepair::cli::{run, Command};
use astrorepair::config::ExperimentConfig;
use clap::Parser;

/// Astrocyte-based self-repair experiments for neuromorphic hardware.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config; missing sections use the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit nonzero when an acceptance check fails.
    #[arg(long)]
    check: bool,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    svg: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let report = match run(args.command, &cfg, seed, args.svg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.write(&args.out) {
        eprintln!("error: writing {}: {e}", args.out.display());
        return ExitCode::from(2);
    }
    print!("{}", report.summary());
    if args.check && !report.passed() {
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!("check failed: {}", c.name);
        }
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
