use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use zk_core::cli::{execute, exit_status, plan, Experiment};
use zk_core::config::RunConfig;
use zk_core::ZkError;

/// Experiments on line solitary waves of the Zakharov-Kuznetsov equation.
#[derive(Parser, Debug)]
#[command(name = "zk-lab", version)]
struct Args {
    #[arg(value_enum)]
    experiment: Experiment,

    /// TOML run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for reports, tables and snapshots.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Validate the configuration and print the resolved plan only.
    #[arg(long)]
    dry_run: bool,

    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &Args) -> Result<RunConfig, ZkError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_toml(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<(), ZkError> {
    let cfg = load(args)?;
    if args.dry_run {
        println!("{}", plan(args.experiment, &cfg)?);
        return Ok(());
    }
    let art = execute(args.experiment, &cfg, &args.out)?;
    println!("{}", art.report.display());
    for f in &art.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zk-lab: {e}");
            ExitCode::from(exit_status(&e) as u8)
        }
    }
}
