use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use qtopo::config::RunConfig;
use qtopo::diagnostics::{gradcheck_all, verify_worked_example};
use qtopo::optimize::{sweep, train};
use qtopo::output::{write_run, write_sweep};

/// Overrides `output_dir` from the config file and `-s` flags.
const OUTPUT_DIR_ENV: &str = "QTOPO_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "qtopo", version, about = "Variational topology optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// `key = value` configuration file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a single key, e.g. `-s encoding=classical`
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one design and write its result files
    Run(ConfigArgs),
    /// Train independent seeds and summarize compliance and diversity
    Sweep {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(short, long, default_value_t = 10)]
        n_runs: usize,
    },
    /// Reproduce the worked two-qubit circuit example
    Verify,
    /// Compare every analytic gradient with finite differences
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path, &args.overrides)?,
        None => RunConfig::parse("", &args.overrides)?,
    };
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    Ok(cfg)
}

fn cmd_run(args: &ConfigArgs) -> Result<bool> {
    let cfg = load_config(args)?;
    let run = train(&cfg)?;
    write_run(&cfg.output_dir, &run)
        .with_context(|| format!("writing results to {}", cfg.output_dir.display()))?;
    println!(
        "final_compliance = {:.4}  final_volume = {:.4}  ({:.1} s) -> {}",
        run.final_compliance(),
        run.final_volume(),
        run.wallclock_s,
        cfg.output_dir.display()
    );
    Ok(true)
}

fn cmd_sweep(args: &ConfigArgs, n_runs: usize) -> Result<bool> {
    let cfg = load_config(args)?;
    let result = sweep(&cfg, n_runs)?;
    write_sweep(&cfg.output_dir, &result)
        .with_context(|| format!("writing results to {}", cfg.output_dir.display()))?;
    println!(
        "compliance at iteration {} = {:.4} +- {:.4}  diversity = {:.4} -> {}",
        result.checkpoint,
        result.compliance.mean,
        result.compliance.std,
        result.diversity,
        cfg.output_dir.display()
    );
    Ok(true)
}

fn cmd_verify() -> Result<bool> {
    let checks = verify_worked_example()?;
    println!("{:<18} {:>10} {:>10} {:>10}", "value", "computed", "expected", "diff");
    for c in &checks {
        println!(
            "{:<18} {:>10.4} {:>10.4} {:>10.2e}{}",
            c.name,
            c.computed,
            c.expected,
            (c.computed - c.expected).abs(),
            if c.passed() { "" } else { "  MISMATCH" }
        );
    }
    let bad: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    if !bad.is_empty() {
        eprintln!("mismatched values: {}", bad.join(", "));
    }
    Ok(bad.is_empty())
}

fn cmd_gradcheck(seed: u64) -> Result<bool> {
    let reports = gradcheck_all(seed)?;
    for r in &reports {
        println!(
            "{} {:<52} checked {:>5}  max error {:.3e} (tol {:.0e})",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.checked,
            r.max_error,
            r.tol
        );
    }
    Ok(reports.iter().all(|r| r.passed()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep { args, n_runs } => cmd_sweep(args, *n_runs),
        Command::Verify => cmd_verify(),
        Command::Gradcheck { seed } => cmd_gradcheck(*seed),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
