use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weingarten_cli::commands::{describe, sweep_exit_code};
use weingarten_cli::{
    cmd_check_assumptions, cmd_selftest, cmd_solve, cmd_sweep, cmd_verify_geometry, CliError,
    Config, ConfigError, RunStatus,
};

#[derive(Debug, Parser)]
#[command(
    name = "weingarten",
    version,
    about = "Prescribed Weingarten curvature solver for radial graphs"
)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Solve even when the assumption check fails.
    #[arg(long, global = true)]
    force: bool,

    /// Overrides monitor.alpha.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Overrides monitor.A.
    #[arg(long = "A", global = true)]
    big_a: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check assumptions, run the continuation, write report and fields.
    Solve,
    /// Evaluate the structural conditions on f and print the margins.
    CheckAssumptions,
    /// Compare the discrete geometry with independent oracles.
    VerifyGeometry,
    /// Run the seeded property suite.
    Selftest,
    /// Solve once per value of one config key.
    Sweep {
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

fn load(cli: &Cli) -> Result<Config, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or(ConfigError::Missing("--config"))?;
    let mut cfg = Config::load(path)?;
    if let Some(a) = cli.alpha {
        cfg.set("monitor.alpha", a.to_string())?;
    }
    if let Some(a) = cli.big_a {
        cfg.set("monitor.A", a.to_string())?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Selftest => {
            let rep = cmd_selftest();
            print!("{}", rep.render());
            Ok(if rep.passed() { 0 } else { 1 })
        }
        Command::CheckAssumptions => {
            let rep = cmd_check_assumptions(&load(cli)?)?;
            print!("{}", rep.margins_table());
            Ok(if rep.passed() {
                0
            } else {
                RunStatus::AssumptionFail.exit_code()
            })
        }
        Command::VerifyGeometry => {
            let rep = cmd_verify_geometry(&load(cli)?)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(if rep.passed { 0 } else { 1 })
        }
        Command::Solve => {
            let outcome = cmd_solve(&load(cli)?, &cli.out, cli.force)?;
            let rep = &outcome.report;
            if rep.status == RunStatus::AssumptionFail {
                eprintln!("assumption check failed (use --force to solve anyway)");
                eprint!("{}", rep.assumptions.margins_table());
            } else {
                if !rep.assumptions.passed() {
                    eprint!("{}", rep.assumptions.margins_table());
                }
                println!("{}", describe(&rep.continuation));
                if let Some(e) = &rep.error {
                    eprintln!("error: {e}");
                }
                if let (Some(t), Some(res)) = (rep.final_t, rep.final_residual) {
                    println!(
                        "final t = {t}, residual = {res:e}, Newton iterations = {}",
                        rep.total_newton_iterations
                    );
                }
            }
            println!("report: {}", cli.out.join("report.json").display());
            Ok(outcome.exit_code())
        }
        Command::Sweep { key, values } => {
            let rows = cmd_sweep(&load(cli)?, key, values, &cli.out, cli.force)?;
            for r in &rows {
                println!("{key} = {:<12} {:?}  {}", r.value, r.status, r.dir);
            }
            Ok(sweep_exit_code(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
