use std::path::PathBuf;
use std::process::ExitCode;

use boxdyn::scenario::{resolve_output_dir, run_scenario, ScenarioConfig, ScenarioKind};
use boxdyn::Error;
use clap::Parser;

/// Moving-wall infinite-well simulator.
///
/// Exit status: 0 success, 2 configuration error, 3 engine or tolerance
/// failure, 4 IO error.
#[derive(Debug, Parser)]
#[command(name = "boxdyn", version)]
struct Cli {
    /// strong-check, weak-scan, oracle-compare, theta-selftest or reversal.
    scenario: String,
    /// TOML scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output_dir, else out/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted key=value override applied before validation; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let kind: ScenarioKind = cli.scenario.parse()?;
    let cfg = ScenarioConfig::from_file(&cli.config, &cli.overrides)?;
    let dir = resolve_output_dir(kind, &cfg, cli.out.as_deref());
    let outcome = run_scenario(kind, &cfg, &dir)?;
    for c in &outcome.checks {
        println!("{c}");
    }
    println!("outputs written to {}", dir.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
