use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fiatloan::model::{parse_rational, LoanParams, Price};
use fiatloan::scenario::{
    game_export, parse_scenario, run, simulate, thresholds, tx_matrix, Check, Format, Report, RunOptions, Scenario,
};

#[derive(Parser)]
#[command(name = "fiatloan", version, about = "Simulate and verify fiat loans backed by BTC collateral")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Report format: text, csv or json.
    #[arg(long, default_value = "text")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Settle the scenario's trace (or the prescribed play) and print the tables.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Run the scenario's checks; exits nonzero if any fails.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated checks overriding the scenario's list.
        #[arg(long, value_delimiter = ',')]
        check: Option<Vec<String>>,
        /// Adds a randomized price-path sweep to the observations check.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Print the liquidation and termination thresholds.
    Thresholds {
        #[arg(long, conflicts_with_all = ["p0", "epsilon"])]
        scenario: Option<PathBuf>,
        #[arg(long, requires = "epsilon")]
        p0: Option<String>,
        #[arg(long, requires = "p0")]
        epsilon: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Game tree utilities.
    Game {
        #[command(subcommand)]
        command: GameCommand,
    },
    /// Transaction-level views.
    Tx {
        #[command(subcommand)]
        command: TxCommand,
    },
}

#[derive(Subcommand)]
enum GameCommand {
    /// Write the scenario's game tree as Graphviz DOT.
    Export {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        dot: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Subcommand)]
enum TxCommand {
    /// Who can claim each collateral output, per time window and signature set.
    Matrix {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("in {}", path.display()))
}

fn emit(report: &Report, output: &Output) -> Result<()> {
    match &output.out {
        Some(path) => {
            let text = report.render(output.format, false);
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let color = std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal();
            let text = report.render(output.format, color);
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Ok(true) if some check failed.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { scenario, output } => {
            let sc = load(&scenario)?;
            emit(&simulate(&sc)?, &output)?;
            Ok(false)
        }
        Command::Verify { scenario, check, seed, output } => {
            let sc = load(&scenario)?;
            let checks = match check {
                Some(names) => Some(names.iter().map(|n| n.parse::<Check>()).collect::<Result<Vec<_>, _>>()?),
                None => None,
            };
            if checks.as_ref().map_or(sc.checks.is_empty(), |c| c.is_empty()) {
                bail!("no checks requested");
            }
            let report = run(&sc, &RunOptions { checks, seed })?;
            emit(&report, &output)?;
            Ok(report.failed())
        }
        Command::Thresholds { scenario, p0, epsilon, output } => {
            let (name, protocol, params) = match (scenario, p0, epsilon) {
                (Some(path), _, _) => {
                    let sc = load(&path)?;
                    (sc.name, sc.protocol.to_string(), sc.params)
                }
                (None, Some(p0), Some(eps)) => {
                    let p0 = Price::new(parse_rational(&p0)?)?;
                    let params = LoanParams::new(p0, parse_rational(&eps)?);
                    ("cli".to_string(), "-".to_string(), params)
                }
                _ => bail!("pass --scenario, or --p0 and --epsilon"),
            };
            let mut report = Report::new(&name, &protocol);
            report.tables.push(thresholds(&params)?);
            emit(&report, &output)?;
            Ok(false)
        }
        Command::Game { command: GameCommand::Export { scenario, dot, output } } => {
            let sc = load(&scenario)?;
            let (text, report) = game_export(&sc)?;
            std::fs::write(&dot, text).with_context(|| format!("writing {}", dot.display()))?;
            emit(&report, &output)?;
            Ok(false)
        }
        Command::Tx { command: TxCommand::Matrix { scenario, output } } => {
            let sc = load(&scenario)?;
            emit(&tx_matrix(&sc), &output)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
