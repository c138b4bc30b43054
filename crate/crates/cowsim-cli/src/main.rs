//! Command-line front end: configuration ingestion, subcommand dispatch,
//! sweep execution, and CSV/JSON result emission.
//!
//! Exit codes: 0 on success, 1 for configuration or validation errors,
//! 2 for numeric failures (a non-finite intermediate).

mod commands;
mod config;
mod output;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use commands::{GridSpec, Scale};
use config::{load_file, resolve, Scenario, ScenarioFile};
use output::Table;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cowsim",
    about = "Expected metrics, Monte Carlo validation and feasibility analysis of \
             intercept-and-resend attacks on coherent-one-way QKD",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct IoArgs {
    /// Scenario configuration file (TOML or JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write results to this path instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    scale: Option<Scale>,
}

impl GridArgs {
    fn spec(&self, default: GridSpec) -> GridSpec {
        GridSpec {
            from: self.from.unwrap_or(default.from),
            to: self.to.unwrap_or(default.to),
            points: self.points.unwrap_or(default.points),
            scale: self.scale.unwrap_or(default.scale),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form metrics of the fully attacked system.
    Metrics {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Round-level simulation with closed-form comparison columns.
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        /// Number of rounds; defaults to `mc.rounds` from the config.
        #[arg(long)]
        rounds: Option<u64>,
        /// RNG seed; required here or as `mc.seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Closed-form metrics over a one-parameter grid.
    Sweep {
        #[command(flatten)]
        io: IoArgs,
        /// Dotted parameter path, e.g. eve.epsilon or protocol.mu.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Scale::Linear)]
        scale: Scale,
        /// Reference block cap for the relative-difference columns of an
        /// eve.m_max sweep.
        #[arg(long = "m-ref", default_value_t = 1_000_000)]
        m_ref: u64,
    },
    /// Intensity threshold and key-rate bound over a channel-transmittance grid.
    Feasibility {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Largest attackable round fraction and extracted key ratio over a
    /// parameter grid.
    Partial {
        #[command(flatten)]
        io: IoArgs,
        /// Dotted parameter path to scan (default eve.epsilon).
        #[arg(long, default_value = "eve.epsilon")]
        param: String,
        #[command(flatten)]
        grid: GridArgs,
    },
}

/// Marker for exit code 2.
#[derive(Debug)]
struct NumericFailure(String);

impl fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "numeric failure: {}", self.0)
    }
}

impl std::error::Error for NumericFailure {}

fn load(config: &Option<PathBuf>) -> Result<(ScenarioFile, Scenario)> {
    let file = match config {
        Some(path) => load_file(path)?,
        None => ScenarioFile::default(),
    };
    let scenario = resolve(&file).map_err(commands::violations_error)?;
    Ok((file, scenario))
}

fn emit(io: &IoArgs, command: &str, scenario: &Scenario, table: Table) -> Result<()> {
    table
        .check_numeric()
        .map_err(|e| anyhow!(NumericFailure(e.to_string())))?;
    let text = match io.format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&table.to_json(command, &scenario.echo()))?;
            s.push('\n');
            s
        }
    };
    match &io.output {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Metrics { io } => {
            let (_, scenario) = load(&io.config)?;
            emit(&io, "metrics", &scenario, commands::metrics_table(&scenario))
        }
        Command::Simulate { io, rounds, seed } => {
            let (_, scenario) = load(&io.config)?;
            let seed = seed
                .or(scenario.seed)
                .ok_or_else(|| anyhow!("simulate requires an explicit seed (--seed or mc.seed)"))?;
            let rounds = rounds.unwrap_or(scenario.rounds);
            if rounds == 0 {
                return Err(anyhow!("rounds must be >= 1"));
            }
            emit(
                &io,
                "simulate",
                &scenario,
                commands::simulate_table(&scenario, rounds, seed),
            )
        }
        Command::Sweep {
            io,
            param,
            from,
            to,
            points,
            scale,
            m_ref,
        } => {
            let (file, scenario) = load(&io.config)?;
            let grid = GridSpec {
                from,
                to,
                points,
                scale,
            };
            let table = commands::sweep_table(&file, &param, &grid, m_ref)?;
            emit(&io, "sweep", &scenario, table)
        }
        Command::Feasibility { io, grid } => {
            let (_, scenario) = load(&io.config)?;
            let grid = grid.spec(GridSpec {
                from: 1e-6,
                to: 10f64.powf(-0.6),
                points: 25,
                scale: Scale::Log,
            });
            let table = commands::feasibility_table(&scenario, &grid)?;
            emit(&io, "feasibility", &scenario, table)
        }
        Command::Partial { io, param, grid } => {
            let (file, scenario) = load(&io.config)?;
            let grid = grid.spec(GridSpec {
                from: 1e-4,
                to: 1e-2,
                points: 20,
                scale: Scale::Log,
            });
            let table = commands::partial_table(&file, &param, &grid)?;
            emit(&io, "partial", &scenario, table)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<NumericFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
