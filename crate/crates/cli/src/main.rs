use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tmecor::cmb::OracleKind;
use tmecor::verify::DEFAULT_CAP;
use tmecor_cli::{
    backend_from_env, cmd_bench, cmd_certify, cmd_solve, read, write, CliError, GameSpec, Limits,
    Mode, ResultDocument, RunSpec, RunStatus,
};

#[derive(Parser)]
#[command(name = "tmecor", version, about = "Team-maxmin equilibria with coordination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Solution mode: exact, epsilon:X or epsilon-normalized:X.
    #[arg(long, default_value = "exact")]
    mode: String,
    /// Shorthand for --mode epsilon:X.
    #[arg(long, conflicts_with = "mode")]
    epsilon: Option<f64>,
    /// Best-response oracle: art or c18.
    #[arg(long, default_value = "art")]
    oracle: String,
    /// Drop the associated constraints from the oracle.
    #[arg(long)]
    no_associated: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    node_limit: Option<usize>,
    /// Wall-clock limit in seconds, checked between iterations.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl RunArgs {
    fn spec(&self, game: GameSpec) -> Result<RunSpec, CliError> {
        let mode = match self.epsilon {
            Some(e) => format!("epsilon:{e}").parse()?,
            None => self.mode.parse::<Mode>()?,
        };
        let oracle = self.oracle.parse::<OracleKind>().map_err(|message| CliError::Invalid {
            field: "oracle",
            message,
        })?;
        let mut limits = Limits::default();
        if let Some(m) = self.max_iter {
            limits.max_iterations = m;
        }
        if let Some(n) = self.node_limit {
            limits.milp_node_limit = n;
        }
        limits.wall_clock = self.time_limit;
        Ok(RunSpec {
            game,
            mode,
            oracle,
            associated: !self.no_associated,
            seed: self.seed,
            limits,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one game and write the result.
    Solve {
        /// kuhn:N:R, leduc:N:R or file:PATH.
        #[arg(long)]
        game: String,
        #[command(flatten)]
        run: RunArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Include wall-clock timings in the JSON.
        #[arg(long)]
        timings: bool,
    },
    /// Solve several games and print one CSV row each.
    Bench {
        #[arg(long)]
        game: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the exploitability of a stored result.
    Certify {
        /// Result JSON written by `solve`.
        #[arg(long)]
        result: PathBuf,
        /// Game to certify against; defaults to the result's own game.
        #[arg(long)]
        game: Option<String>,
        /// Largest joint strategy count enumerated before falling back to
        /// the MILP oracle.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve {
            game,
            run,
            out,
            format,
            timings,
        } => {
            let spec = run.spec(game.parse()?)?;
            let backend = backend_from_env()?;
            match format {
                Format::Json => {
                    let res = cmd_solve(&spec, backend.as_ref(), timings)?;
                    emit(out.as_ref(), &res.document.to_json()?)?;
                    report_status(res.document.status);
                    Ok(res.document.status.exit_code())
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    let statuses = cmd_bench(&[spec], backend.as_ref(), &mut buf)?;
                    emit(out.as_ref(), &String::from_utf8_lossy(&buf))?;
                    report_status(statuses[0]);
                    Ok(statuses[0].exit_code())
                }
            }
        }
        Command::Bench { game, run, out } => {
            let specs = game
                .iter()
                .map(|g| run.spec(g.parse()?))
                .collect::<Result<Vec<_>, _>>()?;
            let backend = backend_from_env()?;
            let mut buf = Vec::new();
            let statuses = cmd_bench(&specs, backend.as_ref(), &mut buf)?;
            emit(out.as_ref(), &String::from_utf8_lossy(&buf))?;
            Ok(statuses.iter().map(|s| s.exit_code()).max().unwrap_or(0))
        }
        Command::Certify { result, game, cap } => {
            let doc = ResultDocument::from_json(&read(&result)?)?;
            let game = game.map(|g| g.parse::<GameSpec>()).transpose()?;
            let report = cmd_certify(&doc, game.as_ref(), cap)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
    }
}

fn report_status(status: RunStatus) {
    if status != RunStatus::Converged {
        eprintln!("tmecor: run stopped early ({status:?}); partial result written");
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("tmecor: {e}");
            ExitCode::from(1)
        }
    }
}
