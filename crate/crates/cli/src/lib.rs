//! Run specifications, result documents and the subcommands behind the
//! `tmecor` binary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tmecor::cmb::{run_cmb_with, CmbConfig, CmbError, CmbResult, OracleKind, Timings};
use tmecor::game::{build_kuhn, build_leduc};
use tmecor::lp::{BuiltinBackend, MilpBackend};
use tmecor::verify::{certify, ExploitabilityReport, DEFAULT_CAP};
use tmecor::{Column, Game, Plan};

pub const RESULT_SCHEMA: &str = "tmecor-result-v1";
pub const BACKEND_ENV: &str = "TMECOR_SOLVER_BACKEND";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] tmecor::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn invalid(field: &'static str, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GameSpec {
    Kuhn { players: usize, ranks: usize },
    Leduc { players: usize, ranks: usize },
    File { path: PathBuf },
}

impl FromStr for GameSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(invalid("game", "file: needs a path"));
            }
            return Ok(Self::File { path: path.into() });
        }
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| invalid("game", format!("`{x}` is not a count in `{s}`")))
        };
        match parts.as_slice() {
            ["kuhn", n, r] => Ok(Self::Kuhn {
                players: num(n)?,
                ranks: num(r)?,
            }),
            ["leduc", n, r] => Ok(Self::Leduc {
                players: num(n)?,
                ranks: num(r)?,
            }),
            _ => Err(invalid(
                "game",
                format!("`{s}` (expected kuhn:N:R, leduc:N:R or file:PATH)"),
            )),
        }
    }
}

impl fmt::Display for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kuhn { players, ranks } => write!(f, "kuhn:{players}:{ranks}"),
            Self::Leduc { players, ranks } => write!(f, "leduc:{players}:{ranks}"),
            Self::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl GameSpec {
    pub fn build(&self) -> Result<Game, CliError> {
        Ok(match self {
            Self::Kuhn { players, ranks } => build_kuhn(*players, *ranks)?,
            Self::Leduc { players, ranks } => build_leduc(*players, *ranks)?,
            Self::File { path } => Game::from_json(&read(path)?)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "epsilon", rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    /// Absolute utility units.
    Epsilon(f64),
    /// Multiplied by the game's utility range.
    EpsilonNormalized(f64),
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let eps = |x: &str| -> Result<f64, CliError> {
            let v: f64 = x
                .parse()
                .map_err(|_| invalid("mode", format!("`{x}` is not a number")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid("mode", format!("epsilon must be finite and >= 0, got {x}")));
            }
            Ok(v)
        };
        match s.split_once(':') {
            None if s == "exact" => Ok(Self::Exact),
            Some(("epsilon", x)) => Ok(Self::Epsilon(eps(x)?)),
            Some(("epsilon-normalized", x)) => Ok(Self::EpsilonNormalized(eps(x)?)),
            _ => Err(invalid(
                "mode",
                format!("`{s}` (expected exact, epsilon:X or epsilon-normalized:X)"),
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => write!(f, "exact"),
            Self::Epsilon(e) => write!(f, "epsilon:{e}"),
            Self::EpsilonNormalized(e) => write!(f, "epsilon-normalized:{e}"),
        }
    }
}

impl Mode {
    /// Absolute epsilon for a game with utility range `delta_u`.
    pub fn absolute(&self, delta_u: f64) -> f64 {
        match *self {
            Self::Exact => 0.0,
            Self::Epsilon(e) => e,
            Self::EpsilonNormalized(e) => e * delta_u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_iterations: usize,
    pub milp_node_limit: usize,
    /// Seconds; checked between iterations.
    pub wall_clock: Option<f64>,
}

impl Default for Limits {
    fn default() -> Self {
        let cfg = CmbConfig::default();
        Self {
            max_iterations: cfg.max_iterations,
            milp_node_limit: cfg.node_limit,
            wall_clock: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub game: GameSpec,
    pub mode: Mode,
    pub oracle: OracleKind,
    /// Emit the associated constraints in the oracle.
    pub associated: bool,
    pub seed: u64,
    pub limits: Limits,
}

impl RunSpec {
    pub fn new(game: GameSpec) -> Self {
        Self {
            game,
            mode: Mode::Exact,
            oracle: OracleKind::Art,
            associated: true,
            seed: 0,
            limits: Limits::default(),
        }
    }

    pub fn config(&self, g: &Game) -> CmbConfig {
        CmbConfig {
            epsilon: self.mode.absolute(g.utility_range()),
            max_iterations: self.limits.max_iterations,
            oracle: self.oracle,
            associated_constraints: self.associated,
            time_limit: self.limits.wall_clock.map(Duration::from_secs_f64),
            node_limit: self.limits.milp_node_limit,
            ..CmbConfig::default()
        }
    }
}

/// The backend named by `TMECOR_SOLVER_BACKEND`; only `builtin` ships.
pub fn backend_from_env() -> Result<Box<dyn MilpBackend<f64>>, CliError> {
    backend_named(std::env::var(BACKEND_ENV).ok().as_deref())
}

pub fn backend_named(name: Option<&str>) -> Result<Box<dyn MilpBackend<f64>>, CliError> {
    match name {
        None | Some("") | Some("builtin") => Ok(Box::new(BuiltinBackend)),
        Some(other) => Err(invalid(
            "TMECOR_SOLVER_BACKEND",
            format!("unknown backend `{other}` (available: builtin)"),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    DidNotConverge,
    TimeLimit,
    NumericalStall,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Converged => 0,
            Self::DidNotConverge | Self::TimeLimit => 2,
            Self::NumericalStall => 1,
        }
    }
}

/// Serialized solve output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema: String,
    pub spec: RunSpec,
    pub status: RunStatus,
    pub epsilon: f64,
    pub value: f64,
    pub upper_bound: f64,
    pub iterations: usize,
    pub support_size: usize,
    pub bound_trace: Vec<(f64, f64)>,
    pub max_duality_gap: f64,
    pub mixture: Vec<f64>,
    pub columns: Vec<Column>,
    pub adversary_plan: Plan,
    /// Wall-clock seconds; omitted unless requested so that output is
    /// reproducible byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl ResultDocument {
    fn new(spec: &RunSpec, epsilon: f64, status: RunStatus, r: CmbResult<f64>, timings: bool) -> Self {
        Self {
            schema: RESULT_SCHEMA.to_string(),
            spec: spec.clone(),
            status,
            epsilon,
            value: r.value,
            upper_bound: r.upper_bound,
            iterations: r.iterations,
            support_size: r.support_size,
            bound_trace: r.bound_trace,
            max_duality_gap: r.max_duality_gap,
            mixture: r.mixture,
            columns: r.columns,
            adversary_plan: r.adversary_plan,
            timings: timings.then_some(r.timings),
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.schema != RESULT_SCHEMA {
            return Err(invalid(
                "schema",
                format!("`{}` (expected {RESULT_SCHEMA})", doc.schema),
            ));
        }
        if doc.columns.len() != doc.mixture.len() {
            return Err(invalid(
                "mixture",
                format!("{} weights for {} columns", doc.mixture.len(), doc.columns.len()),
            ));
        }
        Ok(doc)
    }
}

/// Outcome of a solve: the document plus the timings it may omit.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub document: ResultDocument,
    pub timings: Timings,
    pub num_leaves: usize,
    pub num_sequences: usize,
}

/// Runs column generation for `spec`. Early stops are not errors: they come
/// back with a non-converged status and the partial result.
pub fn cmd_solve(
    spec: &RunSpec,
    backend: &dyn MilpBackend<f64>,
    with_timings: bool,
) -> Result<SolveOutput, CliError> {
    let g = spec.game.build()?;
    let cfg = spec.config(&g);
    let (status, result) = match run_cmb_with(&g, &cfg, backend) {
        Ok(r) => (RunStatus::Converged, r),
        Err(CmbError::DidNotConverge(p)) => (RunStatus::DidNotConverge, *p),
        Err(CmbError::TimeLimit(p)) => (RunStatus::TimeLimit, *p),
        Err(CmbError::NumericalStall { partial, .. }) => (RunStatus::NumericalStall, *partial),
        Err(CmbError::Solver(e)) => return Err(e.into()),
    };
    let timings = result.timings;
    Ok(SolveOutput {
        document: ResultDocument::new(spec, cfg.epsilon, status, result, with_timings),
        timings,
        num_leaves: g.num_leaves(),
        num_sequences: g.num_sequences(0),
    })
}

pub const BENCH_HEADER: [&str; 10] = [
    "game",
    "|L|",
    "|Σ_i|",
    "mode",
    "value",
    "iterations",
    "support",
    "oracle time",
    "master time",
    "total time",
];

/// One CSV row per spec, in the given order.
pub fn cmd_bench(
    specs: &[RunSpec],
    backend: &dyn MilpBackend<f64>,
    out: impl std::io::Write,
) -> Result<Vec<RunStatus>, CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_HEADER)?;
    let mut statuses = Vec::with_capacity(specs.len());
    for spec in specs {
        let run = cmd_solve(spec, backend, true)?;
        let d = &run.document;
        w.write_record([
            spec.game.to_string(),
            run.num_leaves.to_string(),
            run.num_sequences.to_string(),
            spec.mode.to_string(),
            d.value.to_string(),
            d.iterations.to_string(),
            d.support_size.to_string(),
            format!("{:.3}", run.timings.oracle),
            format!("{:.3}", run.timings.master),
            format!("{:.3}", run.timings.total),
        ])?;
        statuses.push(d.status);
    }
    w.flush().map_err(|e| CliError::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(statuses)
}

/// Exploitability of a stored result against its own game (or `game` when
/// given).
pub fn cmd_certify(
    doc: &ResultDocument,
    game: Option<&GameSpec>,
    cap: u128,
) -> Result<ExploitabilityReport, CliError> {
    let g = game.unwrap_or(&doc.spec.game).build()?;
    Ok(certify(&g, &doc.columns, &doc.mixture, &doc.adversary_plan, cap)?)
}

pub fn certify_default(doc: &ResultDocument) -> Result<ExploitabilityReport, CliError> {
    cmd_certify(doc, None, DEFAULT_CAP)
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn game_specs_parse_and_print() {
        for s in ["kuhn:3:4", "leduc:3:3", "file:games/a.json"] {
            assert_eq!(s.parse::<GameSpec>().unwrap().to_string(), s);
        }
        for bad in ["kuhn:3", "kuhn:x:4", "poker:3:4", "file:"] {
            let err = bad.parse::<GameSpec>().unwrap_err().to_string();
            assert!(err.contains("invalid game"), "{err}");
        }
    }

    #[test]
    fn modes_parse() {
        assert_eq!("exact".parse::<Mode>().unwrap(), Mode::Exact);
        assert_eq!("epsilon:0.5".parse::<Mode>().unwrap(), Mode::Epsilon(0.5));
        let m: Mode = "epsilon-normalized:0.1".parse().unwrap();
        assert!((m.absolute(6.0) - 0.6).abs() < 1e-15);
        assert!("epsilon:-1".parse::<Mode>().is_err());
        assert!("epsilon:nan".parse::<Mode>().is_err());
        assert!("approx".parse::<Mode>().is_err());
    }

    #[test]
    fn backend_selection() {
        assert!(backend_named(None).is_ok());
        assert!(backend_named(Some("builtin")).is_ok());
        let err = backend_named(Some("cplex")).err().unwrap().to_string();
        assert!(err.contains("TMECOR_SOLVER_BACKEND"));
    }

    #[test]
    fn empty_bench_is_header_only() {
        let mut out = Vec::new();
        cmd_bench(&[], &BuiltinBackend, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "game,|L|,|Σ_i|,mode,value,iterations,support,oracle time,master time,total time\n"
        );
    }
}
