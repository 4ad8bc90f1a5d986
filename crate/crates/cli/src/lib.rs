//! Batch front end: reads a game, operator or vector pair from JSON, runs one
//! analysis pipeline and produces a JSON report plus a short text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use conefix::cone_metrics::{self, slice};
use conefix::games::{self, EigenOptions, GameGraph};
use conefix::semidiff::{self, MinMaxAffineOp};
use conefix::spectral::{self, NormKind, SamplePlan};
use conefix::{ConeVector, Execution, Normalizer};

pub const SCHEMA_VERSION: &str = "1";
pub const SEED_ENV: &str = "CONEFIX_SEED";

/// Exit status for a finished run whose fixed-point iteration did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INPUT_ERROR: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    Average,
    Coordinate(usize),
}

impl FromStr for Psi {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "avg" {
            return Ok(Psi::Average);
        }
        s.strip_prefix("coord:")
            .and_then(|i| i.parse().ok())
            .map(Psi::Coordinate)
            .ok_or_else(|| format!("expected `avg` or `coord:<index>`, got `{s}`"))
    }
}

impl Psi {
    fn normalizer(self, n: usize) -> Result<Normalizer> {
        Ok(match self {
            Psi::Average => Normalizer::uniform(n)?,
            Psi::Coordinate(i) => Normalizer::coordinate(n, i)?,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "conefix", version, about = "Fixed points, metrics and spectral bounds for maps on cones")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    Solve,
    Certify,
    Rate,
    Metric,
    Semidiff,
    Spectral,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Additive eigenpair of a game's Shapley operator.
    Solve(Flags),
    /// `solve`, then certify uniqueness of the bias vector.
    Certify(Flags),
    /// `certify`, then measure convergence rates from random starts.
    Rate(Flags),
    /// Metrics between two vectors: {"x": [..], "y": [..], "u": [..]?}.
    Metric(Flags),
    /// Semidifferential: {"operator": .., "v": [..], "x": [..]?}.
    Semidiff(Flags),
    /// Bonsall bounds: {"operator": .., "norm": ..?, "target": ..?}.
    Spectral(Flags),
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    #[arg(long)]
    pub input: PathBuf,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Number of operator powers used for spectral bounds.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = spectral::DEFAULT_SEED)]
    pub seed: u64,
    /// `avg` or `coord:<index>` (0-based).
    #[arg(long, default_value = "avg")]
    pub psi: Psi,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Random starts for `rate`.
    #[arg(long, default_value_t = 100)]
    pub starts: usize,
    /// Iteration depth for `rate`.
    #[arg(long, default_value_t = 40)]
    pub steps: usize,
    /// Print a plain-text summary on stderr.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub tol: f64,
    pub max_iter: usize,
    pub depth: usize,
    pub seed: u64,
    pub psi: Psi,
    pub theta: f64,
    pub starts: usize,
    pub steps: usize,
    pub summary: bool,
}

impl RunConfig {
    /// `env_seed` is the value of [`SEED_ENV`], which takes precedence over
    /// `--seed`.
    pub fn from_cli(cli: Cli, env_seed: Option<&str>) -> Result<Self> {
        let (command, f) = match cli.command {
            Command::Solve(f) => (CommandKind::Solve, f),
            Command::Certify(f) => (CommandKind::Certify, f),
            Command::Rate(f) => (CommandKind::Rate, f),
            Command::Metric(f) => (CommandKind::Metric, f),
            Command::Semidiff(f) => (CommandKind::Semidiff, f),
            Command::Spectral(f) => (CommandKind::Spectral, f),
        };
        let seed = match env_seed {
            Some(s) => s
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}={s} is not an unsigned integer"))?,
            None => f.seed,
        };
        let config = RunConfig {
            command,
            input: f.input,
            output: f.output,
            tol: f.tol,
            max_iter: f.max_iter,
            depth: f.depth,
            seed,
            psi: f.psi,
            theta: f.theta,
            starts: f.starts,
            steps: f.steps,
            summary: f.summary,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("--tol must be positive, got {}", self.tol);
        }
        if self.depth == 0 {
            bail!("--depth must be at least 1");
        }
        if self.steps == 0 {
            bail!("--steps must be at least 1");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            bail!("--theta must lie in (0, 1], got {}", self.theta);
        }
        Ok(())
    }

    fn plan(&self) -> SamplePlan {
        SamplePlan::with_seed(self.seed)
    }
}

/// A finished run. Input errors are returned as `Err` instead.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
    pub summary: String,
}

impl Outcome {
    /// Pretty JSON with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report is serializable");
        s.push('\n');
        s
    }
}

/// Deserializes `text`, naming the offending path on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("invalid input at `{path}`: {}", e.into_inner())
    })
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let text = fs::read_to_string(&config.input)
        .with_context(|| format!("cannot read {}", config.input.display()))?;
    let (exit_code, body, summary) = match config.command {
        CommandKind::Solve | CommandKind::Certify | CommandKind::Rate => game_pipeline(config, &text)?,
        CommandKind::Metric => metric(&text)?,
        CommandKind::Semidiff => semidiff_report(&text)?,
        CommandKind::Spectral => spectral_report(config, &text)?,
    };
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command_name(config.command),
    });
    merge(&mut report, body);
    Ok(Outcome {
        exit_code,
        report,
        summary,
    })
}

fn command_name(c: CommandKind) -> &'static str {
    match c {
        CommandKind::Solve => "solve",
        CommandKind::Certify => "certify",
        CommandKind::Rate => "rate",
        CommandKind::Metric => "metric",
        CommandKind::Semidiff => "semidiff",
        CommandKind::Spectral => "spectral",
    }
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

type Body = (i32, Value, String);

fn game_pipeline(config: &RunConfig, text: &str) -> Result<Body> {
    let graph: GameGraph = parse_json(text)?;
    let f = games::shapley_operator(&graph);
    let psi = config.psi.normalizer(graph.n())?;
    let opts = EigenOptions {
        theta: config.theta,
        tol: config.tol,
        max_iter: config.max_iter,
    };
    let mut eigen = games::solve_additive_eigenpair(&f, &psi, &opts)?;
    let strongly_connected = graph.is_strongly_connected();
    let mut summary = String::new();
    let mut body = json!({
        "graph": { "n": graph.n(), "arcs": graph.arcs().len(), "strongly_connected": strongly_connected },
    });
    if !eigen.converged {
        writeln!(
            summary,
            "not converged after {} iterations, residual {:.3e}",
            eigen.iterations, eigen.residual
        )?;
        if !strongly_connected {
            writeln!(summary, "the graph is not strongly connected; an eigenpair may not exist")?;
        }
        merge(&mut body, json!({ "converged": false, "residual": eigen.residual, "iterations": eigen.iterations, "eigen": eigen }));
        return Ok((EXIT_NOT_CONVERGED, body, summary));
    }
    writeln!(summary, "mu = {}", eigen.mu)?;
    writeln!(summary, "u = {:?}", eigen.u.as_slice())?;
    writeln!(summary, "residual {:.3e} after {} iterations", eigen.residual, eigen.iterations)?;
    let strategies = games::strategy_sets(&graph, &eigen.active_sets);
    if config.command != CommandKind::Solve {
        eigen = games::certify_bias_uniqueness(&f, &eigen, config.depth, &config.plan())?;
        if let Some(c) = &eigen.uniqueness {
            writeln!(summary, "uniqueness: {}", serde_json::to_value(c)?["status"].as_str().unwrap_or("?"))?;
        }
        if let Some(b) = eigen.rate_bound {
            writeln!(summary, "rate bound {b}")?;
        }
    }
    merge(&mut body, json!({ "converged": true, "eigen": eigen, "strategies": strategies }));
    if config.command == CommandKind::Rate {
        let rep = games::convergence_report(&f, &eigen, config.starts, config.steps, config.seed, Execution::default())?;
        writeln!(summary, "max root rate {} over {} starts", rep.max_root_rate, rep.starts.len())?;
        merge(&mut body, json!({ "convergence": rep }));
    }
    Ok((0, body, summary))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricInput {
    x: ConeVector,
    y: ConeVector,
    u: Option<ConeVector>,
}

#[derive(Serialize)]
struct MetricReport {
    scale_upper: f64,
    scale_lower: f64,
    hilbert: f64,
    thompson: f64,
    local_norm: Option<f64>,
    oscillation: Option<f64>,
}

fn metric(text: &str) -> Result<Body> {
    let input: MetricInput = parse_json(text)?;
    let (x, y) = (&input.x, &input.y);
    let (local_norm, oscillation) = match &input.u {
        Some(u) => {
            let diff = ConeVector::new(slice::sub(x.as_slice(), y.as_slice()))?;
            (
                Some(cone_metrics::local_norm(&diff, u)?),
                Some(cone_metrics::oscillation(&diff, u)?),
            )
        }
        None => (None, None),
    };
    let r = MetricReport {
        scale_upper: cone_metrics::scale_upper(y, x)?,
        scale_lower: cone_metrics::scale_lower(y, x)?,
        hilbert: cone_metrics::hilbert_metric(x, y)?,
        thompson: cone_metrics::thompson_metric(x, y)?,
        local_norm,
        oscillation,
    };
    let summary = format!("d = {}, thompson = {}\n", r.hilbert, r.thompson);
    Ok((0, serde_json::to_value(r)?, summary))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SemidiffInput {
    operator: MinMaxAffineOp,
    v: ConeVector,
    x: Option<ConeVector>,
}

fn semidiff_report(text: &str) -> Result<Body> {
    let input: SemidiffInput = parse_json(text)?;
    let (derivative, active_sets) = semidiff::semidifferential(&input.operator, &input.v)?;
    let mut body = json!({
        "value": semidiff::evaluate(&input.operator, &input.v)?,
        "derivative": derivative,
        "active_sets": active_sets,
    });
    let mut summary = format!("semidifferential with {} nodes\n", derivative.size());
    if let Some(x) = &input.x {
        let image = derivative.apply(x.as_slice())?;
        let radius = semidiff::breakpoint_radius(&input.operator, input.v.as_slice(), x.as_slice(), semidiff::ACTIVE_REL_TOL)?;
        writeln!(summary, "derivative in direction x: {image:?}")?;
        merge(&mut body, json!({ "direction_image": image, "breakpoint_radius": finite_or_null(radius) }));
    }
    Ok((0, body, summary))
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectralInput {
    operator: MinMaxAffineOp,
    norm: Option<NormKind>,
    target: Option<f64>,
}

fn spectral_report(config: &RunConfig, text: &str) -> Result<Body> {
    let input: SpectralInput = parse_json(text)?;
    let n = input.operator.input_dim();
    let norm = match input.norm {
        Some(norm) => norm,
        None => NormKind::oscillation(n)?,
    };
    let plan = config.plan();
    let mut summary = String::new();
    let body = match input.target {
        Some(target) => {
            let (est, cert) = spectral::estimate_and_certify(&input.operator, &norm, target, config.depth, &plan)?;
            writeln!(summary, "bounds [{}, {}], exact: {}", est.lower, est.upper, est.exact)?;
            json!({ "estimate": est, "certificate": cert })
        }
        None => {
            let est = spectral::bonsall_estimate(&input.operator, config.depth, &norm, &plan)?;
            writeln!(summary, "bounds [{}, {}], exact: {}", est.lower, est.upper, est.exact)?;
            json!({ "estimate": est })
        }
    };
    Ok((0, body, summary))
}

/// Runs `config`, writes the report and returns the process exit code.
pub fn execute(config: &RunConfig) -> i32 {
    let outcome = match run(config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_INPUT_ERROR;
        }
    };
    let rendered = outcome.render();
    let written = match &config.output {
        Some(path) => fs::write(path, &rendered).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{rendered}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return EXIT_INPUT_ERROR;
    }
    if config.summary {
        eprint!("{}", outcome.summary);
    }
    outcome.exit_code
}
