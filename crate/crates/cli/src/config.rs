use std::env;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, ValueEnum};
use flowerperc::Calculus;
use serde::Serialize;

/// Environment variable naming the directory that receives output files.
pub const OUTPUT_DIR_VAR: &str = "FLOWERPERC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Exact and finite-size percolation thresholds.
    Threshold,
    /// Critical exponents nu, beta, d_f and the hyperscaling residual.
    Exponents,
    /// Percolating strength over a sweep of link weights.
    Strength,
    /// Closed-form results for a very long arm.
    Asymptotics,
    /// Detour resilience factors of flowers or of an edge-list network.
    Detour,
    /// Path-length decomposition of a flower.
    Decompose,
    /// Two-terminal reduction of an edge-list network.
    Reduce,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Threshold => "threshold",
            Command::Exponents => "exponents",
            Command::Strength => "strength",
            Command::Asymptotics => "asymptotics",
            Command::Detour => "detour",
            Command::Decompose => "decompose",
            Command::Reduce => "reduce",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CalculusChoice {
    Classical,
    Quantum,
    Both,
}

impl CalculusChoice {
    pub fn calculi(self) -> Vec<Calculus> {
        match self {
            CalculusChoice::Classical => vec![Calculus::Classical],
            CalculusChoice::Quantum => vec![Calculus::Quantum],
            CalculusChoice::Both => vec![Calculus::Classical, Calculus::Quantum],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Inclusive integer range written `a:b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IntRange {
    pub start: u64,
    pub end: u64,
}

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
        let start = a.trim().parse().map_err(|e| format!("bad range start {a:?}: {e}"))?;
        let end = b.trim().parse().map_err(|e| format!("bad range end {b:?}: {e}"))?;
        if start > end {
            return Err(format!("range {s:?} is empty"));
        }
        Ok(Self { start, end })
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

/// Sweep `start:stop:step`, inclusive of `stop` within half a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 0.5).floor() as usize;
        // index-based so rounding does not accumulate
        (0..=count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts[..] else {
            return Err(format!("expected start:stop:step, got {s:?}"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}"));
        let (start, stop, step) = (num(a)?, num(b)?, num(c)?);
        if !start.is_finite() || !stop.is_finite() || step.is_nan() || step <= 0.0 || stop < start {
            return Err(format!("sweep {s:?} needs start <= stop and a positive step"));
        }
        Ok(Self { start, stop, step })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "flowerperc",
    version,
    about = "Classical and concurrence percolation on flowers and real networks"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,

    #[arg(long, value_enum, default_value = "both")]
    pub calculus: CalculusChoice,

    /// Flower arm lengths.
    #[arg(long, num_args = 2, value_names = ["U", "V"])]
    pub uv: Option<Vec<u64>>,

    /// Short arm length alone, for `asymptotics`.
    #[arg(long)]
    pub u: Option<u64>,

    /// Natural log of the long arm length.
    #[arg(long)]
    pub lnv: Option<f64>,

    /// Flower generation.
    #[arg(long, conflicts_with = "nrange")]
    pub n: Option<u32>,

    /// Range of generations `a:b`.
    #[arg(long)]
    pub nrange: Option<IntRange>,

    /// Crossing target.
    #[arg(long)]
    pub target: Option<f64>,

    /// Link-weight sweep `start:stop:step`.
    #[arg(long)]
    pub sweep: Option<Sweep>,

    /// Range of stretch factors `a:b`.
    #[arg(long)]
    pub q: Option<IntRange>,

    /// Edge-list file.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Terminal node ids for `reduce`.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub terminals: Option<Vec<u64>>,

    /// Link weight for `reduce`, in the units of the chosen calculus.
    #[arg(long)]
    pub weight: Option<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Hub pairs drawn by `detour --input`.
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,

    /// Detour samples per hub pair.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,

    /// Minimum hub degree.
    #[arg(long, default_value_t = 7)]
    pub min_degree: usize,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,

    /// Output file; relative paths are resolved against the output directory
    /// variable when it is set. Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Fully resolved run configuration, echoed into JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub calculus: CalculusChoice,
    pub u: u64,
    pub v: u64,
    pub ln_v: Option<f64>,
    pub n: Option<u32>,
    pub n_range: Option<IntRange>,
    pub target: Option<f64>,
    pub sweep: Option<Sweep>,
    pub q_range: Option<IntRange>,
    pub input: Option<PathBuf>,
    pub terminals: Option<(u64, u64)>,
    pub weight: Option<f64>,
    pub seed: u64,
    pub pairs: usize,
    pub samples: usize,
    pub min_degree: usize,
    pub format: Format,
    pub output: Option<PathBuf>,
}

fn check_target(t: f64) -> Result<f64> {
    ensure!(t > 0.0 && t < 1.0, "target must lie in (0, 1), got {t}");
    Ok(t)
}

impl RunConfig {
    /// Fills command-specific defaults and validates the combination.
    pub fn resolve(cli: Cli, output_dir: Option<PathBuf>) -> Result<Self> {
        let (mut u, v) = match cli.uv.as_deref() {
            Some(&[u, v]) => (u, v),
            Some(_) => bail!("--uv takes two values"),
            None => (2, 2),
        };
        if let Some(x) = cli.u {
            u = x;
        }
        let cmd = cli.command;
        let flower = !matches!(cmd, Command::Reduce) && !(cmd == Command::Detour && cli.input.is_some());
        // with --lnv the long arm is given by its log and V is unused
        let uses_v = !(cmd == Command::Asymptotics && cli.lnv.is_some());
        if flower {
            ensure!(
                u >= 1 && (v >= u || !uses_v),
                "flower needs 1 <= U <= V, got U = {u}, V = {v}"
            );
            if matches!(cmd, Command::Exponents | Command::Strength | Command::Asymptotics) {
                ensure!(u >= 2, "U = {u} is outside the domain U >= 2 of {}", cmd.name());
            }
        }
        let target = match (cmd, cli.target) {
            (_, Some(t)) => Some(check_target(t)?),
            (Command::Threshold, None) if cli.n.is_some() || cli.nrange.is_some() => Some(0.8),
            (Command::Exponents, None) => Some(0.8),
            (Command::Detour, None) => Some(flowerperc::detour::DEFAULT_TARGET),
            _ => None,
        };
        let n = match (cmd, cli.n) {
            (_, Some(n)) => Some(n),
            (Command::Strength, None) => Some(flowerperc::strength::ORDER_PARAMETER_N),
            (Command::Decompose, None) => Some(2),
            (Command::Detour, None) if cli.input.is_none() => Some(8),
            _ => None,
        };
        let n_range = match (cmd, cli.nrange) {
            (Command::Exponents, None) => Some(IntRange { start: 1, end: 13 }),
            (_, r) => r,
        };
        let ln_v = match (cmd, cli.lnv) {
            (_, Some(x)) => {
                ensure!(x > 0.0 && x.is_finite(), "--lnv must be positive, got {x}");
                Some(x)
            }
            (Command::Asymptotics, None) => Some((v as f64).ln()),
            _ => None,
        };
        let sweep = match (cmd, cli.sweep) {
            (Command::Strength, None) => Some(Sweep {
                start: 0.55,
                stop: 0.95,
                step: 0.01,
            }),
            (_, s) => s,
        };
        if let Some(s) = sweep {
            ensure!(s.start >= 0.0 && s.stop <= 1.0, "sweep must stay within [0, 1]");
        }
        let q_range = match (cmd, cli.q) {
            (Command::Detour, None) => Some(IntRange { start: 2, end: 8 }),
            (_, r) => r,
        };
        if let Some(q) = q_range {
            ensure!(q.start >= 1, "stretch factors start at 1");
        }
        let terminals = match cli.terminals.as_deref() {
            Some(&[a, b]) => Some((a, b)),
            Some(_) => bail!("--terminals takes two values"),
            None => None,
        };
        if cmd == Command::Reduce {
            ensure!(cli.input.is_some(), "reduce needs --input");
            ensure!(terminals.is_some(), "reduce needs --terminals A B");
            let w = cli.weight.context("reduce needs --weight")?;
            ensure!((0.0..=1.0).contains(&w), "--weight must lie in [0, 1], got {w}");
        }
        if let Some(path) = &cli.input {
            ensure!(path.is_file(), "input {} is not a readable file", path.display());
        }
        let output = match (cli.output, output_dir) {
            (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
            (Some(p), _) => Some(p),
            (None, Some(dir)) => Some(dir.join(format!("{}.{}", cmd.name(), cli.format.extension()))),
            (None, None) => None,
        };
        Ok(Self {
            command: cmd,
            calculus: cli.calculus,
            u,
            v,
            ln_v,
            n,
            n_range,
            target,
            sweep,
            q_range,
            input: cli.input,
            terminals,
            weight: cli.weight,
            seed: cli.seed,
            pairs: cli.pairs,
            samples: cli.samples,
            min_degree: cli.min_degree,
            format: cli.format,
            output,
        })
    }

    pub fn from_env(cli: Cli) -> Result<Self> {
        let dir = env::var_os(OUTPUT_DIR_VAR).filter(|d| !d.is_empty()).map(PathBuf::from);
        Self::resolve(cli, dir)
    }
}
