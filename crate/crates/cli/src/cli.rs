//! Argument parsing and dispatch.

use std::path::PathBuf;

use anyhow::Context;
use clap::{ArgAction, Args, Parser, Subcommand};
use sidesynth_core::attack::{AttackError, HeuristicKind};
use sidesynth_core::constraint::{ConstraintError, ParseError};
use sidesynth_core::symexec::{BundleError, NodeKind, ProgramError};

use crate::commands;
use crate::config::{usage, RunConfig, SecretSpec, UsageError};

#[derive(Debug, Parser)]
#[command(
    name = "sidesynth",
    version,
    about = "Synthesizes adaptive side-channel attacks on string programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate paths and group them into observation classes.
    Analyze(CommonArgs),
    /// Attack one or more secrets and write traces.
    Attack(CommonArgs),
    /// Count the models of a formula.
    Count {
        /// File holding one formula; `;` lines are comments.
        file: PathBuf,
        /// Substitute this value for `l` before counting.
        #[arg(long)]
        low: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare the heuristics across the benchmark suite.
    Bench(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Load settings from a TOML file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the effective settings to a TOML file.
    #[arg(long)]
    pub save_config: Option<PathBuf>,
    #[arg(long, conflicts_with = "benchmark")]
    pub program: Option<PathBuf>,
    /// Benchmark id; `bench` takes a comma-separated list.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// `digits`, `lower`, or custom characters in order.
    #[arg(long)]
    pub alphabet: Option<String>,
    #[arg(long)]
    pub len_high: Option<usize>,
    #[arg(long)]
    pub len_low: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(HeuristicKindArg))]
    pub heuristic: Option<HeuristicKindArg>,
    #[arg(long, action = ArgAction::Set)]
    pub restricted: Option<bool>,
    #[arg(long)]
    pub delta: Option<u64>,
    /// Secret to attack; repeatable.
    #[arg(long, conflicts_with = "secrets")]
    pub secret: Vec<String>,
    /// `random:N` or a comma-separated list.
    #[arg(long)]
    pub secrets: Option<SecretSpec>,
    #[arg(long, env = "SIDESYNTH_SEED")]
    pub seed: Option<u64>,
    /// Step budget per attack.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Seconds per attack; 0 for no limit.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the final knowledge automaton (attack) or the formula's
    /// automaton (count) in DOT format.
    #[arg(long)]
    pub dump_dfa: Option<PathBuf>,
    /// Candidates per step (RA) or generations (GA).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub cooling: Option<f64>,
    #[arg(long)]
    pub pop_size: Option<usize>,
    #[arg(long)]
    pub offspring_size: Option<usize>,
    #[arg(long)]
    pub best_n: Option<usize>,
    #[arg(long)]
    pub stall_steps: Option<usize>,
    /// Record zero elapsed times so reruns produce identical files.
    #[arg(long)]
    pub no_timing: bool,
    /// Benchmarks for `bench` to skip, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub skip: Vec<String>,
    #[arg(long)]
    pub cost_base: Option<u64>,
    /// Cost weight for a node kind, e.g. `binary=2`; repeatable.
    #[arg(long, value_parser = parse_weight)]
    pub weight: Vec<(NodeKind, u64)>,
}

/// Heuristic name as accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicKindArg(pub HeuristicKind);

impl std::str::FromStr for HeuristicKindArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(HeuristicKindArg)
    }
}

fn parse_weight(s: &str) -> Result<(NodeKind, u64), String> {
    let (k, w) = s.split_once('=').ok_or("expected KIND=WEIGHT")?;
    let kind = NodeKind::from_name(k.trim()).ok_or_else(|| format!("unknown node kind {k:?}"))?;
    let w = w.trim().parse().map_err(|_| format!("bad weight {w:?}"))?;
    Ok((kind, w))
}

impl CommonArgs {
    /// The config file, if any, overridden by the flags that were given.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.program.is_some() {
            c.program = self.program.clone();
            c.benchmark = None;
        }
        if self.benchmark.is_some() {
            c.benchmark = self.benchmark.clone();
            c.program = None;
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { c.$field = v; })*
            };
        }
        macro_rules! take_option {
            ($($field:ident),*) => {
                $(if self.$field.is_some() { c.$field = self.$field.clone(); })*
            };
        }
        take!(restricted, delta, seed, steps, time_limit, samples, t0, t_min, cooling);
        take!(
            pop_size,
            offspring_size,
            best_n,
            stall_steps,
            cost_base,
            secrets
        );
        take_option!(alphabet, len_high, len_low, out, dump_dfa);
        if let Some(h) = self.heuristic {
            c.heuristic = h.0;
        }
        if !self.secret.is_empty() {
            c.secrets = SecretSpec::List(self.secret.clone());
        }
        c.no_timing |= self.no_timing;
        if !self.skip.is_empty() {
            c.skip = self.skip.clone();
        }
        c.weights.extend(self.weight.iter().copied());
        Ok(c)
    }
}

/// Runs a parsed command line and returns the text to print.
pub fn run(cli: &Cli) -> anyhow::Result<String> {
    let common = match &cli.command {
        Command::Analyze(c) | Command::Attack(c) | Command::Bench(c) => c,
        Command::Count { common, .. } => common,
    };
    let cfg = common.resolve()?;
    if let Some(path) = &common.save_config {
        cfg.save(path)?;
    }
    match &cli.command {
        Command::Analyze(_) => {
            let (analysis, written) = commands::analyze(&cfg)?;
            let mut out = analysis.render();
            if let Some(path) = written {
                out.push_str(&format!("wrote {}\n", path.display()));
            }
            Ok(out)
        }
        Command::Attack(_) => Ok(commands::attack(&cfg)?.render()),
        Command::Count { file, low, .. } => Ok(commands::count(&cfg, file, low.as_deref())
            .with_context(|| format!("counting {}", file.display()))?
            .render()),
        Command::Bench(_) => {
            if cfg.program.is_some() {
                return Err(usage("bench runs registered benchmarks only"));
            }
            Ok(commands::bench(&cfg)?.render())
        }
    }
}

/// Exit status for an error: 2 for bad usage or input that does not parse,
/// 3 when observations contradict the constraints, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<AttackError>() {
            match e {
                AttackError::Contradiction
                | AttackError::SecretInconsistent(_)
                | AttackError::PartitionViolation { .. } => return 3,
                AttackError::Config(_) => return 2,
                _ => {}
            }
        }
        if cause.is::<UsageError>()
            || cause.is::<ProgramError>()
            || cause.is::<ParseError>()
            || cause.is::<BundleError>()
            || cause.is::<ConstraintError>()
        {
            return 2;
        }
    }
    1
}
