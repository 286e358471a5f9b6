//! Run configuration shared by all commands, loadable from and savable to a
//! TOML file whose keys mirror the command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sidesynth_core::attack::{GaConfig, HeuristicConfig, HeuristicKind, SaConfig};
use sidesynth_core::constraint::{StringDomain, Var};
use sidesynth_core::symexec::{parse_program, CostModel, NodeKind, Program};
use thiserror::Error;

use crate::registry::{benchmark, Alphabet};

/// Bad flags or config values; reported with exit code 2.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Which secrets to attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SecretSpec {
    /// `random:N`
    Random(usize),
    /// Comma-separated explicit secrets.
    List(Vec<String>),
}

impl FromStr for SecretSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(n) = s.strip_prefix("random:") {
            return n
                .trim()
                .parse()
                .map(SecretSpec::Random)
                .map_err(|_| format!("bad secret count in {s:?}"));
        }
        let list: Vec<String> = s
            .split(',')
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        if list.is_empty() {
            return Err("no secrets given".into());
        }
        Ok(SecretSpec::List(list))
    }
}

impl TryFrom<String> for SecretSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<SecretSpec> for String {
    fn from(s: SecretSpec) -> String {
        s.to_string()
    }
}

impl fmt::Display for SecretSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SecretSpec::Random(n) => write!(f, "random:{n}"),
            SecretSpec::List(v) => f.write_str(&v.join(",")),
        }
    }
}

impl SecretSpec {
    /// Concrete secrets; random ones are drawn uniformly from `h`'s domain.
    pub fn resolve<R: Rng>(
        &self,
        domain: &StringDomain,
        rng: &mut R,
    ) -> anyhow::Result<Vec<String>> {
        match self {
            SecretSpec::Random(n) => {
                let a = domain.alphabet();
                Ok((0..*n)
                    .map(|_| {
                        (0..domain.len(Var::High))
                            .map(|_| a[rng.gen_range(0..a.len())])
                            .collect()
                    })
                    .collect())
            }
            SecretSpec::List(v) => {
                for s in v {
                    domain
                        .check_word(Var::High, s)
                        .map_err(|e| usage(format!("secret {s:?}: {e}")))?;
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    /// Benchmark id; for `bench`, a comma-separated selection.
    pub benchmark: Option<String>,
    pub program: Option<PathBuf>,
    /// `digits`, `lower`, or the characters of a custom alphabet in order.
    pub alphabet: Option<String>,
    pub len_high: Option<usize>,
    pub len_low: Option<usize>,
    pub heuristic: HeuristicKind,
    pub restricted: bool,
    /// Cost distance within which paths are indistinguishable.
    pub delta: u64,
    pub secrets: SecretSpec,
    pub seed: u64,
    pub steps: usize,
    /// Seconds per attack; 0 disables the limit.
    pub time_limit: f64,
    pub samples: usize,
    pub t0: f64,
    pub t_min: f64,
    pub cooling: f64,
    pub pop_size: usize,
    pub offspring_size: usize,
    pub best_n: usize,
    pub stall_steps: usize,
    /// Write 0 for elapsed times so reruns are byte-identical.
    pub no_timing: bool,
    /// Benchmarks `bench` leaves out.
    pub skip: Vec<String>,
    pub out: Option<PathBuf>,
    pub dump_dfa: Option<PathBuf>,
    pub cost_base: u64,
    /// Per-node cost weights; unlisted kinds weigh 1.
    pub weights: BTreeMap<NodeKind, u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = HeuristicConfig::default();
        RunConfig {
            benchmark: None,
            program: None,
            alphabet: None,
            len_high: None,
            len_low: None,
            heuristic: h.kind,
            restricted: h.restricted,
            delta: 0,
            secrets: SecretSpec::Random(5),
            seed: 0,
            steps: h.step_limit,
            time_limit: h.time_limit.unwrap_or(0.0),
            samples: h.samples,
            t0: h.sa.t0,
            t_min: h.sa.t_min,
            cooling: h.sa.cooling,
            pop_size: h.ga.pop_size,
            offspring_size: h.ga.offspring_size,
            best_n: h.ga.best_n,
            stall_steps: h.stall_steps,
            no_timing: false,
            skip: Vec::new(),
            out: None,
            dump_dfa: None,
            cost_base: 0,
            weights: BTreeMap::new(),
        }
    }
}

/// A program ready to analyse, with the domain it runs over.
#[derive(Debug, Clone)]
pub struct Subject {
    /// Benchmark id or program name.
    pub id: String,
    pub program: Program,
    pub domain: StringDomain,
    pub reference_counts: Option<(usize, usize)>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = toml::to_string(self).context("serializing config")?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn heuristic_config(&self) -> HeuristicConfig {
        HeuristicConfig {
            kind: self.heuristic,
            restricted: self.restricted,
            samples: self.samples,
            sa: SaConfig {
                t0: self.t0,
                t_min: self.t_min,
                cooling: self.cooling,
            },
            ga: GaConfig {
                pop_size: self.pop_size,
                offspring_size: self.offspring_size,
                best_n: self.best_n,
            },
            seed: self.seed,
            step_limit: self.steps,
            time_limit: (self.time_limit > 0.0).then_some(self.time_limit),
            stall_steps: self.stall_steps,
            neighbor_retries: HeuristicConfig::default().neighbor_retries,
            record_timing: !self.no_timing,
        }
    }

    pub fn cost_model(&self) -> CostModel {
        self.weights.iter().fold(
            CostModel::unit().with_base(self.cost_base),
            |cm, (&k, &w)| cm.with_weight(k, w),
        )
    }

    /// Domain from the alphabet and length flags, falling back to the
    /// given defaults.
    pub fn domain(
        &self,
        alphabet: Alphabet,
        len_high: usize,
        len_low: usize,
    ) -> anyhow::Result<StringDomain> {
        let (n, m) = (
            self.len_high.unwrap_or(len_high),
            self.len_low.unwrap_or(len_low),
        );
        match self.alphabet.as_deref() {
            None => Ok(alphabet.domain(n, m)),
            Some("digits") => Ok(Alphabet::Digits.domain(n, m)),
            Some("lower") => Ok(Alphabet::Lower.domain(n, m)),
            Some(custom) => {
                StringDomain::new(custom.chars(), n, m).map_err(|e| usage(format!("alphabet: {e}")))
            }
        }
    }

    /// The program named by `--benchmark` or `--program`.
    pub fn subject(&self) -> anyhow::Result<Subject> {
        match (&self.benchmark, &self.program) {
            (Some(_), Some(_)) => Err(usage("give either --benchmark or --program, not both")),
            (None, None) => Err(usage("no program: give --benchmark ID or --program FILE")),
            (Some(id), None) => {
                let entry =
                    benchmark(id).ok_or_else(|| usage(format!("unknown benchmark {id:?}")))?;
                self.subject_from(
                    entry.id,
                    entry.program()?,
                    entry.alphabet,
                    entry.reference_counts,
                )
            }
            (None, Some(path)) => {
                let src = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let p = parse_program(&src).with_context(|| format!("in {}", path.display()))?;
                let id = p.name.clone();
                self.subject_from(&id, p, Alphabet::Lower, None)
            }
        }
    }

    fn subject_from(
        &self,
        id: &str,
        program: Program,
        alphabet: Alphabet,
        reference_counts: Option<(usize, usize)>,
    ) -> anyhow::Result<Subject> {
        let domain = self.domain(alphabet, program.len_high, program.len_low)?;
        let (n, m) = (domain.len(Var::High), domain.len(Var::Low));
        let program = if (n, m) == (program.len_high, program.len_low) {
            program
        } else {
            program.with_lengths(n, m)?
        };
        let same_lengths = self.len_high.is_none() && self.len_low.is_none();
        Ok(Subject {
            id: id.to_string(),
            program,
            domain,
            reference_counts: reference_counts.filter(|_| same_lengths),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secret_specs() {
        assert_eq!("random:3".parse(), Ok(SecretSpec::Random(3)));
        assert_eq!(
            "abcd, efgh".parse(),
            Ok(SecretSpec::List(vec!["abcd".into(), "efgh".into()]))
        );
        assert!("random:x".parse::<SecretSpec>().is_err());
        assert!("".parse::<SecretSpec>().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig {
            benchmark: Some("PCI".into()),
            alphabet: Some("digits".into()),
            heuristic: HeuristicKind::Sa,
            secrets: SecretSpec::List(vec!["1337".into()]),
            seed: 42,
            ..Default::default()
        };
        cfg.weights.insert(NodeKind::Binary, 3);
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.contains("heuristic = \"sa\""));
        assert!(text.contains("time-limit = "));
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn subjects_from_benchmarks_and_overrides() {
        let cfg = RunConfig {
            benchmark: Some("pci".into()),
            alphabet: Some("digits".into()),
            ..Default::default()
        };
        let s = cfg.subject().unwrap();
        assert_eq!(s.domain.alphabet().len(), 10);
        assert_eq!(s.reference_counts, Some((5, 5)));
        let short = RunConfig {
            len_high: Some(3),
            len_low: Some(3),
            ..cfg
        };
        let s = short.subject().unwrap();
        assert_eq!((s.program.len_high, s.domain.len(Var::Low)), (3, 3));
        assert_eq!(s.reference_counts, None);
        assert!(RunConfig::default().subject().is_err());
    }

    #[test]
    fn explicit_secrets_are_checked() {
        let d = StringDomain::digits(4);
        let mut rng = rand::thread_rng();
        assert!(SecretSpec::List(vec!["12a4".into()])
            .resolve(&d, &mut rng)
            .is_err());
        let r = SecretSpec::Random(4).resolve(&d, &mut rng).unwrap();
        assert!(r.iter().all(|s| d.check_word(Var::High, s).is_ok()));
    }
}
