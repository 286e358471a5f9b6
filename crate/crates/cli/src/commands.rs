//! The four commands, as library functions returning printable reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sidesynth_core::attack::{
    run_attack, AttackTrace, HeuristicConfig, HeuristicKind, KnowledgeState, Summary, Target,
};
use sidesynth_core::automaton::{compile, count_models, ModelCount};
use sidesynth_core::constraint::{parse_formula, Formula, StringDomain, Var};
use sidesynth_core::symexec::{
    merge_observations, sym_exec, write_bundle, CostModel, ObservationConstraint,
};

use crate::config::{usage, RunConfig, Subject};
use crate::registry::{benchmark, suite, Alphabet};

/// A program's observation classes.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub subject: Subject,
    pub cost_model: CostModel,
    pub paths: usize,
    pub classes: Vec<ObservationConstraint>,
    pub elapsed: Duration,
}

impl Analysis {
    pub fn run(cfg: &RunConfig) -> anyhow::Result<Analysis> {
        let start = Instant::now();
        let subject = cfg.subject()?;
        let cost_model = cfg.cost_model();
        let paths = sym_exec(&subject.program, &subject.domain, &cost_model)
            .with_context(|| format!("exploring {}", subject.id))?;
        let classes = merge_observations(&paths, cfg.delta);
        Ok(Analysis {
            subject,
            cost_model,
            paths: paths.len(),
            classes,
            elapsed: start.elapsed(),
        })
    }

    pub fn target(&self) -> Target<'_> {
        Target {
            program: &self.subject.program,
            cost_model: &self.cost_model,
            classes: &self.classes,
            domain: &self.subject.domain,
        }
    }

    pub fn bundle(&self) -> String {
        let header = format!(
            "program {}\npaths {} classes {}",
            self.subject.program.name,
            self.paths,
            self.classes.len()
        );
        write_bundle(&self.classes, &header)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "program {} ({})",
            self.subject.program.name, self.subject.id
        );
        let _ = writeln!(out, "paths   {}", self.paths);
        let _ = writeln!(out, "classes {}", self.classes.len());
        if let Some((p, c)) = self.subject.reference_counts {
            let _ = writeln!(out, "reference counts {p}/{c}");
        }
        for (i, c) in self.classes.iter().enumerate() {
            let _ = writeln!(
                out,
                "  class {i}: cost {} ({} paths)",
                c.observation, c.members
            );
        }
        out
    }
}

/// `analyze`: writes the class bundle when an output directory is set.
pub fn analyze(cfg: &RunConfig) -> anyhow::Result<(Analysis, Option<PathBuf>)> {
    let analysis = Analysis::run(cfg)?;
    let written = match &cfg.out {
        Some(dir) => {
            let path = dir.join(format!("{}.constraints", analysis.subject.id));
            write_file(&path, &analysis.bundle())?;
            Some(path)
        }
        None => None,
    };
    Ok((analysis, written))
}

#[derive(Debug, Clone)]
pub struct AttackRun {
    pub secret: String,
    pub trace: AttackTrace,
    pub summary: Summary,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub benchmark: String,
    pub heuristic: HeuristicConfig,
    pub runs: Vec<AttackRun>,
}

impl AttackReport {
    pub fn mean_steps(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.trace.steps.len() as f64))
    }

    pub fn mean_h_final(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.trace.h_final))
    }

    pub fn mean_seconds(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.elapsed.as_secs_f64()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.runs.iter().enumerate() {
            let _ = writeln!(
                out,
                "secret {i} {:?}: {} steps, entropy {:.4} -> {:.4} bits, {}{}",
                r.secret,
                r.trace.steps.len(),
                r.trace.h_init,
                r.trace.h_final,
                r.trace.outcome,
                r.trace
                    .recovered
                    .as_ref()
                    .map(|s| format!(", recovered {s:?}"))
                    .unwrap_or_default()
            );
        }
        let _ = writeln!(
            out,
            "mean over {} secrets: {:.1} steps, final entropy {:.4} bits, {:.2} s",
            self.runs.len(),
            self.mean_steps(),
            self.mean_h_final(),
            self.mean_seconds()
        );
        out
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// The attack on secret `i` uses `seed + i`.
pub fn attack_secrets(
    analysis: &Analysis,
    secrets: &[String],
    heuristic: &HeuristicConfig,
) -> anyhow::Result<Vec<AttackRun>> {
    let target = analysis.target();
    let label = analysis.subject.id.clone();
    secrets
        .iter()
        .enumerate()
        .map(|(i, secret)| {
            let cfg = HeuristicConfig {
                seed: heuristic.seed.wrapping_add(i as u64),
                ..heuristic.clone()
            };
            let start = Instant::now();
            let trace = run_attack(
                &target,
                KnowledgeState::new(&analysis.subject.domain),
                secret,
                &cfg,
            )
            .with_context(|| format!("attacking secret {secret:?}"))?;
            Ok(AttackRun {
                secret: secret.clone(),
                summary: trace.summary(&label, &cfg),
                trace,
                elapsed: if cfg.record_timing {
                    start.elapsed()
                } else {
                    Duration::ZERO
                },
            })
        })
        .collect()
}

/// Secrets come from their own ChaCha stream: drawn from the same stream as
/// the attack on secret 0, an unrestricted attacker's first guess would be
/// the secret itself.
pub fn resolve_secrets(cfg: &RunConfig, domain: &StringDomain) -> anyhow::Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    cfg.secrets.resolve(domain, &mut rng)
}

/// `attack`: one trace CSV and JSON summary per secret under `--out`.
pub fn attack(cfg: &RunConfig) -> anyhow::Result<AttackReport> {
    let analysis = Analysis::run(cfg)?;
    let heuristic = cfg.heuristic_config();
    heuristic.validate().map_err(|e| usage(e.to_string()))?;
    let secrets = resolve_secrets(cfg, &analysis.subject.domain)?;
    let runs = attack_secrets(&analysis, &secrets, &heuristic)?;
    let id = analysis.subject.id.clone();
    if let Some(dir) = &cfg.out {
        let stem = format!(
            "{id}-{}{}",
            heuristic.kind,
            if heuristic.restricted { "" } else { "-nr" }
        );
        for (i, r) in runs.iter().enumerate() {
            write_file(&dir.join(format!("{stem}-{i}.csv")), &r.trace.to_csv())?;
            let json = serde_json::to_string_pretty(&r.summary)?;
            write_file(&dir.join(format!("{stem}-{i}.json")), &(json + "\n"))?;
        }
    }
    if let (Some(path), Some(last)) = (&cfg.dump_dfa, runs.last()) {
        write_file(path, &last.trace.knowledge.automaton().dfa().to_dot())?;
    }
    Ok(AttackReport {
        benchmark: id,
        heuristic,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub count: ModelCount,
    pub formula: Formula,
}

impl CountReport {
    pub fn render(&self) -> String {
        let bits = self
            .count
            .log2()
            .map(|b| format!("{b:.4}"))
            .unwrap_or_else(|| "-".into());
        format!("count {}\nentropy {bits} bits\n", self.count)
    }
}

/// `count`: exact model count of a formula over one variable. With `low`,
/// `l` is first replaced by that value.
pub fn count(cfg: &RunConfig, file: &Path, low: Option<&str>) -> anyhow::Result<CountReport> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let domain = match &cfg.benchmark {
        Some(id) => {
            let b = benchmark(id).ok_or_else(|| usage(format!("unknown benchmark {id:?}")))?;
            cfg.domain(b.alphabet, b.len_high, b.len_low)?
        }
        None => cfg.domain(Alphabet::Lower, 4, 4)?,
    };
    let src: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with(';'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut f =
        parse_formula(src.trim(), &domain).with_context(|| format!("in {}", file.display()))?;
    if let Some(l) = low {
        f = f
            .substitute(Var::Low, l, &domain)
            .map_err(|e| usage(format!("--low: {e}")))?;
    }
    let var = f.free_vars().into_iter().next().unwrap_or(Var::High);
    let dfa = compile(&f, &domain)?;
    if let Some(path) = &cfg.dump_dfa {
        write_file(path, &dfa.to_dot())?;
    }
    Ok(CountReport {
        count: count_models(&dfa, domain.len(var)),
        formula: f,
    })
}

/// One column group of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub label: &'static str,
    pub kind: HeuristicKind,
    pub restricted: bool,
}

pub const CELLS: [Cell; 5] = [
    Cell {
        label: "M",
        kind: HeuristicKind::M,
        restricted: true,
    },
    Cell {
        label: "RA-NR",
        kind: HeuristicKind::Ra,
        restricted: false,
    },
    Cell {
        label: "RA-R",
        kind: HeuristicKind::Ra,
        restricted: true,
    },
    Cell {
        label: "SA-R",
        kind: HeuristicKind::Sa,
        restricted: true,
    },
    Cell {
        label: "GA-R",
        kind: HeuristicKind::Ga,
        restricted: true,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Done {
        mean_seconds: f64,
        mean_steps: f64,
        mean_h_final: f64,
        complete: usize,
        runs: usize,
    },
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub id: String,
    pub h_init: Option<f64>,
    pub cells: Vec<(Cell, CellStatus)>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<6} {:>7}", "", "");
        for c in CELLS {
            let _ = write!(out, " | {:^24}", c.label);
        }
        let _ = write!(out, "\n{:<6} {:>7}", "bench", "H_init");
        for _ in CELLS {
            let _ = write!(out, " | {:>7} {:>7} {:>8}", "time s", "steps", "H_final");
        }
        out.push('\n');
        for row in &self.rows {
            let h = row
                .h_init
                .map(|h| format!("{h:.1}"))
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, "{:<6} {:>7}", row.id, h);
            for (_, status) in &row.cells {
                let _ = match status {
                    CellStatus::Done {
                        mean_seconds,
                        mean_steps,
                        mean_h_final,
                        ..
                    } => write!(
                        out,
                        " | {mean_seconds:>7.2} {mean_steps:>7.1} {mean_h_final:>8.1}"
                    ),
                    CellStatus::Skipped => write!(out, " | {:^24}", "skipped"),
                    CellStatus::Failed(_) => write!(out, " | {:^24}", "failed"),
                };
            }
            out.push('\n');
        }
        for row in &self.rows {
            for (cell, status) in &row.cells {
                if let CellStatus::Failed(msg) = status {
                    let _ = writeln!(out, "{} {}: {msg}", row.id, cell.label);
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "benchmark",
            "heuristic",
            "h_init_bits",
            "mean_seconds",
            "mean_steps",
            "mean_h_final_bits",
            "complete",
            "runs",
            "status",
        ])?;
        for row in &self.rows {
            let h = row.h_init.map(|h| format!("{h:.4}")).unwrap_or_default();
            for (cell, status) in &row.cells {
                let mut rec = vec![row.id.clone(), cell.label.to_string(), h.clone()];
                match status {
                    CellStatus::Done {
                        mean_seconds,
                        mean_steps,
                        mean_h_final,
                        complete,
                        runs,
                    } => rec.extend([
                        format!("{mean_seconds:.3}"),
                        format!("{mean_steps:.2}"),
                        format!("{mean_h_final:.4}"),
                        complete.to_string(),
                        runs.to_string(),
                        "ok".to_string(),
                    ]),
                    CellStatus::Skipped => {
                        rec.extend(["", "", "", "", "", "skipped"].map(String::from))
                    }
                    CellStatus::Failed(msg) => {
                        rec.extend(["", "", "", "", ""].map(String::from));
                        rec.push(format!("failed: {msg}"));
                    }
                }
                w.write_record(&rec)?;
            }
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// `bench`: every selected benchmark against each of [`CELLS`]. Cells run
/// in parallel; a failing cell is recorded and the rest carry on.
pub fn bench(cfg: &RunConfig) -> anyhow::Result<BenchReport> {
    let ids: Vec<String> = match &cfg.benchmark {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
        None => suite().map(|b| b.id.to_string()).collect(),
    };
    for id in ids.iter().chain(&cfg.skip) {
        if benchmark(id).is_none() {
            return Err(usage(format!("unknown benchmark {id:?}")));
        }
    }
    let heuristic = cfg.heuristic_config();
    heuristic.validate().map_err(|e| usage(e.to_string()))?;
    let skipped = |id: &str| cfg.skip.iter().any(|s| s.eq_ignore_ascii_case(id));

    let prepared: Vec<(String, Prepared)> = ids
        .par_iter()
        .map(|id| {
            let canonical = benchmark(id).expect("checked above").id.to_string();
            if skipped(&canonical) {
                return (canonical, Prepared::Skipped);
            }
            let one = RunConfig {
                benchmark: Some(canonical.clone()),
                program: None,
                ..cfg.clone()
            };
            let prepared = Analysis::run(&one).and_then(|a| {
                let secrets = resolve_secrets(&one, &a.subject.domain)?;
                Ok((a, secrets))
            });
            let prepared = match prepared {
                Ok((a, secrets)) => Prepared::Ready(Box::new(a), secrets),
                Err(e) => Prepared::Failed(format!("{e:#}")),
            };
            (canonical, prepared)
        })
        .collect();

    let jobs: Vec<(usize, Cell)> = (0..prepared.len())
        .flat_map(|r| CELLS.into_iter().map(move |c| (r, c)))
        .collect();
    let results: Vec<CellStatus> = jobs
        .par_iter()
        .map(|&(r, cell)| match &prepared[r].1 {
            Prepared::Skipped => CellStatus::Skipped,
            Prepared::Failed(msg) => CellStatus::Failed(msg.clone()),
            Prepared::Ready(analysis, secrets) => {
                let h = HeuristicConfig {
                    kind: cell.kind,
                    restricted: cell.restricted,
                    ..heuristic.clone()
                };
                match attack_secrets(analysis, secrets, &h) {
                    Ok(runs) => {
                        let report = AttackReport {
                            benchmark: prepared[r].0.clone(),
                            heuristic: h,
                            runs,
                        };
                        CellStatus::Done {
                            mean_seconds: report.mean_seconds(),
                            mean_steps: report.mean_steps(),
                            mean_h_final: report.mean_h_final(),
                            complete: report
                                .runs
                                .iter()
                                .filter(|r| r.trace.recovered.is_some())
                                .count(),
                            runs: report.runs.len(),
                        }
                    }
                    Err(e) => CellStatus::Failed(format!("{e:#}")),
                }
            }
        })
        .collect();

    let mut results = results.into_iter();
    let rows = prepared
        .iter()
        .map(|(id, prep)| BenchRow {
            id: id.clone(),
            h_init: match prep {
                Prepared::Ready(a, _) => KnowledgeState::new(&a.subject.domain)
                    .entropy()
                    .ok()
                    .map(|e| e.value()),
                _ => None,
            },
            cells: CELLS
                .into_iter()
                .map(|c| (c, results.next().expect("one result per job")))
                .collect(),
        })
        .collect();
    let report = BenchReport { rows };
    if let Some(dir) = &cfg.out {
        write_file(&dir.join("bench.csv"), &report.to_csv()?)?;
        write_file(&dir.join("bench.txt"), &report.render())?;
    }
    Ok(report)
}

enum Prepared {
    Skipped,
    Failed(String),
    Ready(Box<Analysis>, Vec<String>),
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
