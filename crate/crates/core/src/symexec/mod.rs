//! Target programs: parsing, cost-counting execution, path enumeration and
//! grouping of paths into observation classes.

mod ast;
mod explore;
mod interp;
mod parser;

use std::fmt::Write;

use thiserror::Error;

use crate::constraint::{parse_formula, Formula, ParseError, StringDomain};

pub use ast::{BinaryOp, Expr, ExprKind, NodeKind, Pos, Program, Stmt, UnaryOp};
pub use explore::{sym_exec, sym_exec_with_limit, DEFAULT_PATH_LIMIT};
pub use interp::{run_concrete, CharValue, CostModel, ExecError, Execution, Value};
pub use parser::{check_program, parse_program, ProgramError};

/// One feasible execution path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Conjunction of the branch conditions taken, over `h` and `l`.
    pub constraint: Formula,
    pub cost: u64,
    /// Branch decisions in execution order.
    pub path: Vec<bool>,
}

/// Paths that the attacker cannot tell apart, merged into one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationConstraint {
    /// Disjunction of the member path constraints.
    pub formula: Formula,
    /// Smallest member cost; the label of the class.
    pub observation: u64,
    pub members: usize,
    /// Distinct member costs, ascending.
    pub costs: Vec<u64>,
}

/// Groups paths whose costs lie within `delta` of the cheapest path of the
/// current group. `delta == 0` groups equal costs only.
pub fn merge_observations(paths: &[PathResult], delta: u64) -> Vec<ObservationConstraint> {
    let mut sorted: Vec<&PathResult> = paths.iter().collect();
    sorted.sort_by_key(|p| p.cost);
    let mut groups: Vec<Vec<&PathResult>> = Vec::new();
    for p in sorted {
        let joins = groups.last().is_some_and(|g| {
            let rep = g[0].cost;
            p.cost == rep || p.cost - rep < delta
        });
        if joins {
            groups.last_mut().unwrap().push(p);
        } else {
            groups.push(vec![p]);
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let mut costs: Vec<u64> = g.iter().map(|p| p.cost).collect();
            costs.dedup();
            ObservationConstraint {
                formula: Formula::or(g.iter().map(|p| p.constraint.clone()).collect()).simplify(),
                observation: costs[0],
                members: g.len(),
                costs,
            }
        })
        .collect()
}

/// Index of the class an observed cost belongs to.
pub fn class_of_cost(classes: &[ObservationConstraint], cost: u64) -> Option<usize> {
    classes
        .iter()
        .position(|c| c.costs.binary_search(&cost).is_ok())
        .or_else(|| {
            classes
                .iter()
                .position(|c| c.observation <= cost && cost <= *c.costs.last().unwrap())
        })
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("line {line}: {source}")]
    Formula { line: usize, source: ParseError },
    #[error("line {line}: {message}")]
    Metadata { line: usize, message: String },
}

/// Writes classes as one formula per line, each preceded by a comment with
/// its label, member count and member costs.
pub fn write_bundle(classes: &[ObservationConstraint], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "; {line}");
    }
    for (i, c) in classes.iter().enumerate() {
        let costs: Vec<String> = c.costs.iter().map(u64::to_string).collect();
        let _ = writeln!(
            out,
            "; class {i} cost {} members {} costs {}",
            c.observation,
            c.members,
            costs.join(",")
        );
        let _ = writeln!(out, "{}", c.formula);
    }
    out
}

/// Reads a bundle written by [`write_bundle`]. Formulas without a class
/// comment get their position as label.
pub fn read_bundle(
    text: &str,
    domain: &StringDomain,
) -> Result<Vec<ObservationConstraint>, BundleError> {
    let mut out = Vec::new();
    let mut meta: Option<(u64, usize, Vec<u64>)> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(comment) = t.strip_prefix(';') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            if words.first() == Some(&"class") {
                meta = Some(parse_meta(&words, line)?);
            }
            continue;
        }
        let formula =
            parse_formula(t, domain).map_err(|source| BundleError::Formula { line, source })?;
        let (observation, members, costs) = meta.take().unwrap_or_else(|| {
            let label = out.len() as u64;
            (label, 1, vec![label])
        });
        out.push(ObservationConstraint {
            formula,
            observation,
            members,
            costs,
        });
    }
    Ok(out)
}

fn parse_meta(words: &[&str], line: usize) -> Result<(u64, usize, Vec<u64>), BundleError> {
    let bad = |message: &str| BundleError::Metadata {
        line,
        message: message.into(),
    };
    let field = |key: &str| {
        words
            .iter()
            .position(|w| *w == key)
            .and_then(|i| words.get(i + 1))
            .copied()
            .ok_or_else(|| bad(&format!("missing `{key}`")))
    };
    let cost: u64 = field("cost")?.parse().map_err(|_| bad("bad cost"))?;
    let members: usize = field("members")?
        .parse()
        .map_err(|_| bad("bad member count"))?;
    let costs = match field("costs") {
        Ok(list) => list
            .split(',')
            .map(|c| c.parse().map_err(|_| bad("bad cost list")))
            .collect::<Result<Vec<u64>, _>>()?,
        Err(_) => vec![cost],
    };
    Ok((cost, members, costs))
}
