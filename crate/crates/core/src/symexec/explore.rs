use crate::constraint::{find_model, Formula, StringDomain};

use super::ast::Program;
use super::interp::{run_symbolic, Brancher, CostModel, ExecError};
use super::PathResult;

/// Default cap on the number of explored paths.
pub const DEFAULT_PATH_LIMIT: usize = 200_000;

type Model = (Vec<char>, Vec<char>);

/// Enumerates every feasible path of `p` with its constraint and cost.
///
/// Depth-first by re-execution: each run replays a recorded prefix of branch
/// decisions and then explores new branches true-first, pushing the feasible
/// alternative together with a model that witnesses it. Results come back
/// sorted by decision sequence (true before false).
pub fn sym_exec(
    p: &Program,
    domain: &StringDomain,
    cm: &CostModel,
) -> Result<Vec<PathResult>, ExecError> {
    sym_exec_with_limit(p, domain, cm, DEFAULT_PATH_LIMIT)
}

pub fn sym_exec_with_limit(
    p: &Program,
    domain: &StringDomain,
    cm: &CostModel,
    limit: usize,
) -> Result<Vec<PathResult>, ExecError> {
    let d = domain.with_lengths(p.len_high, p.len_low);
    let filler = d.alphabet()[0];
    let root: Model = (vec![filler; p.len_high], vec![filler; p.len_low]);
    let mut pending: Vec<(Vec<bool>, Model)> = vec![(Vec::new(), root)];
    let mut out = Vec::new();
    while let Some((prefix, witness)) = pending.pop() {
        if out.len() == limit {
            return Err(ExecError::PathLimit { limit });
        }
        let mut oracle = PathOracle {
            domain: &d,
            prefix,
            literals: Vec::new(),
            decisions: Vec::new(),
            witness,
            pending: &mut pending,
        };
        let run = run_symbolic(p, &d, cm, &mut oracle)?;
        out.push(PathResult {
            constraint: Formula::and(oracle.literals).simplify(),
            cost: run.cost,
            path: oracle.decisions,
        });
    }
    out.sort_by_key(|a| path_key(&a.path));
    Ok(out)
}

fn path_key(path: &[bool]) -> Vec<bool> {
    path.iter().map(|&d| !d).collect()
}

struct PathOracle<'a> {
    domain: &'a StringDomain,
    prefix: Vec<bool>,
    literals: Vec<Formula>,
    decisions: Vec<bool>,
    witness: Model,
    pending: &'a mut Vec<(Vec<bool>, Model)>,
}

impl Brancher for PathOracle<'_> {
    fn decide(&mut self, cond: &Formula) -> Result<bool, ExecError> {
        let k = self.decisions.len();
        let taken = if k < self.prefix.len() {
            self.prefix[k]
        } else {
            // The witness satisfies the path so far, so its side is feasible;
            // only the other side needs a solver call.
            let here = cond.eval(self.domain, &self.witness.0, &self.witness.1);
            let mut query = self.literals.clone();
            query.push(if here { cond.negate() } else { cond.clone() });
            let alt = find_model(&Formula::and(query), self.domain);
            let mut alternative = self.decisions.clone();
            alternative.push(false);
            match (here, alt) {
                (true, Some(m)) => {
                    self.pending.push((alternative, m));
                    true
                }
                (true, None) => true,
                (false, Some(m)) => {
                    let w = std::mem::replace(&mut self.witness, m);
                    self.pending.push((alternative, w));
                    true
                }
                (false, None) => false,
            }
        };
        self.literals
            .push(if taken { cond.clone() } else { cond.negate() });
        self.decisions.push(taken);
        Ok(taken)
    }
}
