use std::collections::HashMap;

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::automaton::{compile, count_intersection, ModelCount};
use crate::constraint::{Formula, Var};
use crate::symexec::ObservationConstraint;

use super::{AttackError, EntropyBits, KnowledgeState};

/// `#(C_h ∧ ψ_i[l ↦ l_val])` for every class, checked to sum to `#C_h`.
pub fn class_counts(
    ks: &KnowledgeState,
    psis: &[ObservationConstraint],
    l_val: &str,
) -> Result<Vec<ModelCount>, AttackError> {
    let domain = ks.domain();
    let len = domain.len(Var::High);
    let mut counts = Vec::with_capacity(psis.len());
    for psi in psis {
        let count = match psi.formula.substitute(Var::Low, l_val, domain)? {
            Formula::False => ModelCount::from(0),
            Formula::True => ks.count().clone(),
            f => count_intersection(ks.automaton().dfa(), &compile(&f, domain)?, len)?,
        };
        counts.push(count);
    }
    let found: BigUint = counts.iter().map(|c| c.value()).sum();
    if found != *ks.count().value() {
        return Err(AttackError::PartitionViolation {
            expected: ks.count().value().clone(),
            found,
        });
    }
    Ok(counts)
}

/// Expected entropy reduction from observing the program on `l_val`, with
/// every secret consistent with `C_h` equally likely.
pub fn mutual_info(
    ks: &KnowledgeState,
    psis: &[ObservationConstraint],
    l_val: &str,
) -> Result<EntropyBits, AttackError> {
    let total = ks.entropy()?.value();
    let m = ks.count().to_f64();
    let counts = class_counts(ks, psis, l_val)?;
    let conditional: f64 = counts
        .iter()
        .filter_map(|c| c.log2().map(|bits| c.to_f64() / m * bits))
        .sum();
    Ok(EntropyBits((total - conditional).max(0.0)))
}

/// Memoized [`mutual_info`] for one knowledge state.
pub struct Objective<'a> {
    ks: &'a KnowledgeState,
    psis: &'a [ObservationConstraint],
    cache: HashMap<String, f64>,
}

impl<'a> Objective<'a> {
    pub fn new(ks: &'a KnowledgeState, psis: &'a [ObservationConstraint]) -> Self {
        Objective {
            ks,
            psis,
            cache: HashMap::new(),
        }
    }

    pub fn knowledge(&self) -> &KnowledgeState {
        self.ks
    }

    pub fn eval(&mut self, l: &str) -> Result<f64, AttackError> {
        if let Some(&v) = self.cache.get(l) {
            return Ok(v);
        }
        let v = mutual_info(self.ks, self.psis, l)?.value();
        self.cache.insert(l.to_string(), v);
        Ok(v)
    }

    /// Evaluates a batch in parallel; results are in input order.
    pub fn eval_all(&mut self, ls: &[String]) -> Result<Vec<f64>, AttackError> {
        let mut fresh: Vec<&String> = ls.iter().filter(|l| !self.cache.contains_key(*l)).collect();
        fresh.sort();
        fresh.dedup();
        let (ks, psis) = (self.ks, self.psis);
        let values: Vec<(String, f64)> = fresh
            .into_par_iter()
            .map(|l| Ok((l.clone(), mutual_info(ks, psis, l)?.value())))
            .collect::<Result<_, AttackError>>()?;
        self.cache.extend(values);
        Ok(ls.iter().map(|l| self.cache[l]).collect())
    }

    /// Number of distinct inputs evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.cache.len()
    }
}
