use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::automaton::{compile, Dfa, KnowledgeAutomaton, ModelCount, ModelSampler};
use crate::constraint::{Atom, Formula, StringDomain, Var};
use crate::symexec::ObservationConstraint;

use super::AttackError;

/// Uncertainty in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EntropyBits(pub f64);

impl EntropyBits {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for EntropyBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// What the attacker knows about `h`: the accumulated constraint `C_h`, its
/// automaton, and the inputs tried so far.
#[derive(Debug, Clone)]
pub struct KnowledgeState {
    conjuncts: Vec<Formula>,
    ka: KnowledgeAutomaton,
    tried: Vec<String>,
    domain: StringDomain,
    // Words of l's length that have not been tried yet.
    untried: Dfa,
}

impl KnowledgeState {
    /// No knowledge: every string of `h`'s length is possible.
    pub fn new(domain: &StringDomain) -> Self {
        KnowledgeState {
            conjuncts: Vec::new(),
            ka: KnowledgeAutomaton::full(domain),
            tried: Vec::new(),
            domain: domain.clone(),
            untried: Dfa::universal(domain.alphabet()),
        }
    }

    /// Starts from prior knowledge `c_h` over `h`.
    pub fn with_constraint(c_h: Formula, domain: &StringDomain) -> Result<Self, AttackError> {
        let ka = KnowledgeAutomaton::from_formula(&c_h, domain)?;
        if ka.count().is_zero() {
            return Err(AttackError::Contradiction);
        }
        let mut ks = KnowledgeState::new(domain);
        ks.ka = ka;
        ks.conjuncts.push(c_h);
        Ok(ks)
    }

    /// `C_h` as one formula.
    pub fn constraint(&self) -> Formula {
        Formula::and(self.conjuncts.clone())
    }

    pub fn automaton(&self) -> &KnowledgeAutomaton {
        &self.ka
    }

    pub fn count(&self) -> &ModelCount {
        self.ka.count()
    }

    pub fn tried(&self) -> &[String] {
        &self.tried
    }

    pub fn domain(&self) -> &StringDomain {
        &self.domain
    }

    /// `log2 #C_h`.
    pub fn entropy(&self) -> Result<EntropyBits, AttackError> {
        self.count()
            .log2()
            .map(EntropyBits)
            .ok_or(AttackError::Contradiction)
    }

    /// Knowledge after observing class `psi` on input `l`.
    pub fn update(
        &self,
        psi: &ObservationConstraint,
        l: &str,
    ) -> Result<KnowledgeState, AttackError> {
        let learned = psi.formula.substitute(Var::Low, l, &self.domain)?;
        let ka = match learned {
            Formula::True => self.ka.clone(),
            _ => self.ka.conjoin(&learned, &self.domain)?,
        };
        if ka.count().is_zero() {
            return Err(AttackError::Contradiction);
        }
        let exclude = compile(
            &Atom::StrNeqConst(Var::Low, l.to_string()).into(),
            &self.domain,
        )?;
        let mut conjuncts = self.conjuncts.clone();
        if learned != Formula::True {
            conjuncts.push(learned);
        }
        let mut tried = self.tried.clone();
        tried.push(l.to_string());
        Ok(KnowledgeState {
            conjuncts,
            ka,
            tried,
            domain: self.domain.clone(),
            untried: self.untried.intersect(&exclude)?,
        })
    }

    pub fn is_consistent(&self, h: &str) -> bool {
        self.ka.accepts(h)
    }

    /// Automaton for `C_l`: `C_h` read over `l`, minus tried inputs. When the
    /// lengths differ there is no positional correspondence and only the
    /// tried inputs are excluded.
    pub fn low_automaton(&self) -> Result<Dfa, AttackError> {
        if self.domain.len(Var::High) == self.domain.len(Var::Low) {
            Ok(self.ka.dfa().intersect(&self.untried)?)
        } else {
            Ok(self.untried.clone())
        }
    }

    /// Whether `l` is a model of `C_l`.
    pub fn satisfies_low(&self, l: &str) -> bool {
        let n = self.domain.len(Var::Low);
        if l.chars().count() != n || !self.untried.accepts_str(l) {
            return false;
        }
        n != self.domain.len(Var::High) || self.ka.dfa().accepts_str(l)
    }

    /// The secret, once only one candidate remains.
    pub fn recovered(&self) -> Option<String> {
        if *self.count().value() != BigUint::from(1u8) {
            return None;
        }
        ModelSampler::new(self.ka.dfa().clone(), self.ka.length()).unrank(&BigUint::from(0u8))
    }

    /// Recompiles `C_h` from scratch and checks the automaton count agrees.
    pub fn check_compiled(&self) -> Result<bool, AttackError> {
        let fresh = KnowledgeAutomaton::from_formula(&self.constraint(), &self.domain)?;
        Ok(fresh.count() == self.count())
    }
}
