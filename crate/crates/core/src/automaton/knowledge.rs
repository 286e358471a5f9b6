use crate::constraint::{Formula, StringDomain, Var};

use super::{compile, count_models, AutomatonError, Dfa, ModelCount};

/// Minimal automaton for the attacker's knowledge about `h`, with its count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeAutomaton {
    dfa: Dfa,
    count: ModelCount,
    length: usize,
}

impl KnowledgeAutomaton {
    /// No knowledge: every string of `h`'s length.
    pub fn full(domain: &StringDomain) -> Self {
        let dfa = Dfa::universal(domain.alphabet());
        KnowledgeAutomaton::from_dfa(dfa, domain.len(Var::High))
    }

    pub fn from_formula(f: &Formula, domain: &StringDomain) -> Result<Self, AutomatonError> {
        check_high_only(f)?;
        Ok(KnowledgeAutomaton::from_dfa(
            compile(f, domain)?,
            domain.len(Var::High),
        ))
    }

    fn from_dfa(dfa: Dfa, length: usize) -> Self {
        let count = count_models(&dfa, length);
        KnowledgeAutomaton { dfa, count, length }
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn count(&self) -> &ModelCount {
        &self.count
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn accepts(&self, h: &str) -> bool {
        h.chars().count() == self.length && self.dfa.accepts_str(h)
    }

    /// Knowledge after also learning `f`; `self` is left untouched.
    pub fn conjoin(&self, f: &Formula, domain: &StringDomain) -> Result<Self, AutomatonError> {
        check_high_only(f)?;
        let g = compile(f, domain)?;
        self.conjoin_dfa(&g)
    }

    pub fn conjoin_dfa(&self, g: &Dfa) -> Result<Self, AutomatonError> {
        Ok(KnowledgeAutomaton::from_dfa(
            self.dfa.intersect(g)?,
            self.length,
        ))
    }
}

fn check_high_only(f: &Formula) -> Result<(), AutomatonError> {
    if f.free_vars().contains(&Var::Low) {
        return Err(AutomatonError::WrongVariable(Var::Low, Var::High));
    }
    Ok(())
}
