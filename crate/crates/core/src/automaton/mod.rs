//! Deterministic finite automata over a fixed alphabet, used to count and
//! sample the models of single-variable formulas at a fixed length.

mod compile;
mod count;
mod dot;
mod knowledge;
mod project;

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::constraint::{ConstraintError, Var};

pub use compile::compile;
pub use count::{
    count_intersection, count_models, is_empty, sample_uniform, ModelCount, ModelSampler,
};
pub use knowledge::KnowledgeAutomaton;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("formula mentions both h and l; substitute one of them first")]
    TwoFreeVariables,
    #[error("formula mentions {0}, expected a formula over {1}")]
    WrongVariable(Var, Var),
    #[error("no string of length {length} is accepted")]
    EmptyLanguage { length: usize },
    #[error("automata over different alphabets")]
    AlphabetMismatch,
    #[error("malformed automaton: {0}")]
    Malformed(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

/// A complete DFA. Symbol `a` is the character `alphabet[a]`; the transition
/// table is row-major, `trans[state * k + a]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Vec<char>,
    start: u32,
    accepting: Vec<bool>,
    trans: Vec<u32>,
}

impl Dfa {
    pub fn from_parts(
        alphabet: Vec<char>,
        start: u32,
        accepting: Vec<bool>,
        trans: Vec<u32>,
    ) -> Result<Dfa, AutomatonError> {
        let n = accepting.len();
        let k = alphabet.len();
        if k == 0 {
            return Err(AutomatonError::Malformed("empty alphabet".into()));
        }
        if trans.len() != n * k {
            return Err(AutomatonError::Malformed(format!(
                "{} transitions for {n} states over {k} symbols",
                trans.len()
            )));
        }
        if start as usize >= n || trans.iter().any(|&t| t as usize >= n) {
            return Err(AutomatonError::Malformed("state out of range".into()));
        }
        Ok(Dfa {
            alphabet,
            start,
            accepting,
            trans,
        })
    }

    /// Accepts every string.
    pub fn universal(alphabet: &[char]) -> Dfa {
        Dfa::sink(alphabet, true)
    }

    /// Accepts nothing.
    pub fn empty(alphabet: &[char]) -> Dfa {
        Dfa::sink(alphabet, false)
    }

    fn sink(alphabet: &[char], accept: bool) -> Dfa {
        Dfa {
            alphabet: alphabet.to_vec(),
            start: 0,
            accepting: vec![accept],
            trans: vec![0; alphabet.len()],
        }
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn is_accepting(&self, state: u32) -> bool {
        self.accepting[state as usize]
    }

    #[inline]
    pub fn step(&self, state: u32, symbol: usize) -> u32 {
        self.trans[state as usize * self.alphabet.len() + symbol]
    }

    pub fn symbol(&self, c: char) -> Option<usize> {
        self.alphabet.iter().position(|&a| a == c)
    }

    /// Runs the automaton; characters outside the alphabet reject.
    pub fn accepts(&self, word: &[char]) -> bool {
        let mut s = self.start;
        for &c in word {
            match self.symbol(c) {
                Some(a) => s = self.step(s, a),
                None => return false,
            }
        }
        self.is_accepting(s)
    }

    pub fn accepts_str(&self, word: &str) -> bool {
        self.accepts(&word.chars().collect::<Vec<_>>())
    }

    pub fn complement(&self) -> Dfa {
        Dfa {
            accepting: self.accepting.iter().map(|a| !a).collect(),
            ..self.clone()
        }
    }

    pub fn intersect(&self, other: &Dfa) -> Result<Dfa, AutomatonError> {
        Ok(self.product(other, |a, b| a && b)?.minimize())
    }

    pub fn union(&self, other: &Dfa) -> Result<Dfa, AutomatonError> {
        Ok(self.product(other, |a, b| a || b)?.minimize())
    }

    /// Reachable part of the synchronous product, accepting by `op`.
    pub fn product(
        &self,
        other: &Dfa,
        op: impl Fn(bool, bool) -> bool,
    ) -> Result<Dfa, AutomatonError> {
        if self.alphabet != other.alphabet {
            return Err(AutomatonError::AlphabetMismatch);
        }
        let k = self.alphabet.len();
        let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut accepting = Vec::new();
        let mut trans = Vec::new();
        let first = (self.start, other.start);
        ids.insert(first, 0);
        queue.push_back(first);
        accepting.push(op(self.is_accepting(first.0), other.is_accepting(first.1)));
        while let Some((p, q)) = queue.pop_front() {
            for a in 0..k {
                let next = (self.step(p, a), other.step(q, a));
                let id = match ids.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = accepting.len() as u32;
                        ids.insert(next, id);
                        accepting.push(op(self.is_accepting(next.0), other.is_accepting(next.1)));
                        queue.push_back(next);
                        id
                    }
                };
                trans.push(id);
            }
        }
        Ok(Dfa {
            alphabet: self.alphabet.clone(),
            start: 0,
            accepting,
            trans,
        })
    }

    /// Minimal equivalent DFA with states numbered in breadth-first order
    /// from the start state, so equal languages give identical automata.
    pub fn minimize(&self) -> Dfa {
        let k = self.alphabet.len();
        let reach = self.renumber_bfs();
        let n = reach.num_states();

        // Moore partition refinement: split classes by the classes of successors.
        let mut class: Vec<u32> = reach.accepting.iter().map(|&a| a as u32).collect();
        let mut classes = class.iter().collect::<HashSet<_>>().len();
        loop {
            let mut ids: HashMap<Vec<u32>, u32> = HashMap::new();
            let mut next = Vec::with_capacity(n);
            for s in 0..n {
                let mut sig = Vec::with_capacity(k + 1);
                sig.push(class[s]);
                sig.extend((0..k).map(|a| class[reach.trans[s * k + a] as usize]));
                let fresh = ids.len() as u32;
                next.push(*ids.entry(sig).or_insert(fresh));
            }
            let refined = ids.len();
            class = next;
            if refined == classes {
                break;
            }
            classes = refined;
        }

        let mut accepting = vec![false; classes];
        let mut trans = vec![0u32; classes * k];
        for s in 0..n {
            let c = class[s] as usize;
            accepting[c] = reach.accepting[s];
            for a in 0..k {
                trans[c * k + a] = class[reach.trans[s * k + a] as usize];
            }
        }
        let quotient = Dfa {
            alphabet: self.alphabet.clone(),
            start: class[reach.start as usize],
            accepting,
            trans,
        };
        quotient.renumber_bfs()
    }

    // Keeps states reachable from the start, numbered in BFS order.
    fn renumber_bfs(&self) -> Dfa {
        let k = self.alphabet.len();
        let mut id = vec![u32::MAX; self.num_states()];
        let mut order = vec![self.start];
        id[self.start as usize] = 0;
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            for a in 0..k {
                let t = self.step(s, a);
                if id[t as usize] == u32::MAX {
                    id[t as usize] = order.len() as u32;
                    order.push(t);
                }
            }
            i += 1;
        }
        let accepting = order.iter().map(|&s| self.is_accepting(s)).collect();
        let mut trans = Vec::with_capacity(order.len() * k);
        for &s in &order {
            for a in 0..k {
                trans.push(id[self.step(s, a) as usize]);
            }
        }
        Dfa {
            alphabet: self.alphabet.clone(),
            start: 0,
            accepting,
            trans,
        }
    }
}
