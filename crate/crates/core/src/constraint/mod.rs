//! String constraints over the secret `h` and the attacker input `l`.
//!
//! Both variables are fixed-length strings over a finite ordered alphabet.
//! A [`Formula`] is a boolean combination of [`Atom`]s; it is the common
//! currency between the symbolic executor (path constraints), the automaton
//! engine (model counting) and the attack loop (knowledge about `h`).

mod parse;
mod simplify;
mod solve;
mod subst;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_bundle, parse_formula, ParseError};
pub use solve::find_model;
pub use subst::project_to_low;
pub(crate) use subst::{lex_greater_than_const, lex_less_than_const};

/// The two string variables of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    /// The secret.
    High,
    /// The attacker-controlled input.
    Low,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::High => "h",
            Var::Low => "l",
        }
    }

    pub fn other(self) -> Var {
        match self {
            Var::High => Var::Low,
            Var::Low => Var::High,
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        match name {
            "h" => Some(Var::High),
            "l" => Some(Var::Low),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("alphabet lists {0:?} more than once")]
    DuplicateChar(char),
    #[error("character {0:?} is not in the alphabet")]
    CharNotInAlphabet(char),
    #[error("{var} has length {expected}, got a string of length {found}")]
    LengthMismatch {
        var: Var,
        expected: usize,
        found: usize,
    },
    #[error("index {index} is out of range for {var} (length {len})")]
    IndexOutOfRange { var: Var, index: usize, len: usize },
    #[error("literal {literal:?} does not fit {var} (length {len})")]
    LiteralLength {
        var: Var,
        literal: String,
        len: usize,
    },
    #[error("lexicographic comparison needs equal lengths (h: {high}, l: {low})")]
    LexLengthMismatch { high: usize, low: usize },
    #[error("formula unexpectedly mentions {0}")]
    UnexpectedVariable(Var),
    #[error("cannot project onto l: lengths differ (h: {high}, l: {low}) and no projection map is configured")]
    ProjectionLengthMismatch { high: usize, low: usize },
}

/// Alphabet plus the fixed length of each variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringDomain {
    alphabet: Vec<char>,
    len_high: usize,
    len_low: usize,
}

impl StringDomain {
    pub fn new(
        alphabet: impl IntoIterator<Item = char>,
        len_high: usize,
        len_low: usize,
    ) -> Result<Self, ConstraintError> {
        let alphabet: Vec<char> = alphabet.into_iter().collect();
        if alphabet.is_empty() {
            return Err(ConstraintError::EmptyAlphabet);
        }
        let mut seen = BTreeSet::new();
        for &c in &alphabet {
            if !seen.insert(c) {
                return Err(ConstraintError::DuplicateChar(c));
            }
        }
        Ok(StringDomain {
            alphabet,
            len_high,
            len_low,
        })
    }

    /// Digits `0`-`9`, both variables of length `len`.
    pub fn digits(len: usize) -> Self {
        StringDomain::new('0'..='9', len, len).expect("digit alphabet is valid")
    }

    /// Lowercase `a`-`z`.
    pub fn lowercase(len_high: usize, len_low: usize) -> Self {
        StringDomain::new('a'..='z', len_high, len_low).expect("lowercase alphabet is valid")
    }

    pub fn with_lengths(&self, len_high: usize, len_low: usize) -> Self {
        StringDomain {
            alphabet: self.alphabet.clone(),
            len_high,
            len_low,
        }
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    /// Position of `c` in the alphabet order.
    pub fn rank(&self, c: char) -> Option<usize> {
        self.alphabet.iter().position(|&a| a == c)
    }

    pub fn contains(&self, c: char) -> bool {
        self.alphabet.contains(&c)
    }

    pub fn len(&self, var: Var) -> usize {
        match var {
            Var::High => self.len_high,
            Var::Low => self.len_low,
        }
    }

    /// Number of strings of `var`'s length, `|alphabet|^len`.
    pub fn size(&self, var: Var) -> BigUint {
        BigUint::from(self.alphabet.len()).pow(self.len(var) as u32)
    }

    /// Checks that `word` is a string of `var`'s domain and returns its characters.
    pub fn check_word(&self, var: Var, word: &str) -> Result<Vec<char>, ConstraintError> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() != self.len(var) {
            return Err(ConstraintError::LengthMismatch {
                var,
                expected: self.len(var),
                found: chars.len(),
            });
        }
        if let Some(&c) = chars.iter().find(|&&c| !self.contains(c)) {
            return Err(ConstraintError::CharNotInAlphabet(c));
        }
        Ok(chars)
    }

    /// Lexicographic `a < b` under alphabet order.
    pub fn lex_lt(&self, a: &[char], b: &[char]) -> bool {
        for (&x, &y) in a.iter().zip(b) {
            let (rx, ry) = (self.rank(x), self.rank(y));
            if rx != ry {
                return rx < ry;
            }
        }
        a.len() < b.len()
    }
}

/// One character position of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharRef {
    pub var: Var,
    pub index: usize,
}

impl CharRef {
    pub fn new(var: Var, index: usize) -> Self {
        CharRef { var, index }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    CharEqConst(CharRef, char),
    CharNeqConst(CharRef, char),
    CharEqVar(CharRef, CharRef),
    CharNeqVar(CharRef, CharRef),
    /// Lexicographic `a < b` on equal-length variables.
    LexLt(Var, Var),
    LexGe(Var, Var),
    StrEqConst(Var, String),
    StrNeqConst(Var, String),
    BeginsConst(Var, String),
    NotBeginsConst(Var, String),
}

impl Atom {
    pub fn negate(&self) -> Atom {
        use Atom::*;
        match self.clone() {
            CharEqConst(r, c) => CharNeqConst(r, c),
            CharNeqConst(r, c) => CharEqConst(r, c),
            CharEqVar(a, b) => CharNeqVar(a, b),
            CharNeqVar(a, b) => CharEqVar(a, b),
            LexLt(a, b) => LexGe(a, b),
            LexGe(a, b) => LexLt(a, b),
            StrEqConst(v, s) => StrNeqConst(v, s),
            StrNeqConst(v, s) => StrEqConst(v, s),
            BeginsConst(v, s) => NotBeginsConst(v, s),
            NotBeginsConst(v, s) => BeginsConst(v, s),
        }
    }

    /// True for the un-negated member of each atom pair.
    pub fn is_positive(&self) -> bool {
        matches!(
            self,
            Atom::CharEqConst(..)
                | Atom::CharEqVar(..)
                | Atom::LexLt(..)
                | Atom::StrEqConst(..)
                | Atom::BeginsConst(..)
        )
    }

    pub fn vars(&self) -> Vec<Var> {
        use Atom::*;
        match self {
            CharEqConst(r, _) | CharNeqConst(r, _) => vec![r.var],
            CharEqVar(a, b) | CharNeqVar(a, b) => vec![a.var, b.var],
            LexLt(a, b) | LexGe(a, b) => vec![*a, *b],
            StrEqConst(v, _) | StrNeqConst(v, _) | BeginsConst(v, _) | NotBeginsConst(v, _) => {
                vec![*v]
            }
        }
    }

    pub fn is_lexicographic(&self) -> bool {
        matches!(self, Atom::LexLt(..) | Atom::LexGe(..))
    }

    /// Characters mentioned as constants.
    pub fn constants(&self) -> Vec<char> {
        use Atom::*;
        match self {
            CharEqConst(_, c) | CharNeqConst(_, c) => vec![*c],
            StrEqConst(_, s) | StrNeqConst(_, s) | BeginsConst(_, s) | NotBeginsConst(_, s) => {
                s.chars().collect()
            }
            _ => Vec::new(),
        }
    }

    fn validate(&self, domain: &StringDomain) -> Result<(), ConstraintError> {
        use Atom::*;
        let check_ref = |r: &CharRef| {
            let len = domain.len(r.var);
            if r.index >= len {
                Err(ConstraintError::IndexOutOfRange {
                    var: r.var,
                    index: r.index,
                    len,
                })
            } else {
                Ok(())
            }
        };
        let check_char = |c: char| {
            if domain.contains(c) {
                Ok(())
            } else {
                Err(ConstraintError::CharNotInAlphabet(c))
            }
        };
        match self {
            CharEqConst(r, c) | CharNeqConst(r, c) => {
                check_ref(r)?;
                check_char(*c)
            }
            CharEqVar(a, b) | CharNeqVar(a, b) => {
                check_ref(a)?;
                check_ref(b)
            }
            LexLt(a, b) | LexGe(a, b) => {
                if a != b && domain.len(*a) != domain.len(*b) {
                    return Err(ConstraintError::LexLengthMismatch {
                        high: domain.len(Var::High),
                        low: domain.len(Var::Low),
                    });
                }
                Ok(())
            }
            StrEqConst(v, s) | StrNeqConst(v, s) | BeginsConst(v, s) | NotBeginsConst(v, s) => {
                let n = s.chars().count();
                let exact = matches!(self, StrEqConst(..) | StrNeqConst(..));
                let len = domain.len(*v);
                if (exact && n != len) || n > len {
                    return Err(ConstraintError::LiteralLength {
                        var: *v,
                        literal: s.clone(),
                        len,
                    });
                }
                s.chars().try_for_each(check_char)
            }
        }
    }

    pub fn eval(&self, domain: &StringDomain, h: &[char], l: &[char]) -> bool {
        use Atom::*;
        let word = |v: Var| match v {
            Var::High => h,
            Var::Low => l,
        };
        let at = |r: &CharRef| word(r.var).get(r.index).copied();
        match self {
            CharEqConst(r, c) => at(r) == Some(*c),
            CharNeqConst(r, c) => at(r) != Some(*c),
            CharEqVar(a, b) => at(a).is_some() && at(a) == at(b),
            CharNeqVar(a, b) => !(at(a).is_some() && at(a) == at(b)),
            LexLt(a, b) => domain.lex_lt(word(*a), word(*b)),
            LexGe(a, b) => !domain.lex_lt(word(*a), word(*b)),
            StrEqConst(v, s) => word(*v).iter().copied().eq(s.chars()),
            StrNeqConst(v, s) => !word(*v).iter().copied().eq(s.chars()),
            BeginsConst(v, s) => starts_with(word(*v), s),
            NotBeginsConst(v, s) => !starts_with(word(*v), s),
        }
    }

    /// Three-valued evaluation under a partial assignment.
    pub(crate) fn eval_partial(
        &self,
        domain: &StringDomain,
        h: &[Option<char>],
        l: &[Option<char>],
    ) -> Option<bool> {
        use Atom::*;
        if !self.is_positive() {
            return self.negate().eval_partial(domain, h, l).map(|b| !b);
        }
        let word = |v: Var| match v {
            Var::High => h,
            Var::Low => l,
        };
        let at = |r: &CharRef| word(r.var).get(r.index).copied();
        match self {
            CharEqConst(r, c) => match at(r) {
                None => Some(false),
                Some(None) => None,
                Some(Some(x)) => Some(x == *c),
            },
            CharEqVar(a, b) => {
                if a == b {
                    return Some(at(a).is_some());
                }
                match (at(a), at(b)) {
                    (None, _) | (_, None) => Some(false),
                    (Some(Some(x)), Some(Some(y))) => Some(x == y),
                    _ => None,
                }
            }
            LexLt(a, b) => {
                let (wa, wb) = (word(*a), word(*b));
                for (x, y) in wa.iter().zip(wb) {
                    match (x, y) {
                        (Some(x), Some(y)) => {
                            let (rx, ry) = (domain.rank(*x), domain.rank(*y));
                            if rx != ry {
                                return Some(rx < ry);
                            }
                        }
                        _ => return None,
                    }
                }
                Some(wa.len() < wb.len())
            }
            StrEqConst(v, s) => {
                let w = word(*v);
                if w.len() != s.chars().count() {
                    return Some(false);
                }
                let mut unknown = false;
                for (x, c) in w.iter().zip(s.chars()) {
                    match x {
                        Some(x) if *x != c => return Some(false),
                        None => unknown = true,
                        _ => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            BeginsConst(v, s) => {
                let w = word(*v);
                if w.len() < s.chars().count() {
                    return Some(false);
                }
                let mut unknown = false;
                for (x, c) in w.iter().zip(s.chars()) {
                    match x {
                        Some(x) if *x != c => return Some(false),
                        None => unknown = true,
                        _ => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            _ => unreachable!("negative atoms handled above"),
        }
    }
}

fn starts_with(word: &[char], prefix: &str) -> bool {
    let mut it = word.iter();
    prefix.chars().all(|c| it.next() == Some(&c))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl From<Atom> for Formula {
    fn from(a: Atom) -> Self {
        Formula::Atom(a)
    }
}

impl Formula {
    pub fn constant(b: bool) -> Formula {
        if b {
            Formula::True
        } else {
            Formula::False
        }
    }

    /// Conjunction; empty is `True`, a single child is returned as is.
    pub fn and(mut children: Vec<Formula>) -> Formula {
        match children.len() {
            0 => Formula::True,
            1 => children.pop().unwrap(),
            _ => Formula::And(children),
        }
    }

    /// Disjunction; empty is `False`, a single child is returned as is.
    pub fn or(mut children: Vec<Formula>) -> Formula {
        match children.len() {
            0 => Formula::False,
            1 => children.pop().unwrap(),
            _ => Formula::Or(children),
        }
    }

    /// Negation, folding constants and atoms.
    pub fn negate(&self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Atom(a) => Formula::Atom(a.negate()),
            Formula::Not(f) => (**f).clone(),
            f => Formula::Not(Box::new(f.clone())),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut vars = BTreeSet::new();
        self.visit_atoms(&mut |a| vars.extend(a.vars()));
        vars
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => f(a),
            Formula::Not(g) => g.visit_atoms(f),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| c.visit_atoms(f)),
        }
    }

    /// Rebuilds the formula with every atom replaced by `f(atom)`.
    pub fn map_atoms<E>(
        &self,
        f: &mut impl FnMut(&Atom) -> Result<Formula, E>,
    ) -> Result<Formula, E> {
        Ok(match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => f(a)?,
            Formula::Not(g) => Formula::Not(Box::new(g.map_atoms(f)?)),
            Formula::And(cs) => Formula::And(
                cs.iter()
                    .map(|c| c.map_atoms(f))
                    .collect::<Result<_, _>>()?,
            ),
            Formula::Or(cs) => Formula::Or(
                cs.iter()
                    .map(|c| c.map_atoms(f))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(g) => 1 + g.size(),
            Formula::And(cs) | Formula::Or(cs) => 1 + cs.iter().map(Formula::size).sum::<usize>(),
        }
    }

    pub fn has_lexicographic(&self) -> bool {
        let mut found = false;
        self.visit_atoms(&mut |a| found |= a.is_lexicographic());
        found
    }

    /// Checks indices, literals and characters against the domain.
    pub fn validate(&self, domain: &StringDomain) -> Result<(), ConstraintError> {
        let mut result = Ok(());
        self.visit_atoms(&mut |a| {
            if result.is_ok() {
                result = a.validate(domain);
            }
        });
        result
    }

    /// Concrete evaluation on `(h, l)`.
    pub fn eval(&self, domain: &StringDomain, h: &[char], l: &[char]) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => a.eval(domain, h, l),
            Formula::Not(g) => !g.eval(domain, h, l),
            Formula::And(cs) => cs.iter().all(|c| c.eval(domain, h, l)),
            Formula::Or(cs) => cs.iter().any(|c| c.eval(domain, h, l)),
        }
    }

    pub fn eval_str(&self, domain: &StringDomain, h: &str, l: &str) -> bool {
        let h: Vec<char> = h.chars().collect();
        let l: Vec<char> = l.chars().collect();
        self.eval(domain, &h, &l)
    }

    pub(crate) fn eval_partial(
        &self,
        domain: &StringDomain,
        h: &[Option<char>],
        l: &[Option<char>],
    ) -> Option<bool> {
        match self {
            Formula::True => Some(true),
            Formula::False => Some(false),
            Formula::Atom(a) => a.eval_partial(domain, h, l),
            Formula::Not(g) => g.eval_partial(domain, h, l).map(|b| !b),
            Formula::And(cs) => {
                let mut unknown = false;
                for c in cs {
                    match c.eval_partial(domain, h, l) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        Some(true) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            Formula::Or(cs) => {
                let mut unknown = false;
                for c in cs {
                    match c.eval_partial(domain, h, l) {
                        Some(true) => return Some(true),
                        None => unknown = true,
                        Some(false) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(false)
                }
            }
        }
    }

    /// Folds `Not(atom)` into the negated atom everywhere; the shape the parser produces.
    pub fn normalize(&self) -> Formula {
        match self {
            Formula::Not(g) => match g.normalize() {
                Formula::Atom(a) => Formula::Atom(a.negate()),
                other => Formula::Not(Box::new(other)),
            },
            Formula::And(cs) => Formula::And(cs.iter().map(Formula::normalize).collect()),
            Formula::Or(cs) => Formula::Or(cs.iter().map(Formula::normalize).collect()),
            f => f.clone(),
        }
    }
}
