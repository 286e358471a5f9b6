use std::collections::BTreeMap;

use crate::constraint::{Atom, Formula, StringDomain};

use super::{AutomatonError, Dfa};

/// Compiles a formula with at most one free variable into a minimal DFA that
/// agrees with the formula on every string of that variable's length.
pub fn compile(f: &Formula, domain: &StringDomain) -> Result<Dfa, AutomatonError> {
    f.validate(domain)?;
    if f.free_vars().len() > 1 {
        return Err(AutomatonError::TwoFreeVariables);
    }
    Ok(build(f, domain.alphabet()))
}

fn build(f: &Formula, alphabet: &[char]) -> Dfa {
    if let Some(sets) = position_sets(f, alphabet) {
        return chain(alphabet, &sets);
    }
    match f {
        Formula::True => Dfa::universal(alphabet),
        Formula::False => Dfa::empty(alphabet),
        Formula::Atom(a) => atom(a, alphabet),
        Formula::Not(g) => build(g, alphabet).complement(),
        Formula::And(cs) => {
            // Per-position tests merge into one chain automaton.
            let mut sets = Sets::new();
            let mut rest = Vec::new();
            for c in cs {
                match position_sets(c, alphabet) {
                    Some(s) => intersect_sets(&mut sets, s),
                    None => rest.push(build(c, alphabet)),
                }
            }
            if !sets.is_empty() {
                rest.push(chain(alphabet, &sets));
            }
            fold(rest, alphabet, true)
        }
        Formula::Or(cs) => {
            // Tests of a single position merge per position.
            let mut single: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
            let mut rest = Vec::new();
            for c in cs {
                match position_sets(c, alphabet) {
                    Some(s) if s.len() == 1 => {
                        let (i, mask) = s.into_iter().next().unwrap();
                        let acc = single
                            .entry(i)
                            .or_insert_with(|| vec![false; alphabet.len()]);
                        acc.iter_mut().zip(mask).for_each(|(a, m)| *a |= m);
                    }
                    _ => rest.push(build(c, alphabet)),
                }
            }
            rest.extend(
                single
                    .into_iter()
                    .map(|(i, mask)| chain(alphabet, &Sets::from([(i, mask)]))),
            );
            fold(rest, alphabet, false)
        }
    }
}

/// Allowed symbols per position; unlisted positions are unconstrained.
type Sets = BTreeMap<usize, Vec<bool>>;

fn intersect_sets(acc: &mut Sets, other: Sets) {
    for (i, mask) in other {
        match acc.get_mut(&i) {
            Some(a) => a.iter_mut().zip(mask).for_each(|(x, m)| *x &= m),
            None => {
                acc.insert(i, mask);
            }
        }
    }
}

/// `Some` when `f` is a conjunction of tests on single positions against
/// constants, possibly with disjunctions over one position.
fn position_sets(f: &Formula, alphabet: &[char]) -> Option<Sets> {
    let sym = |c: char| alphabet.iter().position(|&x| x == c).expect("validated");
    let only = |i: usize, c: char, eq: bool| {
        let mut mask = vec![!eq; alphabet.len()];
        mask[sym(c)] = eq;
        Sets::from([(i, mask)])
    };
    match f {
        Formula::True => Some(Sets::new()),
        Formula::Atom(Atom::CharEqConst(r, c)) => Some(only(r.index, *c, true)),
        Formula::Atom(Atom::CharNeqConst(r, c)) => Some(only(r.index, *c, false)),
        Formula::Atom(Atom::StrEqConst(_, s) | Atom::BeginsConst(_, s)) => {
            let mut acc = Sets::new();
            for (i, c) in s.chars().enumerate() {
                intersect_sets(&mut acc, only(i, c, true));
            }
            Some(acc)
        }
        Formula::Not(g) => match g.as_ref() {
            Formula::Atom(a @ (Atom::CharEqConst(..) | Atom::CharNeqConst(..))) => {
                position_sets(&Formula::Atom(a.negate()), alphabet)
            }
            _ => None,
        },
        Formula::And(cs) => {
            let mut acc = Sets::new();
            for c in cs {
                intersect_sets(&mut acc, position_sets(c, alphabet)?);
            }
            Some(acc)
        }
        Formula::Or(cs) => {
            let mut index = None;
            let mut mask = vec![false; alphabet.len()];
            for c in cs {
                let s = position_sets(c, alphabet)?;
                if s.len() != 1 {
                    return None;
                }
                let (i, m) = s.into_iter().next().unwrap();
                if index.is_some_and(|j| j != i) {
                    return None;
                }
                index = Some(i);
                mask.iter_mut().zip(m).for_each(|(a, b)| *a |= b);
            }
            index.map(|i| Sets::from([(i, mask)]))
        }
        _ => None,
    }
}

/// Strings whose character at each listed position is an allowed symbol.
fn chain(alphabet: &[char], sets: &Sets) -> Dfa {
    let k = alphabet.len();
    let span = sets.keys().next_back().map_or(0, |i| i + 1);
    // States 0..span walk the positions; `span` accepts, `span + 1` is dead.
    let (ok, dead) = (span as u32, span as u32 + 1);
    let mut trans = Vec::with_capacity((span + 2) * k);
    for p in 0..span {
        let next = if p + 1 == span { ok } else { p as u32 + 1 };
        for a in 0..k {
            let allowed = sets.get(&p).is_none_or(|m| m[a]);
            trans.push(if allowed { next } else { dead });
        }
    }
    trans.extend(std::iter::repeat_n(ok, k));
    trans.extend(std::iter::repeat_n(dead, k));
    let mut accepting = vec![false; span + 2];
    accepting[span] = true;
    Dfa::from_parts(alphabet.to_vec(), 0, accepting, trans)
        .expect("well-formed")
        .minimize()
}

// Balanced pairwise products keep intermediate automata small.
fn fold(mut layer: Vec<Dfa>, alphabet: &[char], is_and: bool) -> Dfa {
    if layer.is_empty() {
        return if is_and {
            Dfa::universal(alphabet)
        } else {
            Dfa::empty(alphabet)
        };
    }
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len().div_ceil(2));
        let mut it = layer.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => {
                    let p = if is_and { a.intersect(&b) } else { a.union(&b) };
                    next.push(p.expect("same alphabet"));
                }
                None => next.push(a),
            }
        }
        layer = next;
    }
    layer.pop().unwrap()
}

fn atom(a: &Atom, alphabet: &[char]) -> Dfa {
    match a {
        Atom::CharEqConst(..) | Atom::StrEqConst(..) | Atom::BeginsConst(..) => chain(
            alphabet,
            &position_sets(&a.clone().into(), alphabet).expect("positional atom"),
        ),
        Atom::CharEqVar(x, y) => {
            debug_assert_eq!(x.var, y.var);
            same_char(alphabet, x.index.min(y.index), x.index.max(y.index))
        }
        // Only one variable is free, so both sides are the same string.
        Atom::LexLt(..) => Dfa::empty(alphabet),
        Atom::LexGe(..) => Dfa::universal(alphabet),
        negative => atom(&negative.negate(), alphabet).complement(),
    }
}

/// Strings whose characters at positions `i <= j` are equal.
fn same_char(alphabet: &[char], i: usize, j: usize) -> Dfa {
    if i == j {
        return Dfa::universal(alphabet);
    }
    let k = alphabet.len();
    let gap = j - i;
    // States: 0..=i prefix walk; then for each remembered symbol `a` a chain
    // of `gap` states; then accept and dead sinks.
    let remember = |a: usize, step: usize| (i + 1 + a * gap + step) as u32;
    let ok = (i + 1 + k * gap) as u32;
    let dead = ok + 1;
    let mut trans = Vec::new();
    for p in 0..=i {
        for a in 0..k {
            trans.push(if p < i { p as u32 + 1 } else { remember(a, 0) });
        }
    }
    for a in 0..k {
        for step in 0..gap {
            for b in 0..k {
                trans.push(if step + 1 < gap {
                    remember(a, step + 1)
                } else if a == b {
                    ok
                } else {
                    dead
                });
            }
        }
    }
    trans.extend(std::iter::repeat_n(ok, k));
    trans.extend(std::iter::repeat_n(dead, k));
    let n = ok as usize + 2;
    let mut accepting = vec![false; n];
    accepting[ok as usize] = true;
    Dfa::from_parts(alphabet.to_vec(), 0, accepting, trans)
        .expect("well-formed")
        .minimize()
}
