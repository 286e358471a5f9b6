use std::collections::{HashMap, HashSet};

use super::{Atom, CharRef, Formula};

impl Formula {
    /// Equivalent formula with constants folded, nested junctions flattened,
    /// duplicates and complementary literals removed. Idempotent.
    pub fn simplify(&self) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => simplify_atom(a),
            Formula::Not(g) => match g.simplify() {
                Formula::True => Formula::False,
                Formula::False => Formula::True,
                Formula::Atom(a) => simplify_atom(&a.negate()),
                Formula::Not(x) => *x,
                other => Formula::Not(Box::new(other)),
            },
            Formula::And(cs) => simplify_junction(cs, true),
            Formula::Or(cs) => simplify_junction(cs, false),
        }
    }
}

fn simplify_atom(a: &Atom) -> Formula {
    match a {
        Atom::CharEqVar(x, y) if x == y => Formula::True,
        Atom::CharNeqVar(x, y) if x == y => Formula::False,
        Atom::CharEqVar(x, y) if y < x => Formula::Atom(Atom::CharEqVar(*y, *x)),
        Atom::CharNeqVar(x, y) if y < x => Formula::Atom(Atom::CharNeqVar(*y, *x)),
        Atom::LexLt(x, y) if x == y => Formula::False,
        Atom::LexGe(x, y) if x == y => Formula::True,
        _ => Formula::Atom(a.clone()),
    }
}

fn simplify_junction(children: &[Formula], is_and: bool) -> Formula {
    let identity = Formula::constant(is_and);
    let absorbing = Formula::constant(!is_and);
    let mut out: Vec<Formula> = Vec::new();
    let mut seen: HashSet<Formula> = HashSet::new();

    let mut flat = Vec::with_capacity(children.len());
    for c in children {
        match c.simplify() {
            Formula::And(gs) if is_and => flat.extend(gs),
            Formula::Or(gs) if !is_and => flat.extend(gs),
            s => flat.push(s),
        }
    }
    for x in flat {
        if x == identity {
            continue;
        }
        if x == absorbing {
            return absorbing;
        }
        if seen.insert(x.clone()) {
            out.push(x);
        }
    }

    for x in &out {
        let complement = match x {
            Formula::Atom(a) => Formula::Atom(a.negate()),
            Formula::Not(g) => (**g).clone(),
            other => Formula::Not(Box::new(other.clone())),
        };
        if seen.contains(&complement) {
            return absorbing;
        }
    }

    // Per-position reasoning on character constants. In a conjunction two
    // different `=` constants clash and a `!=` next to an `=` is implied; in a
    // disjunction the dual holds.
    let mut fixed: HashMap<CharRef, char> = HashMap::new();
    for x in &out {
        match (x, is_and) {
            (Formula::Atom(Atom::CharEqConst(r, c)), true)
            | (Formula::Atom(Atom::CharNeqConst(r, c)), false) => {
                if let Some(&d) = fixed.get(r) {
                    if d != *c {
                        return absorbing;
                    }
                }
                fixed.insert(*r, *c);
            }
            _ => {}
        }
    }
    if !fixed.is_empty() {
        out.retain(|x| match (x, is_and) {
            (Formula::Atom(Atom::CharNeqConst(r, _)), true)
            | (Formula::Atom(Atom::CharEqConst(r, _)), false) => !fixed.contains_key(r),
            _ => true,
        });
    }

    match out.len() {
        0 => identity,
        1 => out.pop().unwrap(),
        _ if is_and => Formula::And(out),
        _ => Formula::Or(out),
    }
}
