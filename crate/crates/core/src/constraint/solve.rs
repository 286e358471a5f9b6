use std::collections::BTreeSet;

use super::{Atom, CharRef, Formula, StringDomain, Var};

/// Finds some `(h, l)` satisfying `f`, or `None` if it is unsatisfiable.
///
/// Exact backtracking over character positions with three-valued pruning.
/// The alphabet is cut down to the characters that can make a difference:
/// without lexicographic atoms only equality matters, so a position tries the
/// constants, the characters already placed and one fresh character; with
/// lexicographic atoms every gap between constants keeps as many characters
/// as there are positions, which preserves every order pattern.
pub fn find_model(f: &Formula, domain: &StringDomain) -> Option<(Vec<char>, Vec<char>)> {
    let f = f.simplify();
    if f == Formula::False {
        return None;
    }
    let (n, m) = (domain.len(Var::High), domain.len(Var::Low));
    let filler = domain.alphabet()[0];

    let mut relevant: BTreeSet<(usize, Var)> = BTreeSet::new();
    let mut constants: BTreeSet<char> = BTreeSet::new();
    let whole = |v: Var, upto: usize, rel: &mut BTreeSet<(usize, Var)>| {
        for i in 0..upto.min(domain.len(v)) {
            rel.insert((i, v));
        }
    };
    f.visit_atoms(&mut |a| {
        constants.extend(a.constants());
        match a {
            Atom::CharEqConst(r, _) | Atom::CharNeqConst(r, _) => {
                relevant.insert((r.index, r.var));
            }
            Atom::CharEqVar(x, y) | Atom::CharNeqVar(x, y) => {
                relevant.insert((x.index, x.var));
                relevant.insert((y.index, y.var));
            }
            Atom::LexLt(x, y) | Atom::LexGe(x, y) => {
                whole(*x, usize::MAX, &mut relevant);
                whole(*y, usize::MAX, &mut relevant);
            }
            Atom::StrEqConst(v, s)
            | Atom::StrNeqConst(v, s)
            | Atom::BeginsConst(v, s)
            | Atom::NotBeginsConst(v, s) => whole(*v, s.chars().count(), &mut relevant),
        }
    });
    constants.retain(|&c| domain.contains(c));

    let order: Vec<CharRef> = relevant
        .iter()
        .filter(|(i, v)| *i < domain.len(*v))
        .map(|&(i, v)| CharRef::new(v, i))
        .collect();
    let lex = f.has_lexicographic();
    let reduced = if lex {
        reduced_alphabet(domain, &constants, order.len())
    } else {
        Vec::new()
    };

    let mut h: Vec<Option<char>> = vec![Some(filler); n];
    let mut l: Vec<Option<char>> = vec![Some(filler); m];
    for r in &order {
        slot(&mut h, &mut l, r.var)[r.index] = None;
    }
    let mut search = Search {
        f: &f,
        domain,
        order: &order,
        constants: &constants,
        reduced: &reduced,
        lex,
    };
    if search.go(0, &mut h, &mut l) {
        let fill = |w: Vec<Option<char>>| w.into_iter().map(|c| c.unwrap_or(filler)).collect();
        Some((fill(h), fill(l)))
    } else {
        None
    }
}

fn slot<'a>(
    h: &'a mut [Option<char>],
    l: &'a mut [Option<char>],
    v: Var,
) -> &'a mut [Option<char>] {
    match v {
        Var::High => h,
        Var::Low => l,
    }
}

// Constants plus, in each gap between consecutive constants (and at both
// ends), the first `positions` characters of that gap.
fn reduced_alphabet(
    domain: &StringDomain,
    constants: &BTreeSet<char>,
    positions: usize,
) -> Vec<char> {
    let mut out = Vec::new();
    let mut run = 0;
    for &c in domain.alphabet() {
        if constants.contains(&c) {
            out.push(c);
            run = 0;
        } else if run < positions {
            out.push(c);
            run += 1;
        }
    }
    out
}

struct Search<'a> {
    f: &'a Formula,
    domain: &'a StringDomain,
    order: &'a [CharRef],
    constants: &'a BTreeSet<char>,
    reduced: &'a [char],
    lex: bool,
}

impl Search<'_> {
    fn candidates(&self, h: &[Option<char>], l: &[Option<char>]) -> Vec<char> {
        if self.lex {
            return self.reduced.to_vec();
        }
        let mut useful: BTreeSet<char> = self.constants.clone();
        for r in self.order {
            let w = if r.var == Var::High { h } else { l };
            if let Some(c) = w[r.index] {
                useful.insert(c);
            }
        }
        let fresh = self
            .domain
            .alphabet()
            .iter()
            .copied()
            .find(|c| !useful.contains(c));
        let mut out: Vec<char> = self
            .domain
            .alphabet()
            .iter()
            .copied()
            .filter(|c| useful.contains(c))
            .collect();
        out.extend(fresh);
        out
    }

    fn go(&mut self, depth: usize, h: &mut Vec<Option<char>>, l: &mut Vec<Option<char>>) -> bool {
        match self.f.eval_partial(self.domain, h, l) {
            Some(b) => return b,
            None if depth == self.order.len() => unreachable!("all relevant positions assigned"),
            None => {}
        }
        let r = self.order[depth];
        for c in self.candidates(h, l) {
            slot(h, l, r.var)[r.index] = Some(c);
            if self.go(depth + 1, h, l) {
                return true;
            }
        }
        slot(h, l, r.var)[r.index] = None;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sat(f: &Formula, d: &StringDomain) -> bool {
        let k = d.alphabet().len();
        let (n, m) = (d.len(Var::High), d.len(Var::Low));
        let total = k.pow((n + m) as u32);
        (0..total).any(|mut i| {
            let mut w = vec![' '; n + m];
            for p in (0..n + m).rev() {
                w[p] = d.alphabet()[i % k];
                i /= k;
            }
            f.eval(d, &w[..n], &w[n..])
        })
    }

    fn hl(i: usize, j: usize) -> Formula {
        Atom::CharEqVar(CharRef::new(Var::High, i), CharRef::new(Var::Low, j)).into()
    }

    #[test]
    fn model_satisfies_formula() {
        let d = StringDomain::digits(3);
        let f = Formula::And(vec![
            hl(0, 0),
            hl(1, 1).negate(),
            Atom::CharEqConst(CharRef::new(Var::Low, 1), '7').into(),
            Atom::LexLt(Var::Low, Var::High).into(),
        ]);
        let (h, l) = find_model(&f, &d).unwrap();
        assert!(f.eval(&d, &h, &l));
    }

    #[test]
    fn detects_unsatisfiable_equality_chains() {
        let d = StringDomain::new("ab".chars(), 3, 3).unwrap();
        // Three pairwise distinct characters cannot exist over two letters.
        let f = Formula::And(vec![
            Atom::CharNeqVar(CharRef::new(Var::High, 0), CharRef::new(Var::High, 1)).into(),
            Atom::CharNeqVar(CharRef::new(Var::High, 1), CharRef::new(Var::High, 2)).into(),
            Atom::CharNeqVar(CharRef::new(Var::High, 0), CharRef::new(Var::High, 2)).into(),
        ]);
        assert_eq!(find_model(&f, &d), None);
        assert!(!brute_sat(&f, &d));
    }

    #[test]
    fn lexicographic_with_pinned_extremes() {
        let d = StringDomain::new("abc".chars(), 2, 2).unwrap();
        // l is the largest string, nothing is above it.
        let f = Formula::And(vec![
            Atom::StrEqConst(Var::Low, "cc".into()).into(),
            Atom::LexLt(Var::Low, Var::High).into(),
        ]);
        assert_eq!(find_model(&f, &d), None);
        let g = Formula::And(vec![
            Atom::StrEqConst(Var::Low, "cb".into()).into(),
            Atom::LexLt(Var::Low, Var::High).into(),
        ]);
        let (h, _) = find_model(&g, &d).unwrap();
        assert_eq!(h, vec!['c', 'c']);
    }

    #[test]
    fn agrees_with_brute_force_on_small_mixtures() {
        let d = StringDomain::new("abc".chars(), 2, 2).unwrap();
        let formulas = vec![
            Formula::And(vec![hl(0, 1), hl(1, 0), hl(0, 0).negate()]),
            Formula::And(vec![
                hl(0, 0),
                hl(1, 1),
                Atom::LexLt(Var::High, Var::Low).into(),
            ]),
            Formula::Or(vec![
                Formula::And(vec![hl(0, 0), Atom::LexLt(Var::High, Var::Low).into()]),
                Atom::BeginsConst(Var::High, "c".into()).into(),
            ]),
            Formula::And(vec![
                Atom::NotBeginsConst(Var::High, "a".into()).into(),
                Atom::NotBeginsConst(Var::High, "b".into()).into(),
                Atom::NotBeginsConst(Var::High, "c".into()).into(),
            ]),
        ];
        for f in &formulas {
            assert_eq!(find_model(f, &d).is_some(), brute_sat(f, &d), "{f}");
        }
    }
}
