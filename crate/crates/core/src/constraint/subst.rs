use super::{Atom, CharRef, ConstraintError, Formula, StringDomain, Var};

/// `var < value` as a positional formula over `var` alone.
pub(crate) fn lex_less_than_const(var: Var, value: &[char], domain: &StringDomain) -> Formula {
    lex_against_const(var, value, domain, true)
}

/// `var > value` as a positional formula over `var` alone.
pub(crate) fn lex_greater_than_const(var: Var, value: &[char], domain: &StringDomain) -> Formula {
    lex_against_const(var, value, domain, false)
}

// OR over i of (var[..i] == value[..i] AND var[i] strictly below/above value[i]).
fn lex_against_const(var: Var, value: &[char], domain: &StringDomain, below: bool) -> Formula {
    let mut disjuncts = Vec::new();
    for (i, &c) in value.iter().enumerate() {
        let rank = domain.rank(c).expect("value checked against alphabet");
        let options: Vec<Formula> = domain
            .alphabet()
            .iter()
            .enumerate()
            .filter(|&(r, _)| if below { r < rank } else { r > rank })
            .map(|(_, &d)| Atom::CharEqConst(CharRef::new(var, i), d).into())
            .collect();
        if options.is_empty() {
            continue;
        }
        let mut conj: Vec<Formula> = value[..i]
            .iter()
            .enumerate()
            .map(|(j, &p)| Atom::CharEqConst(CharRef::new(var, j), p).into())
            .collect();
        conj.push(Formula::or(options));
        disjuncts.push(Formula::and(conj));
    }
    Formula::or(disjuncts)
}

impl Formula {
    /// Instantiates `var` with a concrete string; the result no longer mentions `var`.
    pub fn substitute(
        &self,
        var: Var,
        value: &str,
        domain: &StringDomain,
    ) -> Result<Formula, ConstraintError> {
        let chars = domain.check_word(var, value)?;
        let at = |r: &CharRef| chars.get(r.index).copied();
        let out = self.map_atoms(&mut |a: &Atom| -> Result<Formula, ConstraintError> {
            if !a.is_positive() {
                return Ok(substitute_positive(&a.negate(), var, &chars, &at, domain).negate());
            }
            Ok(substitute_positive(a, var, &chars, &at, domain))
        })?;
        Ok(out.simplify())
    }

    /// Replaces every occurrence of `from` by `to` (positions unchanged).
    pub fn rename(&self, from: Var, to: Var) -> Formula {
        let swap = |v: Var| if v == from { to } else { v };
        let swap_ref = |r: CharRef| CharRef::new(swap(r.var), r.index);
        self.map_atoms(&mut |a: &Atom| -> Result<Formula, ()> {
            use Atom::*;
            Ok(Formula::Atom(match a.clone() {
                CharEqConst(r, c) => CharEqConst(swap_ref(r), c),
                CharNeqConst(r, c) => CharNeqConst(swap_ref(r), c),
                CharEqVar(x, y) => CharEqVar(swap_ref(x), swap_ref(y)),
                CharNeqVar(x, y) => CharNeqVar(swap_ref(x), swap_ref(y)),
                LexLt(x, y) => LexLt(swap(x), swap(y)),
                LexGe(x, y) => LexGe(swap(x), swap(y)),
                StrEqConst(v, s) => StrEqConst(swap(v), s),
                StrNeqConst(v, s) => StrNeqConst(swap(v), s),
                BeginsConst(v, s) => BeginsConst(swap(v), s),
                NotBeginsConst(v, s) => NotBeginsConst(swap(v), s),
            }))
        })
        .expect("renaming cannot fail")
    }
}

fn substitute_positive(
    a: &Atom,
    var: Var,
    chars: &[char],
    at: &impl Fn(&CharRef) -> Option<char>,
    domain: &StringDomain,
) -> Formula {
    use Atom::*;
    match a {
        CharEqConst(r, c) if r.var == var => Formula::constant(at(r) == Some(*c)),
        CharEqVar(x, y) => match (x.var == var, y.var == var) {
            (true, true) => Formula::constant(at(x).is_some() && at(x) == at(y)),
            (true, false) => match at(x) {
                Some(c) => CharEqConst(*y, c).into(),
                None => Formula::False,
            },
            (false, true) => match at(y) {
                Some(c) => CharEqConst(*x, c).into(),
                None => Formula::False,
            },
            (false, false) => a.clone().into(),
        },
        LexLt(x, y) => match (*x == var, *y == var) {
            (true, true) => Formula::False,
            // value < y  <=>  y > value
            (true, false) => lex_greater_than_const(*y, chars, domain),
            (false, true) => lex_less_than_const(*x, chars, domain),
            (false, false) => a.clone().into(),
        },
        StrEqConst(v, s) if *v == var => Formula::constant(chars.iter().copied().eq(s.chars())),
        BeginsConst(v, s) if *v == var => {
            let n = s.chars().count();
            Formula::constant(n <= chars.len() && chars[..n].iter().copied().eq(s.chars()))
        }
        _ => a.clone().into(),
    }
}

/// `C_l`: the knowledge constraint on `h` rewritten over `l`, minus the
/// inputs already tried.
pub fn project_to_low(
    c_h: &Formula,
    forbidden: &[String],
    domain: &StringDomain,
) -> Result<Formula, ConstraintError> {
    if c_h.free_vars().contains(&Var::Low) {
        return Err(ConstraintError::UnexpectedVariable(Var::Low));
    }
    let (high, low) = (domain.len(Var::High), domain.len(Var::Low));
    if high != low {
        return Err(ConstraintError::ProjectionLengthMismatch { high, low });
    }
    let mut conj = vec![c_h.rename(Var::High, Var::Low)];
    for s in forbidden {
        domain.check_word(Var::Low, s)?;
        conj.push(Atom::StrNeqConst(Var::Low, s.clone()).into());
    }
    Ok(Formula::and(conj).simplify())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_h(f: &Formula, d: &StringDomain) -> usize {
        let n = d.len(Var::High);
        let k = d.alphabet().len();
        let l: Vec<char> = vec![d.alphabet()[0]; d.len(Var::Low)];
        (0..k.pow(n as u32))
            .filter(|&mut_i| {
                let mut i = mut_i;
                let mut h = vec![' '; n];
                for p in (0..n).rev() {
                    h[p] = d.alphabet()[i % k];
                    i /= k;
                }
                f.eval(d, &h, &l)
            })
            .count()
    }

    #[test]
    fn substitutes_prefix_observation() {
        let d = StringDomain::digits(4);
        let psi2 = Formula::And(vec![
            Atom::CharEqVar(CharRef::new(Var::Low, 0), CharRef::new(Var::High, 0)).into(),
            Atom::CharNeqVar(CharRef::new(Var::Low, 1), CharRef::new(Var::High, 1)).into(),
        ]);
        let inst = psi2.substitute(Var::Low, "1058", &d).unwrap();
        assert_eq!(
            inst,
            Formula::And(vec![
                Atom::CharEqConst(CharRef::new(Var::High, 0), '1').into(),
                Atom::CharNeqConst(CharRef::new(Var::High, 1), '0').into(),
            ])
        );
        assert!(!inst.free_vars().contains(&Var::Low));
    }

    #[test]
    fn substitution_of_true_and_full_equality() {
        let d = StringDomain::digits(4);
        assert_eq!(
            Formula::True.substitute(Var::Low, "9999", &d).unwrap(),
            Formula::True
        );
        let eq: Formula = Atom::StrEqConst(Var::Low, "1058".into()).into();
        assert_eq!(eq.substitute(Var::Low, "1058", &d).unwrap(), Formula::True);
        assert_eq!(eq.substitute(Var::Low, "1059", &d).unwrap(), Formula::False);
    }

    #[test]
    fn lexicographic_substitution_counts() {
        // Frozen by enumeration over all 10^4 h: strings above "1000" number 8999.
        let d = StringDomain::digits(4);
        let lt: Formula = Atom::LexLt(Var::Low, Var::High).into();
        let inst = lt.substitute(Var::Low, "1000", &d).unwrap();
        assert!(inst.free_vars().iter().all(|&v| v == Var::High));
        assert_eq!(count_h(&inst, &d), 8999);
        let ge: Formula = Atom::LexGe(Var::High, Var::Low).into();
        assert_eq!(
            count_h(&ge.substitute(Var::Low, "1000", &d).unwrap(), &d),
            9000
        );
    }

    #[test]
    fn substitution_errors() {
        let d = StringDomain::digits(4);
        assert!(matches!(
            Formula::True.substitute(Var::Low, "123", &d),
            Err(ConstraintError::LengthMismatch { .. })
        ));
        assert_eq!(
            Formula::True.substitute(Var::Low, "12a4", &d),
            Err(ConstraintError::CharNotInAlphabet('a'))
        );
    }

    #[test]
    fn projection_renames_and_excludes() {
        let d = StringDomain::new("ABCDE".chars(), 4, 4).unwrap();
        let c_h = Formula::And(vec![
            Atom::CharEqConst(CharRef::new(Var::High, 0), 'B').into(),
            Atom::CharNeqConst(CharRef::new(Var::High, 1), 'C').into(),
        ]);
        let c_l = project_to_low(&c_h, &["BCDE".to_string()], &d).unwrap();
        assert_eq!(
            c_l,
            Formula::And(vec![
                Atom::CharEqConst(CharRef::new(Var::Low, 0), 'B').into(),
                Atom::CharNeqConst(CharRef::new(Var::Low, 1), 'C').into(),
                Atom::StrNeqConst(Var::Low, "BCDE".into()).into(),
            ])
        );
        assert_eq!(
            project_to_low(&Formula::True, &[], &d).unwrap(),
            Formula::True
        );
    }

    #[test]
    fn projection_requires_equal_lengths_and_high_only() {
        let d = StringDomain::lowercase(8, 1);
        assert_eq!(
            project_to_low(&Formula::True, &[], &d),
            Err(ConstraintError::ProjectionLengthMismatch { high: 8, low: 1 })
        );
        let d = StringDomain::digits(2);
        let f: Formula = Atom::LexLt(Var::Low, Var::High).into();
        assert_eq!(
            project_to_low(&f, &[], &d),
            Err(ConstraintError::UnexpectedVariable(Var::Low))
        );
    }
}
