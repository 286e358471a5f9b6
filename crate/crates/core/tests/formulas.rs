use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sidesynth_core::automaton::{compile, count_models, KnowledgeAutomaton, ModelSampler};
use sidesynth_core::constraint::{parse_formula, Atom, CharRef, Formula, StringDomain, Var};

const ALPHABET: [char; 3] = ['a', 'b', 'c'];
const LEN: usize = 3;

fn domain() -> StringDomain {
    StringDomain::new(ALPHABET, LEN, LEN).unwrap()
}

fn words() -> Vec<Vec<char>> {
    let mut out = vec![Vec::new()];
    for _ in 0..LEN {
        out = out
            .into_iter()
            .flat_map(|w| {
                ALPHABET.iter().map(move |&c| {
                    let mut v = w.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

fn var() -> impl Strategy<Value = Var> {
    prop_oneof![Just(Var::High), Just(Var::Low)]
}

fn char_ref() -> impl Strategy<Value = CharRef> {
    (var(), 0..LEN).prop_map(|(v, i)| CharRef::new(v, i))
}

fn letter() -> impl Strategy<Value = char> {
    prop::sample::select(ALPHABET.to_vec())
}

fn word(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(letter(), 0..=max).prop_map(|v| v.into_iter().collect())
}

fn full_word() -> impl Strategy<Value = String> {
    prop::collection::vec(letter(), LEN).prop_map(|v| v.into_iter().collect())
}

fn atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        (char_ref(), letter()).prop_map(|(r, c)| Atom::CharEqConst(r, c)),
        (char_ref(), letter()).prop_map(|(r, c)| Atom::CharNeqConst(r, c)),
        (char_ref(), char_ref()).prop_map(|(a, b)| Atom::CharEqVar(a, b)),
        (char_ref(), char_ref()).prop_map(|(a, b)| Atom::CharNeqVar(a, b)),
        (var(), var()).prop_map(|(a, b)| Atom::LexLt(a, b)),
        (var(), var()).prop_map(|(a, b)| Atom::LexGe(a, b)),
        (var(), full_word()).prop_map(|(v, s)| Atom::StrEqConst(v, s)),
        (var(), full_word()).prop_map(|(v, s)| Atom::StrNeqConst(v, s)),
        (var(), word(LEN)).prop_map(|(v, s)| Atom::BeginsConst(v, s)),
        (var(), word(LEN)).prop_map(|(v, s)| Atom::NotBeginsConst(v, s)),
    ]
}

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        1 => Just(Formula::True),
        1 => Just(Formula::False),
        8 => atom().prop_map(Formula::Atom),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 0..4).prop_map(Formula::And),
            prop::collection::vec(inner, 0..4).prop_map(Formula::Or),
        ]
    })
}

/// A formula over `h` alone: `formula()` with a fixed input substituted.
fn high_formula() -> impl Strategy<Value = Formula> {
    (formula(), full_word()).prop_map(|(f, l)| f.substitute(Var::Low, &l, &domain()).unwrap())
}

/// Conjunctions and disjunctions of single-position tests on `h`.
fn positional_formula() -> impl Strategy<Value = Formula> {
    let test = (0..LEN, letter(), any::<bool>()).prop_map(|(i, c, eq)| {
        let r = CharRef::new(Var::High, i);
        Formula::Atom(if eq {
            Atom::CharEqConst(r, c)
        } else {
            Atom::CharNeqConst(r, c)
        })
    });
    test.prop_recursive(2, 16, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Formula::And),
            prop::collection::vec(inner, 1..4).prop_map(Formula::Or),
        ]
    })
}

fn brute_count(f: &Formula) -> BigUint {
    let d = domain();
    let l = vec!['a'; LEN];
    BigUint::from(words().iter().filter(|h| f.eval(&d, h, &l)).count())
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn substitution_agrees_with_evaluation(f in formula(), h in full_word(), l in full_word(), other in full_word()) {
        let d = domain();
        let expected = f.eval(&d, &chars(&h), &chars(&l));
        let g = f.substitute(Var::Low, &l, &d).unwrap();
        prop_assert!(!g.free_vars().contains(&Var::Low));
        prop_assert_eq!(g.eval(&d, &chars(&h), &chars(&other)), expected);
        let k = f.substitute(Var::High, &h, &d).unwrap();
        prop_assert_eq!(k.eval(&d, &chars(&other), &chars(&l)), expected);
    }

    #[test]
    fn substitutions_commute(f in formula(), h in full_word(), l in full_word()) {
        let d = domain();
        let a = f.substitute(Var::Low, &l, &d).unwrap().substitute(Var::High, &h, &d).unwrap();
        let b = f.substitute(Var::High, &h, &d).unwrap().substitute(Var::Low, &l, &d).unwrap();
        let expected = Formula::constant(f.eval(&d, &chars(&h), &chars(&l)));
        prop_assert_eq!(&a, &expected);
        prop_assert_eq!(&b, &expected);
    }

    #[test]
    fn simplify_preserves_meaning_and_is_idempotent(f in formula(), h in full_word(), l in full_word()) {
        let d = domain();
        let s = f.simplify();
        prop_assert_eq!(s.eval(&d, &chars(&h), &chars(&l)), f.eval(&d, &chars(&h), &chars(&l)));
        prop_assert_eq!(s.simplify(), s);
    }

    #[test]
    fn printing_round_trips(f in formula(), h in full_word(), l in full_word()) {
        let d = domain();
        // Parsing normalizes (double negations, say), so the text is stable
        // from the second round on.
        let back = parse_formula(&f.to_string(), &d).unwrap();
        let text = back.to_string();
        prop_assert_eq!(parse_formula(&text, &d).unwrap().to_string(), text);
        prop_assert_eq!(back.eval(&d, &chars(&h), &chars(&l)), f.eval(&d, &chars(&h), &chars(&l)));
    }

    #[test]
    fn automaton_counts_match_enumeration(f in high_formula()) {
        let dfa = compile(&f, &domain()).unwrap();
        prop_assert_eq!(count_models(&dfa, LEN).value().clone(), brute_count(&f));
    }

    #[test]
    fn positional_fast_path_matches_enumeration(f in positional_formula()) {
        let d = domain();
        let dfa = compile(&f, &d).unwrap();
        prop_assert_eq!(count_models(&dfa, LEN).value().clone(), brute_count(&f));
        for w in words() {
            prop_assert_eq!(dfa.accepts(&w), f.eval(&d, &w, &['a'; LEN]));
        }
    }

    #[test]
    fn boolean_operations_count_consistently(f in high_formula(), g in high_formula()) {
        let d = domain();
        let (a, b) = (compile(&f, &d).unwrap(), compile(&g, &d).unwrap());
        let n = |x: &sidesynth_core::automaton::Dfa| count_models(x, LEN).value().clone();
        let both = n(&a.intersect(&b).unwrap());
        let either = n(&a.union(&b).unwrap());
        prop_assert_eq!(&both + &either, n(&a) + n(&b));
        prop_assert_eq!(n(&a.complement()) + n(&a), BigUint::from(27u32));
        prop_assert_eq!(both, brute_count(&Formula::And(vec![f, g])));
    }

    #[test]
    fn minimization_keeps_the_language(f in high_formula()) {
        let dfa = compile(&f, &domain()).unwrap();
        let min = dfa.minimize();
        prop_assert!(min.num_states() <= dfa.num_states());
        prop_assert_eq!(min.minimize().num_states(), min.num_states());
        prop_assert_eq!(count_models(&min, LEN), count_models(&dfa, LEN));
        for w in words() {
            prop_assert_eq!(min.accepts(&w), dfa.accepts(&w));
        }
    }

    #[test]
    fn conjoining_is_order_independent(f in high_formula(), g in high_formula()) {
        let d = domain();
        let k = KnowledgeAutomaton::full(&d);
        let fg = k.conjoin(&f, &d).unwrap().conjoin(&g, &d).unwrap();
        let gf = k.conjoin(&g, &d).unwrap().conjoin(&f, &d).unwrap();
        prop_assert_eq!(fg.count(), gf.count());
        for w in words() {
            let s: String = w.iter().collect();
            prop_assert_eq!(fg.accepts(&s), gf.accepts(&s));
        }
    }
}

#[test]
fn sampling_is_uniform() {
    let d = domain();
    let f = parse_formula(
        r#"(and (or (begins h "a") (= (charat h 2) "c")) (not (= (charat h 1) "b")) (not (= h "acc")))"#,
        &d,
    )
    .unwrap();
    let sampler = ModelSampler::new(compile(&f, &d).unwrap(), LEN);
    let models: Vec<String> = words()
        .into_iter()
        .filter(|w| f.eval(&d, w, &['a'; LEN]))
        .map(|w| w.into_iter().collect())
        .collect();
    assert_eq!(sampler.count().value(), &BigUint::from(models.len()));
    let draws = 200 * models.len();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen = vec![0usize; models.len()];
    for _ in 0..draws {
        let s = sampler.sample(&mut rng).unwrap();
        seen[models
            .iter()
            .position(|m| *m == s)
            .expect("sample is a model")] += 1;
    }
    let expected = draws as f64 / models.len() as f64;
    let chi2: f64 = seen
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    // Upper 0.1% point of chi-square with 15 degrees of freedom; fewer
    // categories only lower it.
    assert!(
        chi2 < 37.7,
        "chi-square {chi2} over {} models",
        models.len()
    );
}
