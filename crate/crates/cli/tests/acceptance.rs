//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sidesynth::commands::{attack_secrets, Analysis};
use sidesynth::config::{RunConfig, SecretSpec};
use sidesynth_core::attack::{
    class_counts, mutual_info, observe, run_attack, AttackTrace, HeuristicConfig, HeuristicKind,
    KnowledgeState, Outcome,
};
use sidesynth_core::automaton::{compile, count_models};
use sidesynth_core::constraint::{parse_formula, Atom, CharRef, Formula, StringDomain, Var};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn analysis(id: &str, alphabet: Option<&str>) -> Analysis {
    let cfg = RunConfig {
        benchmark: Some(id.into()),
        alphabet: alphabet.map(String::from),
        ..Default::default()
    };
    Analysis::run(&cfg).unwrap_or_else(|e| panic!("analysing {id}: {e:#}"))
}

fn heuristic(kind: HeuristicKind, restricted: bool, seed: u64) -> HeuristicConfig {
    HeuristicConfig {
        kind,
        restricted,
        seed,
        time_limit: None,
        record_timing: false,
        ..Default::default()
    }
}

fn all_words(alphabet: &[char], len: usize) -> Vec<Vec<char>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&c| {
                    let mut v = w.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    out
}

fn random_word(alphabet: &[char], len: usize, rng: &mut ChaCha8Rng) -> String {
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect()
}

fn entropy_matches_counts(trace: &AttackTrace) -> bool {
    trace.steps.iter().all(|s| {
        let exact: f64 = s.model_count.to_string().parse::<f64>().unwrap().log2();
        (s.entropy_bits - exact).abs() <= 1e-9
    })
}

fn non_increasing(trace: &AttackTrace) -> bool {
    let mut prev = trace.h_init;
    trace.steps.iter().all(|s| {
        let ok = s.entropy_bits <= prev;
        prev = s.entropy_bits;
        ok
    })
}

// Observation classes of the PIN checker against the hand-written prefix
// constraints, over every secret for 50 random inputs.
fn pin_classes() -> Verdict {
    let start = Instant::now();
    let a = analysis("CHECKPIN", None);
    let elapsed = start.elapsed();
    let d = &a.subject.domain;
    if a.classes.len() != 5 {
        return verdict(false, format!("{} classes", a.classes.len()));
    }
    let reference: Vec<Formula> = (0..5)
        .map(|k| {
            let mut parts: Vec<String> = (0..k)
                .map(|i| format!("(= (charat l {i}) (charat h {i}))"))
                .collect();
            if k < 4 {
                parts.push(format!("(not (= (charat l {k}) (charat h {k})))"));
            }
            parse_formula(&format!("(and {})", parts.join(" ")), d).unwrap()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let secrets = all_words(d.alphabet(), 4);
    let mut mismatches = 0;
    for _ in 0..50 {
        let l: Vec<char> = random_word(d.alphabet(), 4, &mut rng).chars().collect();
        for h in &secrets {
            for (c, r) in a.classes.iter().zip(&reference) {
                if c.formula.eval(d, h, &l) != r.eval(d, h, &l) {
                    mismatches += 1;
                }
            }
        }
    }
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("5 classes, {mismatches} disagreements over 50 inputs x 10^4 secrets, analysis {elapsed:.2?}"),
    )
}

fn structural_counts() -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for (id, paths, classes) in [("PCI", 5, 5), ("PCS", 5, 1), ("SE", 9, 9), ("SI", 2, 2)] {
        let a = analysis(id, None);
        let good = a.paths == paths && a.classes.len() == classes;
        ok &= good;
        notes.push(format!("{id} {}/{}", a.paths, a.classes.len()));
    }
    let sci = analysis("SCI", None);
    let sci_ok = sci.paths >= 10 * sci.classes.len();
    ok &= sci_ok;
    notes.push(format!("SCI {}/{}", sci.paths, sci.classes.len()));
    let start = Instant::now();
    let ed = analysis("ED", None);
    let t = start.elapsed();
    let ed_ok = ed.paths == 2170 && t < Duration::from_secs(120);
    ok &= ed_ok;
    notes.push(format!(
        "ED {}/{} in {t:.2?} (2170 paths required)",
        ed.paths,
        ed.classes.len()
    ));
    verdict(ok, notes.join(", "))
}

fn pin_attack() -> Verdict {
    let start = Instant::now();
    let a = analysis("CHECKPIN", None);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let secrets: Vec<String> = (0..5)
        .map(|_| random_word(a.subject.domain.alphabet(), 4, &mut rng))
        .collect();
    let runs = attack_secrets(&a, &secrets, &heuristic(HeuristicKind::M, true, 103)).unwrap();
    let elapsed = start.elapsed();
    let all_recovered = runs.iter().all(|r| {
        r.trace.outcome == Outcome::Complete
            && r.trace.h_final == 0.0
            && r.trace.recovered.as_ref() == Some(&r.secret)
    });
    let entropy_exact = runs.iter().all(|r| entropy_matches_counts(&r.trace));
    let mean = runs.iter().map(|r| r.trace.steps.len()).sum::<usize>() as f64 / runs.len() as f64;
    verdict(
        all_recovered && entropy_exact && mean <= 40.0 && elapsed < Duration::from_secs(60),
        format!("5/5 complete: {all_recovered}, mean steps {mean:.1}, entropy = log2(count): {entropy_exact}, {elapsed:.2?}"),
    )
}

fn constant_time_null() -> Verdict {
    let a = analysis("PCS", None);
    let expected = 4.0 * 26f64.log2();
    let full = BigUint::from(26u32).pow(4);
    let mut ok = true;
    let mut finals = Vec::new();
    for (kind, restricted) in [
        (HeuristicKind::M, true),
        (HeuristicKind::Ra, false),
        (HeuristicKind::Ra, true),
        (HeuristicKind::Sa, true),
        (HeuristicKind::Ga, true),
    ] {
        let runs = attack_secrets(
            &a,
            &["zebu".into(), "quip".into()],
            &heuristic(kind, restricted, 104),
        )
        .unwrap();
        for r in runs {
            ok &= matches!(r.trace.outcome, Outcome::Incomplete(_))
                && *r.trace.final_count.value() == full
                && r.trace.h_final == r.trace.h_init
                && (r.trace.h_final - expected).abs() < 1e-12;
            finals.push(r.trace.h_final);
        }
    }
    verdict(
        ok,
        format!(
            "final entropy {:.4} bits in all {} runs, count 26^4 kept",
            finals[0],
            finals.len()
        ),
    )
}

fn random_atom(rng: &mut ChaCha8Rng, alphabet: &[char], len: usize) -> Formula {
    let c = |rng: &mut ChaCha8Rng| alphabet[rng.gen_range(0..alphabet.len())];
    let i = |rng: &mut ChaCha8Rng| rng.gen_range(0..len);
    let word = |rng: &mut ChaCha8Rng, n: usize| -> String {
        (0..n)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect()
    };
    let h = |idx| CharRef::new(Var::High, idx);
    let atom = match rng.gen_range(0..7) {
        0 => Atom::CharEqConst(h(i(rng)), c(rng)),
        1 => Atom::CharNeqConst(h(i(rng)), c(rng)),
        2 => Atom::CharEqVar(h(i(rng)), h(i(rng))),
        3 => Atom::CharNeqVar(h(i(rng)), h(i(rng))),
        4 => Atom::StrEqConst(Var::High, word(rng, len)),
        5 => {
            let n = rng.gen_range(0..=len);
            Atom::BeginsConst(Var::High, word(rng, n))
        }
        // Ordering against a fixed input, as it appears after substitution.
        _ => {
            let l = word(rng, len);
            let lt = Formula::Atom(Atom::LexLt(Var::High, Var::Low));
            let d = StringDomain::new(alphabet.iter().copied(), len, len).unwrap();
            return lt.substitute(Var::Low, &l, &d).unwrap();
        }
    };
    atom.into()
}

fn random_formula(rng: &mut ChaCha8Rng, alphabet: &[char], len: usize, depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        return random_atom(rng, alphabet, len);
    }
    match rng.gen_range(0..3) {
        0 => Formula::Not(Box::new(random_formula(rng, alphabet, len, depth - 1))),
        1 => Formula::And(
            (0..rng.gen_range(2..4))
                .map(|_| random_formula(rng, alphabet, len, depth - 1))
                .collect(),
        ),
        _ => Formula::Or(
            (0..rng.gen_range(2..4))
                .map(|_| random_formula(rng, alphabet, len, depth - 1))
                .collect(),
        ),
    }
}

fn counting_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut wrong = 0;
    let trials = 1500;
    for _ in 0..trials {
        let k = rng.gen_range(1..=4);
        let len = rng.gen_range(1..=3);
        let alphabet: Vec<char> = "abcd".chars().take(k).collect();
        let d = StringDomain::new(alphabet.iter().copied(), len, len).unwrap();
        let f = random_formula(&mut rng, &alphabet, len, 3);
        let dfa = compile(&f, &d).unwrap();
        let low = vec![alphabet[0]; len];
        let brute = all_words(&alphabet, len)
            .iter()
            .filter(|h| f.eval(&d, h, &low))
            .count();
        if count_models(&dfa, len).value() != &BigUint::from(brute) {
            wrong += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        wrong == 0 && t < Duration::from_secs(30),
        format!("{trials} formulas, {wrong} count mismatches, {t:.2?}"),
    )
}

fn partition_identity() -> Verdict {
    let ids = [
        "CHECKPIN", "PCI", "PCS", "SE", "SI", "SCI", "IO", "CO", "ED3",
    ];
    let analyses: Vec<Analysis> = ids.iter().map(|id| analysis(id, None)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    for _ in 0..100 {
        let a = &analyses[rng.gen_range(0..analyses.len())];
        let d = &a.subject.domain;
        let secret = random_word(d.alphabet(), d.len(Var::High), &mut rng);
        let mut ks = KnowledgeState::new(d);
        for _ in 0..rng.gen_range(0..4) {
            let l = random_word(d.alphabet(), d.len(Var::Low), &mut rng);
            let class = observe(&a.target(), &secret, &l).unwrap();
            ks = ks.update(&a.classes[class], &l).unwrap();
        }
        let l = random_word(d.alphabet(), d.len(Var::Low), &mut rng);
        match class_counts(&ks, &a.classes, &l) {
            Ok(counts) => {
                let sum: BigUint = counts.iter().map(|c| c.value()).sum();
                if &sum != ks.count().value() {
                    violations += 1;
                }
            }
            Err(_) => violations += 1,
        }
    }
    verdict(
        violations == 0,
        format!(
            "100 triples over {} benchmarks, {violations} violations",
            ids.len()
        ),
    )
}

fn pin_mutual_information() -> Verdict {
    let a = analysis("CHECKPIN", None);
    let d = &a.subject.domain;
    let ks = KnowledgeState::new(d);
    let secrets = all_words(d.alphabet(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0f64;
    let mut values = Vec::new();
    for _ in 0..20 {
        let l = random_word(d.alphabet(), 4, &mut rng);
        // Brute force: run the program on every secret and tally classes.
        let mut tally = vec![0u64; a.classes.len()];
        for h in &secrets {
            let h: String = h.iter().collect();
            tally[observe(&a.target(), &h, &l).unwrap()] += 1;
        }
        let m = secrets.len() as f64;
        let brute = m.log2()
            - tally
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| c as f64 / m * (c as f64).log2())
                .sum::<f64>();
        let v = mutual_info(&ks, &a.classes, &l).unwrap().value();
        worst = worst.max((v - brute).abs());
        values.push(v);
    }
    let spread = values.iter().cloned().fold(f64::MIN, f64::max)
        - values.iter().cloned().fold(f64::MAX, f64::min);
    let near = (values[0] - 0.5211).abs() < 5e-5;
    verdict(
        worst < 1e-6 && spread < 1e-9 && near,
        format!(
            "I = {:.6} bits, max error {worst:.1e}, spread {spread:.1e}",
            values[0]
        ),
    )
}

// Replays a trace and checks each input against C_l at the time it was chosen.
fn restricted_violations(a: &Analysis, trace: &AttackTrace) -> usize {
    let mut ks = KnowledgeState::new(&a.subject.domain);
    let mut bad = 0;
    for s in &trace.steps {
        if !ks.satisfies_low(&s.input) {
            bad += 1;
        }
        ks = ks.update(&a.classes[s.class], &s.input).unwrap();
    }
    bad
}

fn restricted_contract() -> Verdict {
    let mut inputs = 0;
    let mut bad = 0;
    for id in ["CHECKPIN", "SI", "SE", "CO"] {
        let a = analysis(id, None);
        let secrets = SecretSpec::Random(2)
            .resolve(&a.subject.domain, &mut ChaCha8Rng::seed_from_u64(8))
            .unwrap();
        for kind in [HeuristicKind::Ra, HeuristicKind::Sa, HeuristicKind::M] {
            let cfg = HeuristicConfig {
                step_limit: 60,
                ..heuristic(kind, true, 108)
            };
            for r in attack_secrets(&a, &secrets, &cfg).unwrap() {
                inputs += r.trace.steps.len();
                bad += restricted_violations(&a, &r.trace);
            }
        }
    }
    verdict(
        bad == 0,
        format!("{inputs} inputs checked, {bad} outside C_l"),
    )
}

fn monotone_and_deterministic() -> Verdict {
    let mut traces = 0;
    let mut rising = 0;
    let mut differing = 0;
    for id in ["CHECKPIN", "SI", "CO", "IO"] {
        let a = analysis(id, None);
        let secret = SecretSpec::Random(1)
            .resolve(&a.subject.domain, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        for kind in HeuristicKind::ALL {
            for restricted in [true, false] {
                let cfg = HeuristicConfig {
                    step_limit: 25,
                    ..heuristic(kind, restricted, 109)
                };
                let first = run_attack(
                    &a.target(),
                    KnowledgeState::new(&a.subject.domain),
                    &secret[0],
                    &cfg,
                )
                .unwrap();
                let second = run_attack(
                    &a.target(),
                    KnowledgeState::new(&a.subject.domain),
                    &secret[0],
                    &cfg,
                )
                .unwrap();
                traces += 1;
                if !non_increasing(&first) {
                    rising += 1;
                }
                if first.to_csv() != second.to_csv() {
                    differing += 1;
                }
            }
        }
    }
    verdict(
        rising == 0 && differing == 0,
        format!(
            "{traces} trace pairs, {rising} with rising entropy, {differing} not byte-identical"
        ),
    )
}

fn heuristic_direction() -> Verdict {
    let a = analysis("SI", None);
    let secrets = SecretSpec::Random(5)
        .resolve(&a.subject.domain, &mut ChaCha8Rng::seed_from_u64(10))
        .unwrap();
    let mut means = Vec::new();
    let mut all_complete = true;
    for (label, kind) in [
        ("M", HeuristicKind::M),
        ("RA-R", HeuristicKind::Ra),
        ("SA-R", HeuristicKind::Sa),
    ] {
        let cfg = HeuristicConfig {
            step_limit: 200,
            ..heuristic(kind, true, 110)
        };
        let runs = attack_secrets(&a, &secrets, &cfg).unwrap();
        if kind != HeuristicKind::M {
            all_complete &= runs.iter().all(|r| r.trace.h_final == 0.0);
        }
        let mean =
            runs.iter().map(|r| r.trace.steps.len()).sum::<usize>() as f64 / runs.len() as f64;
        means.push((label, mean));
    }
    let m = means[0].1;
    let ok = all_complete && means[1..].iter().all(|&(_, s)| s <= m);
    let detail: Vec<String> = means.iter().map(|(l, s)| format!("{l} {s:.1}")).collect();
    verdict(
        ok,
        format!("mean steps over 5 secrets: {}", detail.join(", ")),
    )
}

type Check = fn() -> Verdict;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("observation constraints of the PIN check", pin_classes),
        ("path and class counts", structural_counts),
        ("end-to-end PIN attack", pin_attack),
        ("constant-time check leaks nothing", constant_time_null),
        ("automaton counts equal enumeration", counting_oracle),
        ("class counts partition the knowledge", partition_identity),
        (
            "mutual information of the PIN check",
            pin_mutual_information,
        ),
        ("restricted inputs satisfy C_l", restricted_contract),
        (
            "monotone entropy and deterministic traces",
            monotone_and_deterministic,
        ),
        (
            "restricted search beats single models on SI",
            heuristic_direction,
        ),
    ];
    let mut failed = 0;
    for (n, (title, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} - {title}: {} [{:.1?}]",
            n + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
