use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::ModelSampler;
use crate::constraint::{StringDomain, Var};

use super::{AttackError, KnowledgeState, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    /// One random model of `C_l`, no objective search.
    M,
    /// Best of `K` random candidates.
    Ra,
    /// Simulated annealing over single-character mutations.
    Sa,
    /// Genetic search with crossover and mutation.
    Ga,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] = [
        HeuristicKind::M,
        HeuristicKind::Ra,
        HeuristicKind::Sa,
        HeuristicKind::Ga,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::M => "m",
            HeuristicKind::Ra => "ra",
            HeuristicKind::Sa => "sa",
            HeuristicKind::Ga => "ga",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown heuristic {s:?} (expected m, ra, sa or ga)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub t0: f64,
    pub t_min: f64,
    /// Fraction of the temperature removed per step.
    pub cooling: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            t0: 10.0,
            t_min: 0.001,
            cooling: 0.1,
        }
    }
}

impl SaConfig {
    /// Number of proposals one annealing run makes.
    pub fn iterations(&self) -> usize {
        let mut t = self.t0;
        let mut n = 0;
        while t >= self.t_min {
            t -= t * self.cooling;
            n += 1;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub pop_size: usize,
    pub offspring_size: usize,
    /// Survivors carried into the next generation.
    pub best_n: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            pop_size: 20,
            offspring_size: 10,
            best_n: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub kind: HeuristicKind,
    /// Draw candidates from `C_l` only.
    pub restricted: bool,
    /// Candidates per step for RA, generations for GA.
    pub samples: usize,
    pub sa: SaConfig,
    pub ga: GaConfig,
    pub seed: u64,
    pub step_limit: usize,
    /// Wall-clock budget in seconds; `None` for unlimited.
    pub time_limit: Option<f64>,
    /// Stop after this many consecutive steps whose chosen input had no
    /// expected gain.
    pub stall_steps: usize,
    /// Mutation attempts before a restricted neighbour is resampled.
    pub neighbor_retries: usize,
    /// Record wall-clock times in traces; off gives byte-identical reruns.
    pub record_timing: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            kind: HeuristicKind::M,
            restricted: true,
            samples: 20,
            sa: SaConfig::default(),
            ga: GaConfig::default(),
            seed: 0,
            step_limit: 200,
            time_limit: Some(60.0),
            stall_steps: 3,
            neighbor_retries: 10,
            record_timing: true,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: &str| Err(AttackError::Config(m.into()));
        if self.samples == 0 {
            return bad("sample budget must be at least 1");
        }
        let sa = &self.sa;
        if !(sa.t0 > sa.t_min && sa.t_min > 0.0) {
            return bad("annealing needs t0 > t_min > 0");
        }
        if !(sa.cooling > 0.0 && sa.cooling < 1.0) {
            return bad("cooling rate must lie strictly between 0 and 1");
        }
        let ga = &self.ga;
        if ga.pop_size < 2 {
            return bad("population size must be at least 2");
        }
        if ga.best_n == 0 || ga.best_n > ga.pop_size {
            return bad("survivor count must lie between 1 and the population size");
        }
        if self.stall_steps == 0 {
            return bad("stall limit must be at least 1");
        }
        if self.time_limit.is_some_and(|t| t.is_nan() || t < 0.0) {
            return bad("time limit must be non-negative");
        }
        Ok(())
    }
}

/// Where candidate inputs come from in one attack step.
pub enum CandidateSpace {
    /// Models of `C_l`.
    Restricted {
        sampler: ModelSampler,
        length: usize,
    },
    /// Any string of `l`'s length.
    Unrestricted { alphabet: Vec<char>, length: usize },
}

impl CandidateSpace {
    pub fn new(ks: &KnowledgeState, restricted: bool) -> Result<Self, AttackError> {
        let length = ks.domain().len(Var::Low);
        Ok(if restricted {
            CandidateSpace::Restricted {
                sampler: ModelSampler::new(ks.low_automaton()?, length),
                length,
            }
        } else {
            CandidateSpace::Unrestricted {
                alphabet: ks.domain().alphabet().to_vec(),
                length,
            }
        })
    }

    pub fn is_restricted(&self) -> bool {
        matches!(self, CandidateSpace::Restricted { .. })
    }

    pub fn is_exhausted(&self) -> bool {
        match self {
            CandidateSpace::Restricted { sampler, .. } => sampler.count().is_zero(),
            CandidateSpace::Unrestricted { alphabet, .. } => alphabet.is_empty(),
        }
    }

    pub fn contains(&self, l: &str) -> bool {
        match self {
            CandidateSpace::Restricted { sampler, length } => {
                l.chars().count() == *length && sampler.dfa().accepts_str(l)
            }
            CandidateSpace::Unrestricted { alphabet, length } => {
                l.chars().count() == *length && l.chars().all(|c| alphabet.contains(&c))
            }
        }
    }

    /// A uniformly random candidate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<String, AttackError> {
        match self {
            CandidateSpace::Restricted { sampler, .. } => {
                sampler.sample(rng).map_err(|_| AttackError::Exhausted)
            }
            CandidateSpace::Unrestricted { alphabet, length } => Ok((0..*length)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect()),
        }
    }
}

/// Next input chosen by a heuristic, with its expected information gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub input: String,
    pub gain: f64,
}

pub fn get_input<R: Rng + ?Sized>(
    space: &CandidateSpace,
    rng: &mut R,
) -> Result<String, AttackError> {
    space.sample(rng)
}

/// `current` with one position changed to a different character. In a
/// restricted space the mutation is retried `retries` times and then
/// replaced by a fresh sample, so the result is always a candidate.
pub fn get_neighbor_input<R: Rng + ?Sized>(
    current: &str,
    space: &CandidateSpace,
    domain: &StringDomain,
    retries: usize,
    rng: &mut R,
) -> Result<String, AttackError> {
    let attempts = if space.is_restricted() {
        retries.max(1)
    } else {
        1
    };
    for _ in 0..attempts {
        let mutant = mutate_one(current, domain.alphabet(), rng);
        if space.contains(&mutant) {
            return Ok(mutant);
        }
    }
    space.sample(rng)
}

fn mutate_one<R: Rng + ?Sized>(current: &str, alphabet: &[char], rng: &mut R) -> String {
    let mut chars: Vec<char> = current.chars().collect();
    if chars.is_empty() || alphabet.len() < 2 {
        return current.to_string();
    }
    let i = rng.gen_range(0..chars.len());
    chars[i] = other_char(chars[i], alphabet, rng);
    chars.into_iter().collect()
}

// Uniform over the alphabet minus `c`.
fn other_char<R: Rng + ?Sized>(c: char, alphabet: &[char], rng: &mut R) -> char {
    let pos = alphabet.iter().position(|&a| a == c);
    let choices = alphabet.len() - pos.is_some() as usize;
    let mut j = rng.gen_range(0..choices);
    if pos.is_some_and(|p| j >= p) {
        j += 1;
    }
    alphabet[j]
}

/// A random model of `C_l`, taken as is.
pub fn attack_input_m<R: Rng + ?Sized>(
    space: &CandidateSpace,
    obj: &mut Objective<'_>,
    rng: &mut R,
) -> Result<Choice, AttackError> {
    let input = get_input(space, rng)?;
    let gain = obj.eval(&input)?;
    Ok(Choice { input, gain })
}

/// Best of `cfg.samples` random candidates; the first drawn wins ties.
pub fn attack_input_ra<R: Rng + ?Sized>(
    space: &CandidateSpace,
    obj: &mut Objective<'_>,
    cfg: &HeuristicConfig,
    rng: &mut R,
) -> Result<Choice, AttackError> {
    let candidates = (0..cfg.samples)
        .map(|_| get_input(space, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let values = obj.eval_all(&candidates)?;
    let best = argmax(&values);
    Ok(Choice {
        input: candidates[best].clone(),
        gain: values[best],
    })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Simulated annealing with multiplicative cooling; returns the best input
/// accepted during the walk.
pub fn attack_input_sa<R: Rng + ?Sized>(
    space: &CandidateSpace,
    obj: &mut Objective<'_>,
    cfg: &HeuristicConfig,
    rng: &mut R,
) -> Result<Choice, AttackError> {
    let domain = obj.knowledge().domain().clone();
    let mut current = get_input(space, rng)?;
    let mut value = obj.eval(&current)?;
    let mut best = Choice {
        input: current.clone(),
        gain: value,
    };
    let mut t = cfg.sa.t0;
    while t >= cfg.sa.t_min {
        let next = get_neighbor_input(&current, space, &domain, cfg.neighbor_retries, rng)?;
        let next_value = obj.eval(&next)?;
        if next_value > value || ((next_value - value) / t).exp() > rng.gen::<f64>() {
            current = next;
            value = next_value;
            if value > best.gain {
                best = Choice {
                    input: current.clone(),
                    gain: value,
                };
            }
        }
        t -= t * cfg.sa.cooling;
    }
    Ok(best)
}

/// Splices `a[..cut]` with `b[cut..]`.
pub fn crossover(a: &str, b: &str, cut: usize) -> String {
    a.chars().take(cut).chain(b.chars().skip(cut)).collect()
}

/// Genetic search for `cfg.samples` generations. Offspring may fall outside
/// `C_l`; they are scored like any other input.
pub fn attack_input_ga<R: Rng + ?Sized>(
    space: &CandidateSpace,
    obj: &mut Objective<'_>,
    cfg: &HeuristicConfig,
    rng: &mut R,
) -> Result<Choice, AttackError> {
    let ga = cfg.ga;
    if ga.pop_size < 2 {
        return Err(AttackError::Config(
            "population size must be at least 2".into(),
        ));
    }
    let alphabet = obj.knowledge().domain().alphabet().to_vec();
    let mut pop = (0..ga.pop_size)
        .map(|_| get_input(space, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut fit = obj.eval_all(&pop)?;
    let first = argmax(&fit);
    let mut best = Choice {
        input: pop[first].clone(),
        gain: fit[first],
    };
    for _ in 0..cfg.samples {
        let mut offspring = Vec::with_capacity(ga.offspring_size);
        for _ in 0..ga.offspring_size {
            let a = roulette(&fit, rng);
            let b = roulette(&fit, rng);
            let len = pop[a].chars().count();
            let cut = if len > 1 { rng.gen_range(1..len) } else { 0 };
            let child = crossover(&pop[a], &pop[b], cut);
            offspring.push(mutate_each(&child, &alphabet, rng));
        }
        let offspring_fit = obj.eval_all(&offspring)?;
        for (c, &v) in offspring.iter().zip(&offspring_fit) {
            if v > best.gain {
                best = Choice {
                    input: c.clone(),
                    gain: v,
                };
            }
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&i, &j| fit[j].total_cmp(&fit[i]));
        order.truncate(ga.best_n);
        let (mut next_pop, mut next_fit): (Vec<String>, Vec<f64>) =
            order.into_iter().map(|i| (pop[i].clone(), fit[i])).unzip();
        next_pop.extend(offspring);
        next_fit.extend(offspring_fit);
        pop = next_pop;
        fit = next_fit;
    }
    Ok(best)
}

// Fitness-proportional pick; uniform when no individual has positive fitness.
fn roulette<R: Rng + ?Sized>(fit: &[f64], rng: &mut R) -> usize {
    let total: f64 = fit.iter().map(|f| f.max(0.0)).sum();
    if total <= 0.0 {
        return rng.gen_range(0..fit.len());
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, f) in fit.iter().enumerate() {
        r -= f.max(0.0);
        if r < 0.0 {
            return i;
        }
    }
    fit.len() - 1
}

// Each position changes with probability 1/length.
fn mutate_each<R: Rng + ?Sized>(s: &str, alphabet: &[char], rng: &mut R) -> String {
    let n = s.chars().count();
    if n == 0 || alphabet.len() < 2 {
        return s.to_string();
    }
    let p = 1.0 / n as f64;
    s.chars()
        .map(|c| {
            if rng.gen::<f64>() < p {
                other_char(c, alphabet, rng)
            } else {
                c
            }
        })
        .collect()
}

/// Runs the heuristic selected by `cfg.kind`.
pub fn choose_input<R: Rng + ?Sized>(
    space: &CandidateSpace,
    obj: &mut Objective<'_>,
    cfg: &HeuristicConfig,
    rng: &mut R,
) -> Result<Choice, AttackError> {
    match cfg.kind {
        HeuristicKind::M => attack_input_m(space, obj, rng),
        HeuristicKind::Ra => attack_input_ra(space, obj, cfg, rng),
        HeuristicKind::Sa => attack_input_sa(space, obj, cfg, rng),
        HeuristicKind::Ga => attack_input_ga(space, obj, cfg, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{parse_formula, Formula};
    use crate::symexec::ObservationConstraint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prefix_classes(d: &StringDomain) -> Vec<ObservationConstraint> {
        let n = d.len(Var::High);
        (0..=n)
            .map(|k| {
                let mut conj: Vec<Formula> = (0..k)
                    .map(|i| {
                        parse_formula(&format!("(= (charat h {i}) (charat l {i}))"), d).unwrap()
                    })
                    .collect();
                if k < n {
                    conj.push(
                        parse_formula(&format!("(not (= (charat h {k}) (charat l {k})))"), d)
                            .unwrap(),
                    );
                }
                ObservationConstraint {
                    formula: Formula::and(conj),
                    observation: k as u64,
                    members: 1,
                    costs: vec![k as u64],
                }
            })
            .collect()
    }

    #[test]
    fn annealing_schedule_length() {
        assert_eq!(SaConfig::default().iterations(), 88);
    }

    #[test]
    fn crossover_and_neighbours() {
        assert_eq!(crossover("1337", "8229", 2), "1329");
        assert_eq!(crossover("8229", "1337", 2), "8237");
        let d = StringDomain::digits(4);
        let ks = KnowledgeState::new(&d);
        let space = CandidateSpace::new(&ks, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = get_neighbor_input("1337", &space, &d, 10, &mut rng).unwrap();
            assert_eq!(
                n.chars()
                    .zip("1337".chars())
                    .filter(|(a, b)| a != b)
                    .count(),
                1
            );
        }
        let bits = StringDomain::new("01".chars(), 1, 1).unwrap();
        let space = CandidateSpace::new(&KnowledgeState::new(&bits), false).unwrap();
        assert_eq!(
            get_neighbor_input("0", &space, &bits, 10, &mut rng).unwrap(),
            "1"
        );
    }

    #[test]
    fn restricted_neighbours_stay_in_space() {
        let d = StringDomain::digits(4);
        let ks = KnowledgeState::with_constraint(
            parse_formula(r#"(= (charat h 0) "1")"#, &d).unwrap(),
            &d,
        )
        .unwrap();
        let space = CandidateSpace::new(&ks, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = get_neighbor_input("1337", &space, &d, 3, &mut rng).unwrap();
            assert!(n.starts_with('1'));
            assert!(get_input(&space, &mut rng).unwrap().starts_with('1'));
        }
    }

    #[test]
    fn singleton_knowledge_forces_the_secret() {
        let d = StringDomain::digits(4);
        let psis = prefix_classes(&d);
        let ks = KnowledgeState::with_constraint(parse_formula(r#"(= h "4711")"#, &d).unwrap(), &d)
            .unwrap();
        let space = CandidateSpace::new(&ks, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in HeuristicKind::ALL {
            let cfg = HeuristicConfig {
                kind,
                ..Default::default()
            };
            let mut obj = Objective::new(&ks, &psis);
            let choice = choose_input(&space, &mut obj, &cfg, &mut rng).unwrap();
            if kind != HeuristicKind::Ga {
                assert_eq!(choice.input, "4711");
            }
            assert_eq!(choice.gain, 0.0);
        }
    }

    #[test]
    fn random_sampling_returns_the_best_drawn() {
        let d = StringDomain::lowercase(3, 3);
        let psis = prefix_classes(&d);
        let ks = KnowledgeState::new(&d).update(&psis[1], "abc").unwrap();
        let space = CandidateSpace::new(&ks, false).unwrap();
        let cfg = HeuristicConfig {
            kind: HeuristicKind::Ra,
            samples: 15,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut replay = rng.clone();
        let mut obj = Objective::new(&ks, &psis);
        let choice = attack_input_ra(&space, &mut obj, &cfg, &mut rng).unwrap();
        for _ in 0..15 {
            let c = get_input(&space, &mut replay).unwrap();
            assert!(obj.eval(&c).unwrap() <= choice.gain);
        }
    }

    #[test]
    fn config_validation() {
        assert!(HeuristicConfig::default().validate().is_ok());
        let mut cfg = HeuristicConfig::default();
        cfg.ga.pop_size = 1;
        assert!(matches!(cfg.validate(), Err(AttackError::Config(_))));
        let mut cfg = HeuristicConfig::default();
        cfg.sa.cooling = 1.0;
        assert!(cfg.validate().is_err());
        assert_eq!("SA".parse::<HeuristicKind>(), Ok(HeuristicKind::Sa));
        assert!("xx".parse::<HeuristicKind>().is_err());
    }
}
