use std::fmt;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::automaton::ModelCount;
use crate::constraint::StringDomain;
use crate::symexec::{class_of_cost, run_concrete, CostModel, ObservationConstraint, Program};

use super::{
    choose_input, AttackError, CandidateSpace, HeuristicConfig, KnowledgeState, Objective,
};

// Expected gains at or below this count as no gain.
const GAIN_EPSILON: f64 = 1e-9;

/// The program under attack together with its observation classes.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a> {
    pub program: &'a Program,
    pub cost_model: &'a CostModel,
    pub classes: &'a [ObservationConstraint],
    pub domain: &'a StringDomain,
}

/// Runs the program on `(secret, l)` and returns the index of the class its
/// cost falls in.
pub fn observe(target: &Target<'_>, secret: &str, l: &str) -> Result<usize, AttackError> {
    let run = run_concrete(target.program, target.domain, secret, l, target.cost_model)?;
    class_of_cost(target.classes, run.cost).ok_or(AttackError::UnknownObservation(run.cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncompleteReason {
    StepLimit,
    TimeLimit,
    /// Every candidate input has been tried.
    Exhausted,
    /// Several consecutive steps offered no expected gain.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Incomplete(IncompleteReason),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Complete => f.write_str("complete"),
            Outcome::Incomplete(r) => {
                let reason = match r {
                    IncompleteReason::StepLimit => "step limit",
                    IncompleteReason::TimeLimit => "time limit",
                    IncompleteReason::Exhausted => "inputs exhausted",
                    IncompleteReason::Stalled => "no further gain",
                };
                write!(f, "incomplete ({reason})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based.
    pub step: usize,
    pub input: String,
    /// Cost label of the observed class.
    pub observation: u64,
    pub class: usize,
    pub entropy_bits: f64,
    pub model_count: ModelCount,
    /// Expected gain of the input when it was chosen.
    pub expected_gain: f64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone)]
pub struct AttackTrace {
    pub steps: Vec<StepRecord>,
    pub h_init: f64,
    pub h_final: f64,
    pub final_count: ModelCount,
    pub outcome: Outcome,
    /// The secret, when the attack narrowed it down to one value.
    pub recovered: Option<String>,
    /// Knowledge after the last step.
    pub knowledge: KnowledgeState,
}

/// Attacks `secret` adaptively: each step picks an input with the configured
/// heuristic, observes the program's cost class and conjoins what it reveals.
pub fn run_attack(
    target: &Target<'_>,
    ks0: KnowledgeState,
    secret: &str,
    cfg: &HeuristicConfig,
) -> Result<AttackTrace, AttackError> {
    cfg.validate()?;
    if !ks0.is_consistent(secret) {
        return Err(AttackError::SecretInconsistent(secret.to_string()));
    }
    let start = Instant::now();
    let budget = cfg.time_limit.map(Duration::from_secs_f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h_init = ks0.entropy()?.value();
    let mut ks = ks0;
    let mut steps = Vec::new();
    let mut stalled = 0;
    let outcome = loop {
        if *ks.count() == ModelCount::from(1) {
            break Outcome::Complete;
        }
        if steps.len() >= cfg.step_limit {
            break Outcome::Incomplete(IncompleteReason::StepLimit);
        }
        if budget.is_some_and(|b| start.elapsed() >= b) {
            break Outcome::Incomplete(IncompleteReason::TimeLimit);
        }
        let space = CandidateSpace::new(&ks, cfg.restricted)?;
        if space.is_exhausted() {
            break Outcome::Incomplete(IncompleteReason::Exhausted);
        }
        let choice = {
            let mut obj = Objective::new(&ks, target.classes);
            choose_input(&space, &mut obj, cfg, &mut rng)?
        };
        let class = observe(target, secret, &choice.input)?;
        ks = ks.update(&target.classes[class], &choice.input)?;
        if !ks.is_consistent(secret) {
            return Err(AttackError::SecretInconsistent(secret.to_string()));
        }
        steps.push(StepRecord {
            step: steps.len() + 1,
            input: choice.input,
            observation: target.classes[class].observation,
            class,
            entropy_bits: ks.entropy()?.value(),
            model_count: ks.count().clone(),
            expected_gain: choice.gain,
            elapsed_ms: if cfg.record_timing {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
        });
        if choice.gain <= GAIN_EPSILON {
            stalled += 1;
            if stalled >= cfg.stall_steps {
                break Outcome::Incomplete(IncompleteReason::Stalled);
            }
        } else {
            stalled = 0;
        }
    };
    Ok(AttackTrace {
        h_init,
        h_final: ks.entropy()?.value(),
        final_count: ks.count().clone(),
        outcome,
        recovered: ks.recovered(),
        knowledge: ks,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::HeuristicKind;
    use crate::symexec::{merge_observations, parse_program, sym_exec};

    const PIN: &str = "program pin (h: string[4], l: string[4]) {
        for i in 0..4 {
            if (h[i] != l[i]) { return false; }
        }
        return true;
    }";

    const FLAT: &str = "program flat (h: string[4], l: string[4]) {
        let ok = true;
        for i in 0..4 {
            if (h[i] != l[i]) { ok = false; } else { ok = ok; }
        }
        return ok;
    }";

    fn setup(src: &str, d: &StringDomain) -> (Program, CostModel, Vec<ObservationConstraint>) {
        let p = parse_program(src).unwrap();
        let cm = CostModel::unit();
        let classes = merge_observations(&sym_exec(&p, d, &cm).unwrap(), 0);
        (p, cm, classes)
    }

    #[test]
    fn observations_follow_the_common_prefix() {
        let d = StringDomain::digits(4);
        let (p, cm, classes) = setup(PIN, &d);
        let t = Target {
            program: &p,
            cost_model: &cm,
            classes: &classes,
            domain: &d,
        };
        assert_eq!(observe(&t, "1337", "8229").unwrap(), 0);
        assert_eq!(observe(&t, "1337", "1058").unwrap(), 1);
        assert_eq!(observe(&t, "1337", "1337").unwrap(), 4);
    }

    #[test]
    fn pin_attack_recovers_the_secret() {
        let d = StringDomain::digits(4);
        let (p, cm, classes) = setup(PIN, &d);
        let t = Target {
            program: &p,
            cost_model: &cm,
            classes: &classes,
            domain: &d,
        };
        let cfg = HeuristicConfig {
            seed: 11,
            ..Default::default()
        };
        let trace = run_attack(&t, KnowledgeState::new(&d), "1337", &cfg).unwrap();
        assert_eq!(trace.outcome, Outcome::Complete);
        assert_eq!(trace.recovered.as_deref(), Some("1337"));
        assert!(trace.steps.len() <= 37);
        assert!(trace
            .steps
            .windows(2)
            .all(|w| w[1].entropy_bits <= w[0].entropy_bits));
        assert_eq!(trace.h_final, 0.0);
    }

    #[test]
    fn constant_time_check_leaks_nothing() {
        let d = StringDomain::digits(4);
        let (p, cm, classes) = setup(FLAT, &d);
        assert_eq!(classes.len(), 1);
        let t = Target {
            program: &p,
            cost_model: &cm,
            classes: &classes,
            domain: &d,
        };
        for kind in HeuristicKind::ALL {
            let cfg = HeuristicConfig {
                kind,
                ..Default::default()
            };
            let trace = run_attack(&t, KnowledgeState::new(&d), "1337", &cfg).unwrap();
            assert_eq!(
                trace.outcome,
                Outcome::Incomplete(IncompleteReason::Stalled)
            );
            assert_eq!(trace.h_final, trace.h_init);
        }
    }

    #[test]
    fn zero_step_budget_leaves_knowledge_untouched() {
        let d = StringDomain::digits(4);
        let (p, cm, classes) = setup(PIN, &d);
        let t = Target {
            program: &p,
            cost_model: &cm,
            classes: &classes,
            domain: &d,
        };
        let cfg = HeuristicConfig {
            step_limit: 0,
            ..Default::default()
        };
        let trace = run_attack(&t, KnowledgeState::new(&d), "1337", &cfg).unwrap();
        assert_eq!(
            trace.outcome,
            Outcome::Incomplete(IncompleteReason::StepLimit)
        );
        assert!(trace.steps.is_empty());
        assert_eq!(trace.h_final, trace.h_init);
    }
}
