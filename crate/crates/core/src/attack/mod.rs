//! The adaptive attack: knowledge about the secret, the information-gain
//! objective, input-selection heuristics and the attack loop itself.

mod heuristics;
mod knowledge;
mod objective;
mod run;
mod trace;

use num_bigint::BigUint;
use thiserror::Error;

use crate::automaton::AutomatonError;
use crate::constraint::ConstraintError;
use crate::symexec::ExecError;

pub use heuristics::{
    attack_input_ga, attack_input_m, attack_input_ra, attack_input_sa, choose_input, crossover,
    get_input, get_neighbor_input, CandidateSpace, Choice, GaConfig, HeuristicConfig,
    HeuristicKind, SaConfig,
};
pub use knowledge::{EntropyBits, KnowledgeState};
pub use objective::{class_counts, mutual_info, Objective};
pub use run::{observe, run_attack, AttackTrace, IncompleteReason, Outcome, StepRecord, Target};
pub use trace::{Summary, TRACE_HEADER};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(
        "the knowledge constraint has no models left; observations contradict the constraints"
    )]
    Contradiction,
    #[error("secret {0:?} does not satisfy the knowledge constraint")]
    SecretInconsistent(String),
    #[error("class counts sum to {found} but the knowledge has {expected} models")]
    PartitionViolation { expected: BigUint, found: BigUint },
    #[error("no candidate inputs left")]
    Exhausted,
    #[error("cost {0} matches no observation class")]
    UnknownObservation(u64),
    #[error("invalid heuristic configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}
