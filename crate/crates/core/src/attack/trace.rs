use serde::{Deserialize, Serialize};

use super::{AttackTrace, HeuristicConfig};

pub const TRACE_HEADER: [&str; 7] = [
    "step",
    "input",
    "observation",
    "class",
    "entropy_bits",
    "model_count",
    "elapsed_ms",
];

impl AttackTrace {
    /// One row per step. Entropies are printed with 10 decimals.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRACE_HEADER).expect("in-memory write");
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.input.clone(),
                s.observation.to_string(),
                s.class.to_string(),
                format!("{:.10}", s.entropy_bits),
                s.model_count.to_string(),
                s.elapsed_ms.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn summary(&self, benchmark: &str, cfg: &HeuristicConfig) -> Summary {
        Summary {
            benchmark: benchmark.to_string(),
            heuristic: cfg.kind.name().to_string(),
            restricted: cfg.restricted,
            seed: cfg.seed,
            h_init_bits: self.h_init,
            h_final_bits: self.h_final,
            steps: self.steps.len(),
            outcome: self.outcome.to_string(),
        }
    }
}

/// Per-run summary written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub benchmark: String,
    pub heuristic: String,
    pub restricted: bool,
    pub seed: u64,
    pub h_init_bits: f64,
    pub h_final_bits: f64,
    pub steps: usize,
    pub outcome: String,
}
