use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::Mission;
use crate::planner::{falsify_independent, solve_cg, solve_dr, SolverConfig, Termination};

/// Seed offset separating the evaluation adversary from the planner's own draws.
pub const FALSIFY_SEED_OFFSET: u64 = 1_000_003;

/// Planning method compared by the benchmark protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    /// Counterexample-guided alternating solve.
    Cg,
    /// Domain randomization over a fixed number of uniform samples.
    Dr(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Cg => write!(f, "cg"),
            Method::Dr(n) => write!(f, "dr{n}"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "cg" {
            return Ok(Method::Cg);
        }
        match s.strip_prefix("dr").map(str::parse::<usize>) {
            Some(Ok(n)) if n >= 1 => Ok(Method::Dr(n)),
            _ => Err(format!("unknown method {s:?}, expected cg or dr<samples>")),
        }
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// One planning run followed by independent falsification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub seed: u64,
    pub method: Method,
    /// Lowest exact robustness the evaluation adversary found.
    pub worst_robustness: Option<f64>,
    pub satisfied: bool,
    pub worst_chi: Option<Vec<f64>>,
    /// Impulse along the trace at `worst_chi`.
    pub impulse: Option<f64>,
    /// Solver time only.
    pub wall_seconds: f64,
    pub rounds: usize,
    pub dataset_size: usize,
    pub counterexamples: usize,
    pub termination: Option<Termination>,
    pub theta: Option<Vec<f64>>,
    pub error: Option<String>,
}

/// Plans with `method` under `seed`, then falsifies the plan with `restarts`
/// uniform starts seeded by `seed + FALSIFY_SEED_OFFSET`. Failures are recorded,
/// not returned.
pub fn run_trial(
    mission: &Mission,
    method: Method,
    seed: u64,
    restarts: usize,
    workers: usize,
) -> Trial {
    let mut config: SolverConfig = mission.config().solver;
    config.seed = seed;
    config.theta.workers = workers;
    config.chi.workers = workers;
    let mut trial = Trial {
        seed,
        method,
        worst_robustness: None,
        satisfied: false,
        worst_chi: None,
        impulse: None,
        wall_seconds: 0.0,
        rounds: 0,
        dataset_size: 0,
        counterexamples: 0,
        termination: None,
        theta: None,
        error: None,
    };
    let started = Instant::now();
    let solved = match method {
        Method::Cg => solve_cg(mission, &config),
        Method::Dr(n) => solve_dr(mission, n, &config),
    };
    trial.wall_seconds = started.elapsed().as_secs_f64();
    let result = match solved {
        Ok(r) => r,
        Err(e) => {
            trial.error = Some(e.to_string());
            return trial;
        }
    };
    trial.rounds = result.rounds.len();
    trial.dataset_size = result.dataset.len();
    trial.counterexamples = result.dataset.counterexamples();
    trial.termination = Some(result.termination);
    let worst = falsify_independent(
        mission,
        &result.theta,
        restarts,
        seed.wrapping_add(FALSIFY_SEED_OFFSET),
        &config.chi,
    )
    .and_then(|f| Ok((mission.evaluate(&result.theta, &f.chi)?, f)));
    trial.theta = Some(result.theta);
    match worst {
        Ok((eval, f)) => {
            trial.worst_robustness = Some(eval.robustness);
            trial.satisfied = eval.robustness > 0.0;
            trial.impulse = Some(eval.impulse);
            trial.worst_chi = Some(f.chi);
        }
        Err(e) => trial.error = Some(e.to_string()),
    }
    trial
}
