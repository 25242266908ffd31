//! Min-max planning: an inner minimizer over the plan, an inner maximizer over
//! the exogenous parameters, and the outer counterexample-guided loop.

mod maximize;
mod minimize;
mod solve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::BoxBounds;

pub use maximize::{maximize_chi, project_ascent, AscentResult, MaximizeResult, StartKind};
pub use minimize::{minimize_theta, MinimizeResult};
pub use solve::{falsify_independent, solve_cg, solve_dr, FalsifyCandidate, FalsifyResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("objective is not finite at the initial point ({0})")]
    NonFiniteStart(f64),
    #[error("objective is not finite at every sampled start")]
    NoFiniteStart,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("expected {expected} {what}, got {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

/// Where in the solve an evaluation happens; problems may tighten their
/// smoothing as the outer loop advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Round(usize),
    Final,
}

/// A two-player cost `J(θ, χ)` with `θ` free and `χ` confined to a box.
pub trait Problem: Sync {
    fn theta_dim(&self) -> usize;

    fn chi_bounds(&self) -> &BoxBounds;

    fn initial_theta(&self) -> Vec<f64>;

    fn cost(&self, theta: &[f64], chi: &[f64], phase: Phase) -> Result<f64, PlanError>;

    /// `(J, ∂J/∂θ, ∂J/∂χ)`.
    fn cost_grad(
        &self,
        theta: &[f64],
        chi: &[f64],
        phase: Phase,
    ) -> Result<(f64, Vec<f64>, Vec<f64>), PlanError>;

    /// Unsmoothed satisfaction margin used for reporting, if the problem has one.
    fn margin(&self, _theta: &[f64], _chi: &[f64]) -> Result<Option<f64>, PlanError> {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    pub max_iterations: usize,
    pub grad_tol: f64,
    /// Stop once five consecutive steps each improve by less than
    /// `rel_tol · (1 + |f|)`.
    pub rel_tol: f64,
    /// Curvature pairs kept by the quasi-Newton direction.
    pub memory: usize,
    /// Threads sharing the dataset evaluations. Results do not depend on it.
    pub workers: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            max_iterations: 500,
            grad_tol: 1e-6,
            rel_tol: 1e-7,
            memory: 10,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximizeConfig {
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub multistarts: usize,
    /// A known start within this much of the best value found is returned
    /// unchanged; failing that, its ascent endpoint is if that is close
    /// enough.
    pub keep_slack: f64,
    /// Threads sharing the ascents. Results do not depend on it.
    pub workers: usize,
}

impl Default for MaximizeConfig {
    fn default() -> Self {
        MaximizeConfig {
            max_iterations: 200,
            grad_tol: 1e-6,
            multistarts: 4,
            keep_slack: 1e-2,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub initial_samples: usize,
    pub max_rounds: usize,
    pub fixed_point_tol: f64,
    pub theta: MinimizeConfig,
    pub chi: MaximizeConfig,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            initial_samples: 8,
            max_rounds: 10,
            fixed_point_tol: 1e-3,
            theta: MinimizeConfig::default(),
            chi: MaximizeConfig::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |msg: &str| Err(PlanError::Config(msg.to_string()));
        if self.initial_samples == 0 {
            return bad("initial_samples must be at least 1");
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1");
        }
        if !(self.fixed_point_tol > 0.0) {
            return bad("fixed_point_tol must be positive");
        }
        if !(self.theta.grad_tol > 0.0 && self.theta.rel_tol > 0.0) {
            return bad("theta tolerances must be positive");
        }
        if !(self.chi.grad_tol > 0.0) {
            return bad("chi.grad_tol must be positive");
        }
        if !(self.chi.keep_slack >= 0.0 && self.chi.keep_slack.is_finite()) {
            return bad("chi.keep_slack must be finite and non-negative");
        }
        if self.chi.multistarts == 0 && self.chi.max_iterations == 0 {
            return bad("chi search has nothing to do");
        }
        if self.theta.workers == 0 || self.chi.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InitialSample,
    Counterexample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub chi: Vec<f64>,
    pub provenance: Provenance,
}

/// Exogenous parameters the plan is trained against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleDataset {
    entries: Vec<DatasetEntry>,
}

impl CounterexampleDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chi: Vec<f64>, provenance: Provenance) {
        self.entries.push(DatasetEntry { chi, provenance });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn chis(&self) -> Vec<&[f64]> {
        self.entries.iter().map(|e| e.chi.as_slice()).collect()
    }

    pub fn counterexamples(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.provenance == Provenance::Counterexample)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    FixedPoint,
    MaxRounds,
    /// Single-shot solve without an adversary loop.
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub dataset_size: usize,
    pub objective_initial: f64,
    pub objective: f64,
    pub theta_iterations: usize,
    pub line_search_failed: bool,
    /// Absent for solves without an adversary.
    pub chi_star: Option<Vec<f64>>,
    pub chi_cost: Option<f64>,
    pub winning_start: Option<StartKind>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub theta_seconds: f64,
    pub chi_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub theta: Vec<f64>,
    pub dataset: CounterexampleDataset,
    pub rounds: Vec<RoundLog>,
    pub termination: Termination,
    pub timings: Timings,
}

impl SolveResult {
    /// The result with every wall-clock field zeroed, for reproducibility checks
    /// and deterministic artifacts.
    pub fn without_timings(&self) -> SolveResult {
        let mut r = self.clone();
        r.timings = Timings::default();
        for round in &mut r.rounds {
            round.wall_seconds = 0.0;
        }
        r
    }
}

/// `f(0), …, f(n − 1)` computed on up to `workers` threads, in index order.
pub(crate) fn map_ordered<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|lo| {
                let f = &f;
                scope.spawn(move || (lo..(lo + chunk).min(n)).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

pub(crate) fn mean_cost(
    problem: &dyn Problem,
    theta: &[f64],
    dataset: &[&[f64]],
    phase: Phase,
    workers: usize,
) -> Result<f64, PlanError> {
    let costs = map_ordered(dataset.len(), workers, |i| {
        problem.cost(theta, dataset[i], phase)
    });
    let mut total = 0.0;
    for c in costs {
        total += c?;
    }
    Ok(total / dataset.len() as f64)
}

pub(crate) fn mean_cost_grad(
    problem: &dyn Problem,
    theta: &[f64],
    dataset: &[&[f64]],
    phase: Phase,
    workers: usize,
) -> Result<(f64, Vec<f64>), PlanError> {
    let parts = map_ordered(dataset.len(), workers, |i| {
        problem.cost_grad(theta, dataset[i], phase)
    });
    let mut total = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for part in parts {
        let (j, g, _) = part?;
        total += j;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let n = dataset.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}
