use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    maximize_chi, minimize_theta, CounterexampleDataset, MaximizeConfig, Phase, PlanError, Problem,
    Provenance, RoundLog, SolveResult, SolverConfig, StartKind, Termination, Timings,
};

fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Counterexample-guided alternating solve: fit the plan to the dataset, let
/// the adversary answer, and add its answer until it repeats itself.
pub fn solve_cg(problem: &dyn Problem, config: &SolverConfig) -> Result<SolveResult, PlanError> {
    config.validate()?;
    let started = Instant::now();
    let mut timings = Timings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bounds = problem.chi_bounds();
    let mut dataset = CounterexampleDataset::new();
    for _ in 0..config.initial_samples {
        dataset.push(bounds.sample(&mut rng), Provenance::InitialSample);
    }
    let mut theta = problem.initial_theta();
    let mut previous: Option<Vec<f64>> = None;
    let mut rounds = Vec::new();
    let mut termination = Termination::MaxRounds;
    for round in 0..config.max_rounds {
        let round_start = Instant::now();
        let phase = Phase::Round(round);
        let chis = dataset.chis();
        let fit = minimize_theta(problem, &chis, &theta, phase, &config.theta)?;
        theta = fit.theta;
        let fitted = Instant::now();
        let warm: Vec<&[f64]> = previous.as_deref().into_iter().collect();
        let adversary = maximize_chi(problem, &theta, &warm, &mut rng, phase, &config.chi)?;
        timings.theta_seconds += (fitted - round_start).as_secs_f64();
        timings.chi_seconds += fitted.elapsed().as_secs_f64();
        rounds.push(RoundLog {
            round,
            dataset_size: dataset.len(),
            objective_initial: fit.initial_value,
            objective: fit.value,
            theta_iterations: fit.iterations,
            line_search_failed: fit.line_search_failed,
            chi_star: Some(adversary.chi.clone()),
            chi_cost: Some(adversary.value),
            winning_start: Some(adversary.winning_start),
            wall_seconds: round_start.elapsed().as_secs_f64(),
        });
        if let Some(prev) = &previous {
            if inf_distance(prev, &adversary.chi) <= config.fixed_point_tol {
                termination = Termination::FixedPoint;
                break;
            }
        }
        dataset.push(adversary.chi.clone(), Provenance::Counterexample);
        previous = Some(adversary.chi);
    }
    timings.total_seconds = started.elapsed().as_secs_f64();
    Ok(SolveResult {
        theta,
        dataset,
        rounds,
        termination,
        timings,
    })
}

/// Domain-randomization baseline: one fit of the plan to `n_samples` uniform
/// draws, carried through the same smoothing schedule as the first two rounds
/// of [`solve_cg`].
pub fn solve_dr(
    problem: &dyn Problem,
    n_samples: usize,
    config: &SolverConfig,
) -> Result<SolveResult, PlanError> {
    config.validate()?;
    if n_samples == 0 {
        return Err(PlanError::Config("n_samples must be at least 1".into()));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bounds = problem.chi_bounds();
    let mut dataset = CounterexampleDataset::new();
    for _ in 0..n_samples {
        dataset.push(bounds.sample(&mut rng), Provenance::InitialSample);
    }
    let chis = dataset.chis();
    let mut theta = problem.initial_theta();
    let mut rounds = Vec::new();
    for (round, phase) in [Phase::Round(0), Phase::Final].into_iter().enumerate() {
        let round_start = Instant::now();
        let fit = minimize_theta(problem, &chis, &theta, phase, &config.theta)?;
        theta = fit.theta;
        rounds.push(RoundLog {
            round,
            dataset_size: dataset.len(),
            objective_initial: fit.initial_value,
            objective: fit.value,
            theta_iterations: fit.iterations,
            line_search_failed: fit.line_search_failed,
            chi_star: None,
            chi_cost: None,
            winning_start: None,
            wall_seconds: round_start.elapsed().as_secs_f64(),
        });
    }
    let total = started.elapsed().as_secs_f64();
    Ok(SolveResult {
        theta,
        dataset,
        rounds,
        termination: Termination::Completed,
        timings: Timings {
            total_seconds: total,
            theta_seconds: total,
            chi_seconds: 0.0,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifyCandidate {
    pub start: Vec<f64>,
    pub chi: Vec<f64>,
    pub cost: f64,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsifyResult {
    /// Worst exogenous value found: lowest margin when the problem reports
    /// one, otherwise highest cost.
    pub chi: Vec<f64>,
    pub cost: f64,
    pub margin: Option<f64>,
    pub candidates: Vec<FalsifyCandidate>,
}

/// Evaluation-time adversary: `n_restarts` independent uniform starts with a
/// generator of its own, never fed back into planning.
pub fn falsify_independent(
    problem: &dyn Problem,
    theta: &[f64],
    n_restarts: usize,
    seed: u64,
    config: &MaximizeConfig,
) -> Result<FalsifyResult, PlanError> {
    if n_restarts == 0 {
        return Err(PlanError::Config("n_restarts must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = MaximizeConfig {
        multistarts: n_restarts,
        ..*config
    };
    let found = maximize_chi(problem, theta, &[], &mut rng, Phase::Final, &cfg)?;
    let mut candidates = Vec::with_capacity(found.ascents.len());
    for (_, a) in &found.ascents {
        candidates.push(FalsifyCandidate {
            start: a.start.clone(),
            chi: a.chi.clone(),
            cost: a.value,
            margin: problem.margin(theta, &a.chi)?,
        });
    }
    let worst = candidates.iter().enumerate().fold(0, |best, (i, c)| {
        let b = &candidates[best];
        let better = match (c.margin, b.margin) {
            (Some(m), Some(bm)) => m < bm,
            _ => c.cost > b.cost,
        };
        if better {
            i
        } else {
            best
        }
    });
    let w = &candidates[worst];
    debug_assert!(matches!(found.winning_start, StartKind::Uniform(_)));
    Ok(FalsifyResult {
        chi: w.chi.clone(),
        cost: w.cost,
        margin: w.margin,
        candidates,
    })
}
