use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{map_ordered, MaximizeConfig, Phase, PlanError, Problem};
use crate::dynamics::BoxBounds;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// Which start produced the adversary's answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    /// The candidate supplied by the caller with index `i` (in the outer
    /// loop, a dataset entry).
    Known(usize),
    /// The `i`-th uniform random start.
    Uniform(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentResult {
    pub start: Vec<f64>,
    pub start_value: f64,
    pub chi: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Objective after every accepted step, starting with `start_value`.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizeResult {
    pub chi: Vec<f64>,
    pub value: f64,
    pub winning_start: StartKind,
    pub ascents: Vec<(StartKind, AscentResult)>,
}

/// Box-normalized coordinates: `z = (χ − lower) / width` on every coordinate
/// of nonzero width. Degenerate coordinates stay fixed.
struct Unit<'a> {
    bounds: &'a BoxBounds,
}

impl Unit<'_> {
    fn to_chi(&self, z: &[f64]) -> Vec<f64> {
        (0..z.len())
            .map(|i| self.bounds.lower()[i] + z[i] * self.bounds.width(i))
            .collect()
    }

    fn to_unit(&self, chi: &[f64]) -> Vec<f64> {
        (0..chi.len())
            .map(|i| {
                let w = self.bounds.width(i);
                if w > 0.0 {
                    ((chi[i] - self.bounds.lower()[i]) / w).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn grad(&self, g: &[f64]) -> Vec<f64> {
        g.iter()
            .enumerate()
            .map(|(i, gi)| gi * self.bounds.width(i))
            .collect()
    }
}

/// Projected gradient ascent on `J(θ, ·)` from `start`, with an Armijo test
/// along the projection arc.
pub fn project_ascent(
    problem: &dyn Problem,
    theta: &[f64],
    start: &[f64],
    phase: Phase,
    cfg: &MaximizeConfig,
) -> Result<AscentResult, PlanError> {
    let bounds = problem.chi_bounds();
    if start.len() != bounds.dim() {
        return Err(PlanError::Dimension {
            what: "exogenous coordinates",
            expected: bounds.dim(),
            found: start.len(),
        });
    }
    let unit = Unit { bounds };
    let mut z = unit.to_unit(&bounds.project(start));
    let mut chi = unit.to_chi(&z);
    let (mut value, _, g) = problem.cost_grad(theta, &chi, phase)?;
    if !value.is_finite() {
        return Err(PlanError::NonFiniteStart(value));
    }
    let mut gz = unit.grad(&g);
    let start_value = value;
    let mut history = vec![value];
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        // projected gradient: components pushing out of the box vanish
        let pg: Vec<f64> = (0..z.len())
            .map(|i| {
                if bounds.width(i) == 0.0
                    || (z[i] >= 1.0 && gz[i] > 0.0)
                    || (z[i] <= 0.0 && gz[i] < 0.0)
                {
                    0.0
                } else {
                    gz[i]
                }
            })
            .collect();
        if pg.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= cfg.grad_tol {
            break;
        }
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial: Vec<f64> = (0..z.len())
                .map(|i| (z[i] + step * pg[i]).clamp(0.0, 1.0))
                .collect();
            let gain: f64 = (0..z.len()).map(|i| gz[i] * (trial[i] - z[i])).sum();
            if gain > 0.0 {
                if let Ok(v) = problem.cost(theta, &unit.to_chi(&trial), phase) {
                    if v.is_finite() && v >= value + ARMIJO * gain {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else { break };
        let next_chi = unit.to_chi(&next);
        let (v, g) = match problem.cost_grad(theta, &next_chi, phase) {
            Ok((v, _, g)) if v.is_finite() => (v, g),
            _ => break,
        };
        iterations += 1;
        let moved = next
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        z = next;
        chi = next_chi;
        value = v;
        gz = unit.grad(&g);
        history.push(value);
        step = (step * 2.0).min(1e3);
        if moved < 1e-12 {
            break;
        }
    }
    Ok(AscentResult {
        start: start.to_vec(),
        start_value,
        chi,
        value,
        iterations,
        history,
    })
}

/// Worst case of `J(θ, ·)` over the box: ascent from the best of `known`
/// (by current cost) and from `cfg.multistarts` uniform draws.
pub fn maximize_chi<R: Rng + ?Sized>(
    problem: &dyn Problem,
    theta: &[f64],
    known: &[&[f64]],
    rng: &mut R,
    phase: Phase,
    cfg: &MaximizeConfig,
) -> Result<MaximizeResult, PlanError> {
    let bounds = problem.chi_bounds();
    let mut starts: Vec<(StartKind, Vec<f64>)> = Vec::new();
    let known_costs = map_ordered(known.len(), cfg.workers, |i| {
        problem.cost(theta, known[i], phase)
    });
    let mut best_known: Option<(usize, f64)> = None;
    for (i, cost) in known_costs.into_iter().enumerate() {
        if let Ok(v) = cost {
            if v.is_finite() && best_known.is_none_or(|(_, b)| v > b) {
                best_known = Some((i, v));
            }
        }
    }
    if let Some((i, _)) = best_known {
        starts.push((StartKind::Known(i), known[i].to_vec()));
    }
    for i in 0..cfg.multistarts {
        starts.push((StartKind::Uniform(i), bounds.sample(rng)));
    }
    let results = map_ordered(starts.len(), cfg.workers, |i| {
        project_ascent(problem, theta, &starts[i].1, phase, cfg)
    });
    let mut ascents = Vec::with_capacity(starts.len());
    for ((kind, _), result) in starts.into_iter().zip(results) {
        match result {
            Ok(a) => ascents.push((kind, a)),
            Err(PlanError::NonFiniteStart(_)) | Err(PlanError::Evaluation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    // first of the maximal values wins, unless a known start is close enough
    let mut winner: Option<usize> = None;
    for (i, (_, a)) in ascents.iter().enumerate() {
        if winner.is_none_or(|w| a.value > ascents[w].1.value) {
            winner = Some(i);
        }
    }
    let mut w = winner.ok_or(PlanError::NoFiniteStart)?;
    let best = ascents[w].1.value;
    let known = ascents.iter().position(|(kind, a)| {
        matches!(kind, StartKind::Known(_)) && a.value >= best - cfg.keep_slack
    });
    if let Some(k) = known {
        let a = &ascents[k].1;
        if a.start_value >= best - cfg.keep_slack {
            return Ok(MaximizeResult {
                chi: bounds.project(&a.start),
                value: a.start_value,
                winning_start: ascents[k].0,
                ascents,
            });
        }
        w = k;
    }
    Ok(MaximizeResult {
        chi: ascents[w].1.chi.clone(),
        value: ascents[w].1.value,
        winning_start: ascents[w].0,
        ascents,
    })
}
