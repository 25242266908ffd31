use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{mean_cost, mean_cost_grad, MinimizeConfig, Phase, PlanError, Problem};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Set when no step satisfied the sufficient-decrease test; `theta` is the
    /// best iterate found.
    pub line_search_failed: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Limited-memory quasi-Newton direction `−H·g` by the two-loop recursion.
fn lbfgs_direction(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

/// Minimizes `f` from `x0` with L-BFGS directions and a backtracking Armijo
/// line search. `fg` returns value and gradient; `f` the value alone.
pub(crate) fn descend<F, G>(
    f: F,
    fg: G,
    x0: &[f64],
    cfg: &MinimizeConfig,
) -> Result<MinimizeResult, PlanError>
where
    F: Fn(&[f64]) -> Result<f64, PlanError>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>), PlanError>,
{
    let (mut value, mut grad) = fg(x0)?;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(PlanError::NonFiniteStart(value));
    }
    let mut x = x0.to_vec();
    let mut history = vec![value];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut line_search_failed = false;
    let mut stalled = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations && inf_norm(&grad) > cfg.grad_tol {
        let mut dir = lbfgs_direction(&grad, &pairs);
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) || pairs.is_empty() {
            if !(slope < 0.0) {
                pairs.clear();
            }
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        let mut step = if pairs.is_empty() {
            (1.0 / inf_norm(&grad)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            // a failed or non-finite trial counts as no decrease
            if let Ok(v) = f(&trial) {
                if v.is_finite() && v <= value + ARMIJO * step * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            if pairs.is_empty() {
                line_search_failed = true;
                break;
            }
            pairs.clear();
            continue;
        };
        let (next_value, next_grad) = match fg(&next) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => (v, g),
            _ => {
                line_search_failed = true;
                break;
            }
        };
        iterations += 1;
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if pairs.len() == cfg.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let improvement = value - next_value;
        x = next;
        value = next_value;
        grad = next_grad;
        history.push(value);
        if improvement < cfg.rel_tol * (1.0 + value.abs()) {
            stalled += 1;
            if stalled >= 5 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(MinimizeResult {
        gradient_norm: inf_norm(&grad),
        theta: x,
        value,
        initial_value: history[0],
        iterations,
        line_search_failed,
        history,
    })
}

/// Minimizes the mean of `J(θ, χᵢ)` over `dataset`, starting from `theta0`.
pub fn minimize_theta(
    problem: &dyn Problem,
    dataset: &[&[f64]],
    theta0: &[f64],
    phase: Phase,
    cfg: &MinimizeConfig,
) -> Result<MinimizeResult, PlanError> {
    if dataset.is_empty() {
        return Err(PlanError::EmptyDataset);
    }
    if theta0.len() != problem.theta_dim() {
        return Err(PlanError::Dimension {
            what: "plan parameters",
            expected: problem.theta_dim(),
            found: theta0.len(),
        });
    }
    descend(
        |th| mean_cost(problem, th, dataset, phase, cfg.workers),
        |th| mean_cost_grad(problem, th, dataset, phase, cfg.workers),
        theta0,
        cfg,
    )
}
