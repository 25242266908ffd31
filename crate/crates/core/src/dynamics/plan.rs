use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{DynamicsError, Plant};
use crate::autodiff::Scalar;
use crate::stl::Signal;

/// Maps the flat decision vector onto a waypoint plan.
///
/// The vector holds, in order, `waypoints × state_dim` reference states,
/// `waypoints × control_dim` feedforward controls and a row-major
/// `control_dim × state_dim` feedback gain. Every entry is multiplied by a
/// per-coordinate scale so that the optimizer works with numbers of order one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLayout {
    state_dim: usize,
    control_dim: usize,
    knots: Vec<f64>,
    state_scale: Vec<f64>,
    control_scale: Vec<f64>,
    gain_scale: Vec<f64>,
    default_gain: Vec<f64>,
}

impl PlanLayout {
    /// `waypoints` knots spread evenly over `[0, horizon]` with scales suited to `plant`.
    pub fn for_plant(plant: &Plant, horizon: f64, waypoints: usize) -> Result<Self, DynamicsError> {
        if waypoints < 2 {
            return Err(DynamicsError::InvalidParameter(format!(
                "need at least 2 waypoints, got {waypoints}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(DynamicsError::InvalidParameter(format!(
                "horizon {horizon}"
            )));
        }
        let knots = (0..waypoints)
            .map(|i| horizon * i as f64 / (waypoints - 1) as f64)
            .collect();
        let (n, m) = (plant.state_dim(), plant.control_dim());
        let mut gain_scale = vec![0.0; m * n];
        let mut default_gain = vec![0.0; m * n];
        let (state_scale, control_scale) = match plant {
            Plant::Cwh(p) => {
                let mass = p.mass();
                for i in 0..m {
                    for j in 0..n {
                        gain_scale[i * n + j] = if j < 3 { 0.1 * mass } else { mass };
                    }
                    // critically damped per axis: ω² = 0.1, 2ζω ≈ 0.63
                    default_gain[i * n + i] = 1.0;
                    default_gain[i * n + i + 3] = 0.63;
                }
                (vec![1.0, 1.0, 1.0, 0.1, 0.1, 0.1], vec![0.01 * mass; 3])
            }
            Plant::Dubins(p) => {
                gain_scale.iter_mut().for_each(|g| *g = 1.0);
                default_gain[0] = 0.5;
                default_gain[n + 1] = 1.0;
                default_gain[n + 2] = 1.0;
                (vec![1.0; 3], vec![p.v_max, 1.0])
            }
        };
        Ok(PlanLayout {
            state_dim: n,
            control_dim: m,
            knots,
            state_scale,
            control_scale,
            gain_scale,
            default_gain,
        })
    }

    pub fn len(&self) -> usize {
        let w = self.knots.len();
        w * (self.state_dim + self.control_dim) + self.control_dim * self.state_dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn waypoints(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn unpack<T: Scalar>(&self, theta: &[T]) -> Result<Plan<T>, DynamicsError> {
        if theta.len() != self.len() {
            return Err(DynamicsError::Dimension {
                what: "plan parameters",
                expected: self.len(),
                found: theta.len(),
            });
        }
        let (n, m, w) = (self.state_dim, self.control_dim, self.knots.len());
        let scaled = |chunk: &[T], scale: &[f64]| -> Vec<T> {
            chunk.iter().zip(scale).map(|(&v, &s)| v * s).collect()
        };
        let (ref_part, rest) = theta.split_at(w * n);
        let (ff_part, gain_part) = rest.split_at(w * m);
        let gains = scaled(gain_part, &self.gain_scale);
        Ok(Plan {
            knots: self.knots.clone(),
            states: ref_part
                .chunks(n)
                .map(|c| scaled(c, &self.state_scale))
                .collect(),
            feedforward: ff_part
                .chunks(m)
                .map(|c| scaled(c, &self.control_scale))
                .collect(),
            gains: gains.chunks(n).map(|c| c.to_vec()).collect(),
        })
    }

    /// Inverse of [`unpack`](Self::unpack) for a plan given in physical units.
    pub fn pack(&self, plan: &Plan<f64>) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.len());
        for s in &plan.states {
            theta.extend(s.iter().zip(&self.state_scale).map(|(v, k)| v / k));
        }
        for u in &plan.feedforward {
            theta.extend(u.iter().zip(&self.control_scale).map(|(v, k)| v / k));
        }
        let flat = plan.gains.iter().flatten();
        theta.extend(flat.zip(&self.gain_scale).map(|(v, k)| v / k));
        theta
    }

    /// Straight-line reference from `start` reaching `target` at `arrival`
    /// (a fraction of the horizon) and holding it, no feedforward, default gains.
    pub fn straight_line(&self, start: &[f64], target: &[f64], arrival: f64) -> Vec<f64> {
        let horizon = self.knots[self.knots.len() - 1];
        let t_arrive = (arrival.clamp(1e-3, 1.0)) * horizon;
        let n = self.state_dim;
        let mut theta = Vec::with_capacity(self.len());
        for &t in &self.knots {
            let s = (t / t_arrive).min(1.0);
            for j in 0..n {
                theta.push((start[j] + s * (target[j] - start[j])) / self.state_scale[j]);
            }
        }
        theta.extend(std::iter::repeat_n(
            0.0,
            self.knots.len() * self.control_dim,
        ));
        theta.extend_from_slice(&self.default_gain);
        theta
    }
}

/// Waypoint reference, feedforward control and feedback gain in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan<T = f64> {
    pub knots: Vec<f64>,
    pub states: Vec<Vec<T>>,
    pub feedforward: Vec<Vec<T>>,
    pub gains: Vec<Vec<T>>,
}

impl<T: Scalar> Plan<T> {
    /// Reference state and feedforward at `t`, interpolated between knots.
    pub fn reference(&self, t: f64) -> (Vec<T>, Vec<T>) {
        let states = Signal::new(self.knots.clone(), self.states.clone()).expect("valid knots");
        let ff = Signal::new(self.knots.clone(), self.feedforward.clone()).expect("valid knots");
        let t = t.max(self.knots[0]);
        (
            states.eval_at(t).expect("inside knots"),
            ff.eval_at(t).expect("inside knots"),
        )
    }

    /// `u = u_ff + K (x_ref − x)`.
    pub fn feedback(&self, reference: &[T], feedforward: &[T], state: &[T]) -> Vec<T> {
        let bias = self.bias(reference, feedforward);
        self.feedback_blend(&bias, &bias, 0.0, state)
    }

    /// State-independent part of the control law, `u_ff + K x_ref`.
    pub(crate) fn bias(&self, reference: &[T], feedforward: &[T]) -> Vec<T> {
        self.gains
            .iter()
            .zip(feedforward)
            .map(|(row, &ff)| {
                let products: SmallVec<[(T, T, f64); 6]> = row
                    .iter()
                    .zip(reference)
                    .map(|(&k, &r)| (k, r, 1.0))
                    .collect();
                T::affine(&[(ff, 1.0)], &products, 0.0)
            })
            .collect()
    }

    /// `(1 − α) lo + α hi − K x`.
    pub(crate) fn feedback_blend(&self, lo: &[T], hi: &[T], alpha: f64, state: &[T]) -> Vec<T> {
        self.gains
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let products: SmallVec<[(T, T, f64); 6]> =
                    row.iter().zip(state).map(|(&k, &x)| (k, x, -1.0)).collect();
                if alpha == 0.0 {
                    T::affine(&[(lo[i], 1.0)], &products, 0.0)
                } else {
                    T::affine(&[(lo[i], 1.0 - alpha), (hi[i], alpha)], &products, 0.0)
                }
            })
            .collect()
    }

    pub(crate) fn check_knots(&self) -> Result<(), DynamicsError> {
        let w = self.knots.len();
        if w == 0 || self.states.len() != w || self.feedforward.len() != w {
            return Err(DynamicsError::InvalidParameter(format!(
                "{w} knots for {} reference states and {} feedforward controls",
                self.states.len(),
                self.feedforward.len()
            )));
        }
        if self.knots.windows(2).any(|k| !(k[1] > k[0])) || !self.knots[0].is_finite() {
            return Err(DynamicsError::InvalidParameter(
                "knot times must increase strictly".into(),
            ));
        }
        Ok(())
    }

    /// Knot interval and interpolation weight for time `t`, clamped to the knot span.
    pub(crate) fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.knots.len() - 1;
        if t <= self.knots[0] {
            return (0, 0.0);
        }
        if t >= self.knots[last] {
            return (last, 0.0);
        }
        let i = self.knots.partition_point(|&s| s <= t) - 1;
        (i, (t - self.knots[i]) / (self.knots[i + 1] - self.knots[i]))
    }
}

/// Control commanded by `plan` at state `state` and time `t`.
pub fn tracking_control<T: Scalar>(plan: &Plan<T>, state: &[T], t: f64) -> Vec<T> {
    let (reference, ff) = plan.reference(t);
    plan.feedback(&reference, &ff, state)
}
