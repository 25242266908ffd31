use std::io::Write;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{clamp_speed, DynamicsError, Plan, Plant, NORM_EPSILON};
use crate::autodiff::Scalar;
use crate::stl::Signal;

/// Uniform sample grid `0, dt, …, horizon`; the integrator takes `substeps`
/// equal RK4 steps between consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

impl Grid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self, DynamicsError> {
        Grid::with_substeps(dt, horizon, 1)
    }

    pub fn with_substeps(dt: f64, horizon: f64, substeps: usize) -> Result<Self, DynamicsError> {
        let g = Grid {
            dt,
            horizon,
            substeps,
        };
        g.steps()?;
        Ok(g)
    }

    pub fn steps(&self) -> Result<usize, DynamicsError> {
        let bad = DynamicsError::BadGrid {
            dt: self.dt,
            horizon: self.horizon,
        };
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.horizon.is_finite()) || self.substeps == 0
        {
            return Err(bad);
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(bad);
        }
        Ok(steps as usize)
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Closed-loop rollout: states and the control applied at each grid time.
#[derive(Debug, Clone)]
pub struct Trace<T = f64> {
    pub states: Signal<T>,
    pub controls: Signal<T>,
}

/// Fourth-order Runge-Kutta rollout of `plant` under `plan` from `initial`.
///
/// The controller is re-evaluated at every stage so the result stays a smooth
/// function of both the plan and the initial state.
pub fn simulate<T: Scalar>(
    plant: &Plant,
    plan: &Plan<T>,
    initial: &[T],
    grid: Grid,
) -> Result<Trace<T>, DynamicsError> {
    let n = plant.state_dim();
    if initial.len() != n {
        return Err(DynamicsError::Dimension {
            what: "initial state coordinates",
            expected: n,
            found: initial.len(),
        });
    }
    if plan.gains.len() != plant.control_dim() || plan.gains.iter().any(|r| r.len() != n) {
        return Err(DynamicsError::Dimension {
            what: "gain entries",
            expected: plant.control_dim() * n,
            found: plan.gains.iter().map(Vec::len).sum(),
        });
    }
    let steps = grid.steps()?;
    let dt = grid.dt;
    plan.check_knots()?;
    // the bias u_ff + K x_ref is linear in the knot values, so it interpolates
    // like the reference itself
    let knot_bias: Vec<Vec<T>> = plan
        .states
        .iter()
        .zip(&plan.feedforward)
        .map(|(r, ff)| plan.bias(r, ff))
        .collect();
    let h = dt / grid.substeps as f64;
    let half_steps = 2 * steps * grid.substeps;
    let weights: Vec<(usize, f64)> = (0..=half_steps)
        .map(|k| plan.locate(k as f64 * 0.5 * h))
        .collect();
    let control = |k: usize, x: &[T]| {
        let (i, alpha) = weights[k];
        let hi = knot_bias.get(i + 1).unwrap_or(&knot_bias[i]);
        plan.feedback_blend(&knot_bias[i], hi, alpha, x)
    };
    let stage = |x: &[T], k: &[T], h: f64| -> SmallVec<[T; 6]> {
        x.iter()
            .zip(k)
            .map(|(&xi, &ki)| T::linear_combination(&[(xi, 1.0), (ki, h)], 0.0))
            .collect()
    };

    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut x = initial.to_vec();
    for i in 0..steps {
        let base = 2 * i * grid.substeps;
        let u = control(base, &x);
        let mut next = x.clone();
        for sub in 0..grid.substeps {
            let k0 = base + 2 * sub;
            let u1 = if sub == 0 {
                u.clone()
            } else {
                control(k0, &next)
            };
            let k1 = plant.derivative(&next, &u1);
            let x2 = stage(&next, &k1, 0.5 * h);
            let k2 = plant.derivative(&x2, &control(k0 + 1, &x2));
            let x3 = stage(&next, &k2, 0.5 * h);
            let k3 = plant.derivative(&x3, &control(k0 + 1, &x3));
            let x4 = stage(&next, &k3, h);
            let k4 = plant.derivative(&x4, &control(k0 + 2, &x4));
            next = (0..n)
                .map(|j| {
                    T::linear_combination(
                        &[
                            (next[j], 1.0),
                            (k1[j], h / 6.0),
                            (k2[j], h / 3.0),
                            (k3[j], h / 3.0),
                            (k4[j], h / 6.0),
                        ],
                        0.0,
                    )
                })
                .collect();
        }
        if next
            .iter()
            .any(|v| !v.value().is_finite() || v.value().abs() > 1e12)
        {
            return Err(DynamicsError::Diverged {
                step: i,
                time: grid.time(i + 1),
            });
        }
        states.push(std::mem::replace(&mut x, next));
        controls.push(u);
    }
    let last_u = control(half_steps, &x);
    states.push(x);
    controls.push(last_u);
    let to_err = |e: crate::stl::StlError| DynamicsError::InvalidParameter(e.to_string());
    Ok(Trace {
        states: Signal::uniform(0.0, dt, states).map_err(to_err)?,
        controls: Signal::uniform(0.0, dt, controls).map_err(to_err)?,
    })
}

fn smooth_norm<T: Scalar>(xs: &[T]) -> T {
    let squares: SmallVec<[(T, T, f64); 3]> = xs.iter().map(|&x| (x, x, 1.0)).collect();
    T::affine(&[], &squares, NORM_EPSILON * NORM_EPSILON).sqrt()
}

/// Two channels for the specification: distance to the target and speed.
///
/// Orbital plants use `‖p‖` and `‖v‖`; the ground robot uses planar distance
/// to the origin and the saturated speed command.
pub fn channel_map<T: Scalar>(plant: &Plant, trace: &Trace<T>) -> Signal<T> {
    let rows = trace
        .states
        .values()
        .iter()
        .zip(trace.controls.values())
        .map(|(x, u)| match plant {
            Plant::Cwh(_) => vec![smooth_norm(&x[..3]), smooth_norm(&x[3..6])],
            Plant::Dubins(p) => vec![smooth_norm(&x[..2]), clamp_speed(u, p.v_max)[0]],
        })
        .collect();
    Signal::new(trace.states.times().to_vec(), rows).expect("same grid as the trace")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpulseNorm {
    /// Σ |u_c| per step, the usual fuel proxy for independent thrusters.
    #[default]
    L1,
    L2,
}

/// Left-rectangle quadrature of the control norm over the horizon.
pub fn total_impulse<T: Scalar>(trace: &Trace<T>, norm: ImpulseNorm) -> T {
    let times = trace.controls.times();
    let rows = trace.controls.values();
    let mut terms = Vec::with_capacity(rows.len() * rows[0].len());
    for i in 0..rows.len().saturating_sub(1) {
        let dt = times[i + 1] - times[i];
        match norm {
            ImpulseNorm::L1 => {
                terms.extend(rows[i].iter().map(|&u| (smooth_norm(&[u]), dt)));
            }
            ImpulseNorm::L2 => terms.push((smooth_norm(&rows[i]), dt)),
        }
    }
    if terms.is_empty() {
        return rows[0][0].lift(0.0);
    }
    T::linear_combination(&terms, 0.0)
}

/// Writes `t, <states>, <controls>` rows with a header.
pub fn write_trace_csv<W: Write>(
    plant: &Plant,
    trace: &Trace<f64>,
    writer: W,
) -> Result<(), DynamicsError> {
    let export = |e: csv::Error| DynamicsError::Export(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t"];
    header.extend(plant.state_names());
    header.extend(plant.control_names());
    w.write_record(&header).map_err(export)?;
    for ((t, x), u) in trace
        .states
        .times()
        .iter()
        .zip(trace.states.values())
        .zip(trace.controls.values())
    {
        let mut row = vec![t.to_string()];
        row.extend(x.iter().chain(u).map(f64::to_string));
        w.write_record(&row).map_err(export)?;
    }
    w.flush().map_err(|e| DynamicsError::Export(e.to_string()))
}
