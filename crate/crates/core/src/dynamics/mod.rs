//! Differentiable plant models, the waypoint-tracking controller and
//! fixed-step closed-loop simulation.

mod exogenous;
mod plan;
mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Scalar;

pub use exogenous::{BoxBounds, Exogenous};
pub use plan::{tracking_control, Plan, PlanLayout};
pub use sim::{channel_map, simulate, total_impulse, write_trace_csv, Grid, ImpulseNorm, Trace};

/// Regularization inside every differentiated Euclidean norm, `sqrt(x² + ε²)`.
pub const NORM_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("simulation diverged at step {step} (t = {time} s)")]
    Diverged { step: usize, time: f64 },
    #[error("time step {dt} does not divide horizon {horizon}")]
    BadGrid { dt: f64, horizon: f64 },
    #[error("expected {expected} {what}, got {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trace export failed: {0}")]
    Export(String),
}

/// Clohessy-Wiltshire-Hill relative dynamics around a circular target orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CwhParamsRaw", into = "CwhParamsRaw")]
pub struct CwhParams {
    mu_grav: f64,
    a: f64,
    mass: f64,
    n: f64,
}

#[derive(Serialize, Deserialize)]
struct CwhParamsRaw {
    mu_grav: f64,
    a: f64,
    mass: f64,
}

impl TryFrom<CwhParamsRaw> for CwhParams {
    type Error = DynamicsError;
    fn try_from(r: CwhParamsRaw) -> Result<Self, DynamicsError> {
        CwhParams::new(r.mu_grav, r.a, r.mass)
    }
}

impl From<CwhParams> for CwhParamsRaw {
    fn from(p: CwhParams) -> Self {
        CwhParamsRaw {
            mu_grav: p.mu_grav,
            a: p.a,
            mass: p.mass,
        }
    }
}

impl Default for CwhParams {
    fn default() -> Self {
        CwhParams::new(3.986e14, 353_000.0, 500.0).expect("valid defaults")
    }
}

impl CwhParams {
    pub fn new(mu_grav: f64, a: f64, mass: f64) -> Result<Self, DynamicsError> {
        for (name, v) in [("mu_grav", mu_grav), ("a", a), ("mass", mass)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(CwhParams {
            mu_grav,
            a,
            mass,
            n: (mu_grav / a.powi(3)).sqrt(),
        })
    }

    pub fn mu_grav(&self) -> f64 {
        self.mu_grav
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Mean motion `sqrt(μ / a³)` in rad/s.
    pub fn mean_motion(&self) -> f64 {
        self.n
    }
}

/// Unicycle ground robot; speed commands are clamped to `[0, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsParams {
    pub v_max: f64,
}

impl Default for DubinsParams {
    fn default() -> Self {
        DubinsParams { v_max: 0.22 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Plant {
    Cwh(CwhParams),
    Dubins(DubinsParams),
}

impl Plant {
    pub fn state_dim(&self) -> usize {
        match self {
            Plant::Cwh(_) => 6,
            Plant::Dubins(_) => 3,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            Plant::Cwh(_) => 3,
            Plant::Dubins(_) => 2,
        }
    }

    pub fn state_names(&self) -> &'static [&'static str] {
        match self {
            Plant::Cwh(_) => &["px", "py", "pz", "vx", "vy", "vz"],
            Plant::Dubins(_) => &["x", "y", "heading"],
        }
    }

    pub fn control_names(&self) -> &'static [&'static str] {
        match self {
            Plant::Cwh(_) => &["ux", "uy", "uz"],
            Plant::Dubins(_) => &["speed", "turn_rate"],
        }
    }

    pub fn derivative<T: Scalar>(&self, state: &[T], control: &[T]) -> Vec<T> {
        match self {
            Plant::Cwh(p) => cwh_derivative(state, control, p),
            Plant::Dubins(p) => dubins_derivative(state, &clamp_speed(control, p.v_max)),
        }
    }
}

/// Right-hand side of the CWH equations with thrust `control` in newtons.
pub fn cwh_derivative<T: Scalar>(state: &[T], control: &[T], params: &CwhParams) -> Vec<T> {
    let n = params.n;
    let inv_m = 1.0 / params.mass;
    let (px, pz) = (state[0], state[2]);
    let (vx, vy, vz) = (state[3], state[4], state[5]);
    vec![
        vx,
        vy,
        vz,
        T::linear_combination(
            &[(px, 3.0 * n * n), (vy, 2.0 * n), (control[0], inv_m)],
            0.0,
        ),
        T::linear_combination(&[(vx, -2.0 * n), (control[1], inv_m)], 0.0),
        T::linear_combination(&[(pz, -n * n), (control[2], inv_m)], 0.0),
    ]
}

/// `(v cos h, v sin h, ω)` for state `(x, y, h)` and control `(v, ω)`.
pub fn dubins_derivative<T: Scalar>(state: &[T], control: &[T]) -> Vec<T> {
    let heading = state[2];
    let (v, omega) = (control[0], control[1]);
    vec![v * heading.cos(), v * heading.sin(), omega]
}

/// Speed command clamped to `[0, v_max]`; a saturated command carries no gradient.
pub(crate) fn clamp_speed<T: Scalar>(control: &[T], v_max: f64) -> Vec<T> {
    let v = control[0];
    let clamped = if v.value() < 0.0 {
        v.lift(0.0)
    } else if v.value() > v_max {
        v.lift(v_max)
    } else {
        v
    };
    vec![clamped, control[1]]
}
