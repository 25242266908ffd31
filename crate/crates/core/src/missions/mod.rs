//! Rendezvous and ground-robot missions: specification, plant, cost and
//! uncertainty box bundled into a [`Problem`].

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Scalar, Tape};
use crate::dynamics::{
    channel_map, simulate, total_impulse, BoxBounds, CwhParams, DubinsParams, DynamicsError,
    Exogenous, Grid, ImpulseNorm, PlanLayout, Plant, Trace,
};
use crate::planner::{Phase, PlanError, Problem, SolverConfig};
use crate::stl::{parse_formula, Evaluator, Formula, Interval, SmoothingConfig, StlError};

mod trial;

pub use trial::{run_trial, Method, Trial, FALSIFY_SEED_OFFSET};

/// Channel names of the mapped signal, in order.
pub const CHANNELS: [&str; 2] = ["r", "v"];
const R: usize = 0;
const V: usize = 1;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("invalid mission config: {0}")]
    Config(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("gradient evaluation failed: {0}")]
    Gradient(String),
}

impl From<MissionError> for PlanError {
    fn from(e: MissionError) -> Self {
        PlanError::Evaluation(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Distance counted as reaching the target, m.
    pub goal: f64,
    /// Distance inside which the speed limit applies, m.
    pub keep_out: f64,
    /// Speed limit, m/s.
    pub speed: f64,
    pub loiter_inner: f64,
    pub loiter_outer: f64,
    /// Required dwell in the loiter band, s.
    pub dwell: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            goal: 0.1,
            keep_out: 2.0,
            speed: 0.1,
            loiter_inner: 2.0,
            loiter_outer: 3.0,
            dwell: 10.0,
        }
    }
}

impl Thresholds {
    fn validate(&self, horizon: f64) -> Result<(), MissionError> {
        let named = [
            ("goal", self.goal),
            ("keep_out", self.keep_out),
            ("speed", self.speed),
            ("loiter_inner", self.loiter_inner),
            ("loiter_outer", self.loiter_outer),
            ("dwell", self.dwell),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(MissionError::Config(format!(
                "thresholds.{name} must be positive, got {v}"
            )));
        }
        if self.loiter_inner >= self.loiter_outer {
            return Err(MissionError::Config(
                "thresholds.loiter_inner must be below loiter_outer".into(),
            ));
        }
        if self.dwell >= horizon {
            return Err(MissionError::Config(format!(
                "thresholds.dwell {} must be shorter than the horizon {horizon}",
                self.dwell
            )));
        }
        Ok(())
    }
}

/// ◇(r ≤ goal).
pub fn spec_reach(th: &Thresholds) -> Formula {
    Formula::eventually(Interval::unbounded(), Formula::le(R, th.goal))
}

/// (r ≥ keep_out) U □(v ≤ speed).
pub fn spec_speed_limit(th: &Thresholds) -> Formula {
    Formula::until(
        Interval::unbounded(),
        Formula::ge(R, th.keep_out),
        Formula::always(Interval::unbounded(), Formula::le(V, th.speed)),
    )
}

/// ◇□[0, dwell](inner ≤ r ∧ r ≤ outer).
pub fn spec_loiter(th: &Thresholds) -> Formula {
    let band = Formula::and(
        Formula::ge(R, th.loiter_inner),
        Formula::le(R, th.loiter_outer),
    );
    let dwell = Interval::new(0.0, th.dwell).expect("validated dwell");
    Formula::eventually(Interval::unbounded(), Formula::always(dwell, band))
}

/// Low-speed rendezvous.
pub fn spec_mission1(th: &Thresholds) -> Formula {
    Formula::and(spec_reach(th), spec_speed_limit(th))
}

/// Loiter, then low-speed rendezvous.
pub fn spec_mission2(th: &Thresholds) -> Formula {
    Formula::and(spec_mission1(th), spec_loiter(th))
}

/// Reach and loiter without a speed limit.
pub fn spec_dubins(th: &Thresholds) -> Formula {
    Formula::and(spec_reach(th), spec_loiter(th))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecKind {
    Mission1,
    Mission2,
    Dubins,
}

/// Smoothing sharpness per outer round: `initial` until `anneal_after`
/// rounds have completed, `initial · factor` afterwards and for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSchedule {
    pub initial: f64,
    pub factor: f64,
    pub anneal_after: usize,
}

impl Default for SmoothingSchedule {
    fn default() -> Self {
        SmoothingSchedule {
            initial: 100.0,
            factor: 10.0,
            anneal_after: 1,
        }
    }
}

impl SmoothingSchedule {
    pub fn k(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Round(r) if r < self.anneal_after => self.initial,
            _ => self.initial * self.factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub name: String,
    pub plant: Plant,
    pub spec: SpecKind,
    /// Overrides `spec` with a formula over the channels `r` and `v`.
    #[serde(default)]
    pub formula: Option<String>,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub lambda: f64,
    pub grid: Grid,
    pub chi_box: BoxBounds,
    pub waypoints: usize,
    /// State the initial straight-line reference heads for.
    pub target: Vec<f64>,
    /// Fraction of the horizon at which the initial reference arrives.
    #[serde(default = "default_arrival")]
    pub arrival: f64,
    #[serde(default)]
    pub impulse_norm: ImpulseNorm,
    #[serde(default)]
    pub smoothing: SmoothingSchedule,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_arrival() -> f64 {
    0.8
}

fn rendezvous(name: &str, spec: SpecKind) -> MissionConfig {
    MissionConfig {
        name: name.into(),
        plant: Plant::Cwh(CwhParams::default()),
        spec,
        formula: None,
        thresholds: Thresholds::default(),
        lambda: 5e-5,
        grid: Grid::with_substeps(2.0, 200.0, 4).expect("valid grid"),
        chi_box: BoxBounds::new(
            vec![10.0, 10.0, -3.0, -1.0, -1.0, -1.0],
            vec![13.0, 13.0, 3.0, 1.0, 1.0, 1.0],
        )
        .expect("valid box"),
        waypoints: 11,
        target: vec![0.0; 6],
        arrival: default_arrival(),
        impulse_norm: ImpulseNorm::L1,
        smoothing: SmoothingSchedule::default(),
        solver: SolverConfig::default(),
    }
}

impl MissionConfig {
    pub fn mission1() -> Self {
        rendezvous("mission1", SpecKind::Mission1)
    }

    pub fn mission2() -> Self {
        rendezvous("mission2", SpecKind::Mission2)
    }

    pub fn dubins() -> Self {
        MissionConfig {
            name: "dubins".into(),
            plant: Plant::Dubins(DubinsParams::default()),
            spec: SpecKind::Dubins,
            formula: None,
            thresholds: Thresholds::default(),
            lambda: 5e-5,
            grid: Grid::with_substeps(1.0, 60.0, 2).expect("valid grid"),
            chi_box: BoxBounds::new(vec![-5.0, -0.5, -0.2], vec![-4.5, 0.5, 0.2])
                .expect("valid box"),
            waypoints: 7,
            target: vec![0.0; 3],
            arrival: 0.8,
            impulse_norm: ImpulseNorm::L1,
            smoothing: SmoothingSchedule::default(),
            solver: SolverConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, MissionError> {
        serde_json::from_str(text).map_err(|e| MissionError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, MissionError> {
        let text = std::fs::read_to_string(path).map_err(|e| MissionError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Result of evaluating one plan against one exogenous value.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub robustness: f64,
    pub smooth_robustness: f64,
    pub smoothing_k: f64,
    pub impulse: f64,
    pub cost: f64,
    pub trace: Trace<f64>,
}

/// An immutable, validated mission.
#[derive(Debug, Clone)]
pub struct Mission {
    config: MissionConfig,
    formula: Formula,
    layout: PlanLayout,
    evaluator: Evaluator,
}

impl Mission {
    pub fn new(config: MissionConfig) -> Result<Self, MissionError> {
        let plant = config.plant;
        config.grid.steps()?;
        config.thresholds.validate(config.grid.horizon)?;
        config
            .solver
            .validate()
            .map_err(|e| MissionError::Config(e.to_string()))?;
        if config.chi_box.dim() != plant.state_dim() {
            return Err(MissionError::Config(format!(
                "chi_box has {} coordinates, the plant state has {}",
                config.chi_box.dim(),
                plant.state_dim()
            )));
        }
        if config.target.len() != plant.state_dim() {
            return Err(MissionError::Config(format!(
                "target has {} coordinates, the plant state has {}",
                config.target.len(),
                plant.state_dim()
            )));
        }
        if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
            return Err(MissionError::Config(format!("lambda {}", config.lambda)));
        }
        let s = config.smoothing;
        if !(s.initial > 0.0 && s.factor > 0.0 && (s.initial * s.factor).is_finite()) {
            return Err(MissionError::Config("smoothing must be positive".into()));
        }
        let formula = match &config.formula {
            Some(text) => parse_formula(text, &CHANNELS)?,
            None => match config.spec {
                SpecKind::Mission1 => spec_mission1(&config.thresholds),
                SpecKind::Mission2 => spec_mission2(&config.thresholds),
                SpecKind::Dubins => spec_dubins(&config.thresholds),
            },
        };
        let layout = PlanLayout::for_plant(&plant, config.grid.horizon, config.waypoints)?;
        Ok(Mission {
            config,
            formula,
            layout,
            evaluator: Evaluator::default(),
        })
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn layout(&self) -> &PlanLayout {
        &self.layout
    }

    pub fn plant(&self) -> &Plant {
        &self.config.plant
    }

    fn check_dims(&self, theta: usize, chi: usize) -> Result<(), MissionError> {
        if theta != self.layout.len() {
            return Err(DynamicsError::Dimension {
                what: "plan parameters",
                expected: self.layout.len(),
                found: theta,
            }
            .into());
        }
        if chi != self.config.chi_box.dim() {
            return Err(DynamicsError::Dimension {
                what: "exogenous coordinates",
                expected: self.config.chi_box.dim(),
                found: chi,
            }
            .into());
        }
        Ok(())
    }

    pub fn rollout<T: Scalar>(&self, theta: &[T], chi: &[T]) -> Result<Trace<T>, MissionError> {
        self.check_dims(theta.len(), chi.len())?;
        let plan = self.layout.unpack(theta)?;
        Ok(simulate(&self.config.plant, &plan, chi, self.config.grid)?)
    }

    /// `J = −ρ̃(ψ, ξ(θ, χ), 0) + λ·I` with smoothing sharpness `k`.
    pub fn cost<T: Scalar>(&self, theta: &[T], chi: &[T], k: f64) -> Result<T, MissionError> {
        let trace = self.rollout(theta, chi)?;
        let signal = channel_map(&self.config.plant, &trace);
        let rho = self.evaluator.robustness_smooth(
            &self.formula,
            &signal,
            0.0,
            SmoothingConfig::new(k)?,
        )?;
        let impulse = total_impulse(&trace, self.config.impulse_norm);
        Ok(T::linear_combination(
            &[(rho, -1.0), (impulse, self.config.lambda)],
            0.0,
        ))
    }

    pub fn cost_grad(
        &self,
        theta: &[f64],
        chi: &[f64],
        k: f64,
    ) -> Result<(f64, Vec<f64>, Vec<f64>), MissionError> {
        let tape = Tape::with_capacity(80_000);
        let th = tape.vars(theta);
        let ch = tape.vars(chi);
        let j = self.cost(&th, &ch, k)?;
        let grads = tape
            .gradient(j)
            .map_err(|e| MissionError::Gradient(e.to_string()))?;
        Ok((j.value(), grads.wrt(&th), grads.wrt(&ch)))
    }

    /// Exact robustness of the nominal trace at `t = 0`.
    pub fn robustness(&self, theta: &[f64], chi: &[f64]) -> Result<f64, MissionError> {
        let trace = self.rollout(theta, chi)?;
        let signal = channel_map(&self.config.plant, &trace);
        Ok(self.evaluator.robustness(&self.formula, &signal, 0.0)?)
    }

    /// Full report using the final smoothing sharpness.
    pub fn evaluate(&self, theta: &[f64], chi: &[f64]) -> Result<Evaluation, MissionError> {
        let trace = self.rollout(theta, chi)?;
        let signal = channel_map(&self.config.plant, &trace);
        let k = self.config.smoothing.k(Phase::Final);
        let robustness = self.evaluator.robustness(&self.formula, &signal, 0.0)?;
        let smooth_robustness = self.evaluator.robustness_smooth(
            &self.formula,
            &signal,
            0.0,
            SmoothingConfig::new(k)?,
        )?;
        let impulse = total_impulse(&trace, self.config.impulse_norm);
        Ok(Evaluation {
            robustness,
            smooth_robustness,
            smoothing_k: k,
            impulse,
            cost: -smooth_robustness + self.config.lambda * impulse,
            trace,
        })
    }
}

impl Problem for Mission {
    fn theta_dim(&self) -> usize {
        self.layout.len()
    }

    fn chi_bounds(&self) -> &BoxBounds {
        &self.config.chi_box
    }

    fn initial_theta(&self) -> Vec<f64> {
        self.layout.straight_line(
            &self.config.chi_box.center(),
            &self.config.target,
            self.config.arrival,
        )
    }

    fn cost(&self, theta: &[f64], chi: &[f64], phase: Phase) -> Result<f64, PlanError> {
        Ok(Mission::cost(
            self,
            theta,
            chi,
            self.config.smoothing.k(phase),
        )?)
    }

    fn cost_grad(
        &self,
        theta: &[f64],
        chi: &[f64],
        phase: Phase,
    ) -> Result<(f64, Vec<f64>, Vec<f64>), PlanError> {
        Ok(Mission::cost_grad(
            self,
            theta,
            chi,
            self.config.smoothing.k(phase),
        )?)
    }

    fn margin(&self, theta: &[f64], chi: &[f64]) -> Result<Option<f64>, PlanError> {
        Ok(Some(self.robustness(theta, chi)?))
    }
}

/// `count` i.i.d. uniform draws from `bounds`.
pub fn sample_chi<R: Rng + ?Sized>(
    bounds: &BoxBounds,
    rng: &mut R,
    count: usize,
) -> Vec<Exogenous> {
    (0..count)
        .map(|_| Exogenous::new(&bounds.sample(rng), bounds.clone()).expect("sample inside box"))
        .collect()
}
