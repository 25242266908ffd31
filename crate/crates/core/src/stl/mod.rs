//! Signal temporal logic: formulas, Boolean semantics, exact robustness and
//! its log-sum-exp relaxation.
//!
//! ```
//! use stlplan::stl::{robustness, Formula, Interval, Signal};
//!
//! let s = Signal::scalar(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
//! let phi = Formula::eventually(Interval::unbounded(), Formula::ge(0, 1.0));
//! assert_eq!(robustness(&phi, &s, 0.0).unwrap(), 1.0);
//! ```

mod formula;
mod parse;
mod semantics;
mod signal;
mod smooth;
mod window;

use thiserror::Error;

use crate::autodiff::Scalar;

pub use formula::{Direction, Formula, Interval, Predicate};
pub use parse::parse_formula;
pub use signal::Signal;
pub use smooth::{smooth_max, smooth_min, SmoothingConfig};

use semantics::{evaluate, Boolean, Exact, Smooth};

/// Robustness value standing in for `true`.
pub const DEFAULT_TOP: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StlError {
    #[error("signal has no samples")]
    EmptySignal,
    #[error("{times} sample times but {values} value vectors")]
    LengthMismatch { times: usize, values: usize },
    #[error("sample times must be finite and strictly increasing (index {index})")]
    NonIncreasingTimes { index: usize },
    #[error("sample {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("time {t} precedes the first sample at {start}")]
    OutOfDomain { t: f64, start: f64 },
    #[error("formula references channel {channel} but the signal has {dimension}")]
    ChannelOutOfRange { channel: usize, dimension: usize },
    #[error("invalid interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("smoothing parameter must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("smooth max/min of an empty list")]
    EmptyOperands,
    #[error("top value {top} does not exceed the largest channel magnitude {magnitude}")]
    TopTooSmall { top: f64, magnitude: f64 },
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
}

/// Robustness over time for one formula; same grid as the input signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessTrace {
    signal: Signal<f64>,
}

impl RobustnessTrace {
    pub fn times(&self) -> &[f64] {
        self.signal.times()
    }

    pub fn values(&self) -> Vec<f64> {
        self.signal.channel(0)
    }

    pub fn at(&self, t: f64) -> Result<f64, StlError> {
        Ok(self.signal.eval_at(t)?[0])
    }

    pub fn as_signal(&self) -> &Signal<f64> {
        &self.signal
    }
}

/// Evaluator with a configurable value for `ρ(true)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluator {
    top: f64,
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator { top: DEFAULT_TOP }
    }
}

/// Root evaluation points and the position of `t` among them.
fn root_times<T: Scalar>(signal: &Signal<T>, t: f64) -> Result<(Vec<f64>, usize), StlError> {
    if !(t >= signal.start()) {
        return Err(StlError::OutOfDomain {
            t,
            start: signal.start(),
        });
    }
    let t = t.min(signal.end());
    let times = signal.times();
    let idx = times.partition_point(|&s| s < t);
    if times[idx] == t {
        Ok((times.to_vec(), idx))
    } else {
        let mut v = times.to_vec();
        v.insert(idx, t);
        Ok((v, idx))
    }
}

impl Evaluator {
    pub fn new(top: f64) -> Self {
        Evaluator { top }
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    fn check_top(&self, magnitude: f64) -> Result<(), StlError> {
        if magnitude < self.top {
            Ok(())
        } else {
            Err(StlError::TopTooSmall {
                top: self.top,
                magnitude,
            })
        }
    }

    /// `ρ(φ, s, tᵢ)` at every sample time.
    pub fn robustness_trace(
        &self,
        phi: &Formula,
        signal: &Signal<f64>,
    ) -> Result<RobustnessTrace, StlError> {
        Ok(self.robustness_trace_counted(phi, signal)?.0)
    }

    /// [`Self::robustness_trace`] plus the number of elementary min/max,
    /// negation and window steps it took.
    pub fn robustness_trace_counted(
        &self,
        phi: &Formula,
        signal: &Signal<f64>,
    ) -> Result<(RobustnessTrace, u64), StlError> {
        self.check_top(signal.max_abs())?;
        let alg = Exact::new(self.top);
        let values = evaluate(&alg, phi, signal, signal.times())?;
        let trace = Signal::scalar(signal.times().to_vec(), values)?;
        Ok((RobustnessTrace { signal: trace }, alg.ops.get()))
    }

    pub fn robustness(&self, phi: &Formula, signal: &Signal<f64>, t: f64) -> Result<f64, StlError> {
        self.check_top(signal.max_abs())?;
        let (times, idx) = root_times(signal, t)?;
        let alg = Exact::new(self.top);
        Ok(evaluate(&alg, phi, signal, &times)?[idx])
    }

    pub fn eval_boolean(
        &self,
        phi: &Formula,
        signal: &Signal<f64>,
        t: f64,
    ) -> Result<bool, StlError> {
        let (times, idx) = root_times(signal, t)?;
        Ok(evaluate(&Boolean, phi, signal, &times)?[idx])
    }

    /// Robustness with every min/max replaced by its log-sum-exp relaxation.
    /// Differentiable with respect to the signal values when `T` is a tape variable.
    pub fn robustness_smooth<T: Scalar>(
        &self,
        phi: &Formula,
        signal: &Signal<T>,
        t: f64,
        config: SmoothingConfig,
    ) -> Result<T, StlError> {
        let magnitude = signal
            .values()
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.value().abs()));
        self.check_top(magnitude)?;
        let (times, idx) = root_times(signal, t)?;
        let anchor = signal.values()[0][0];
        let alg = Smooth {
            k: config.k(),
            top: anchor.lift(self.top),
        };
        Ok(evaluate(&alg, phi, signal, &times)?.swap_remove(idx))
    }
}

pub fn robustness(phi: &Formula, signal: &Signal<f64>, t: f64) -> Result<f64, StlError> {
    Evaluator::default().robustness(phi, signal, t)
}

pub fn robustness_trace(phi: &Formula, signal: &Signal<f64>) -> Result<RobustnessTrace, StlError> {
    Evaluator::default().robustness_trace(phi, signal)
}

pub fn eval_boolean(phi: &Formula, signal: &Signal<f64>, t: f64) -> Result<bool, StlError> {
    Evaluator::default().eval_boolean(phi, signal, t)
}

pub fn robustness_smooth<T: Scalar>(
    phi: &Formula,
    signal: &Signal<T>,
    t: f64,
    config: SmoothingConfig,
) -> Result<T, StlError> {
    Evaluator::default().robustness_smooth(phi, signal, t, config)
}
