use crate::autodiff::Scalar;

use super::StlError;

/// Sampled signal, piecewise-affine between samples and constant after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<T = f64> {
    times: Vec<f64>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> Signal<T> {
    pub fn new(times: Vec<f64>, values: Vec<Vec<T>>) -> Result<Self, StlError> {
        if times.is_empty() || values.is_empty() {
            return Err(StlError::EmptySignal);
        }
        if times.len() != values.len() {
            return Err(StlError::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(StlError::NonIncreasingTimes { index: i });
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(StlError::NonIncreasingTimes { index: i + 1 });
        }
        let dim = values[0].len();
        if let Some(i) = values.iter().position(|v| v.len() != dim) {
            return Err(StlError::DimensionMismatch {
                index: i,
                expected: dim,
                found: values[i].len(),
            });
        }
        Ok(Signal { times, values })
    }

    /// Single-channel signal.
    pub fn scalar(times: Vec<f64>, values: Vec<T>) -> Result<Self, StlError> {
        Self::new(times, values.into_iter().map(|v| vec![v]).collect())
    }

    /// Samples on `t0, t0 + dt, ...`.
    pub fn uniform(t0: f64, dt: f64, values: Vec<Vec<T>>) -> Result<Self, StlError> {
        let times = (0..values.len()).map(|i| t0 + dt * i as f64).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.values[0].len()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn channel(&self, c: usize) -> Vec<T> {
        self.values.iter().map(|v| v[c]).collect()
    }

    /// Interpolated value at `t`.
    pub fn eval_at(&self, t: f64) -> Result<Vec<T>, StlError> {
        let (i, alpha) = self.locate(t)?;
        if alpha == 0.0 {
            return Ok(self.values[i].clone());
        }
        Ok(self.values[i]
            .iter()
            .zip(&self.values[i + 1])
            .map(|(&a, &b)| lerp(a, b, alpha))
            .collect())
    }

    /// Channel `c` resampled at the sorted times `at`, all within the signal domain.
    pub(crate) fn resample_channel(&self, c: usize, at: &[f64]) -> Vec<T> {
        let mut out = Vec::with_capacity(at.len());
        let mut i = 0;
        let last = self.times.len() - 1;
        for &t in at {
            while i < last && self.times[i + 1] <= t {
                i += 1;
            }
            if i == last || t <= self.times[i] {
                out.push(self.values[i][c]);
            } else {
                let alpha = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                out.push(lerp(self.values[i][c], self.values[i + 1][c], alpha));
            }
        }
        out
    }

    /// Segment index and affine weight for `t`; weight 0 means an exact sample
    /// or the constant tail.
    fn locate(&self, t: f64) -> Result<(usize, f64), StlError> {
        if !(t >= self.start()) {
            return Err(StlError::OutOfDomain {
                t,
                start: self.start(),
            });
        }
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return Ok((last, 0.0));
        }
        // times[i] <= t < times[i + 1]
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let alpha = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok((i, alpha))
    }
}

impl Signal<f64> {
    /// Largest absolute channel value over all samples.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

pub(crate) fn lerp<T: Scalar>(a: T, b: T, alpha: f64) -> T {
    if alpha == 0.0 {
        a
    } else {
        T::linear_combination(&[(a, 1.0 - alpha), (b, alpha)], 0.0)
    }
}
