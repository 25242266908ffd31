//! Bottom-up evaluation of formulas over a signal.
//!
//! Every subformula is evaluated on its own sorted set of time points. The
//! root uses the signal's sample times. An `Until` node evaluated on times
//! `S` evaluates its operands on `S ∪ (S + a) ∪ (S + b)` (shifted points
//! clamped to the last sample, unbounded `b` meaning the last sample), so the
//! interval endpoints are always evaluation points and quantifiers range
//! over the operand's evaluation points inside the interval. Predicates read
//! the signal by affine interpolation.
//!
//! The three semantics (Boolean, exact robustness, smooth robustness) share
//! this walk and differ only in the [`Algebra`] that supplies `min`, `max`
//! and negation.

use std::cell::Cell;

use crate::autodiff::Scalar;

use super::smooth::lse2;
use super::window::{deque_extreme, two_stack_fold, Window};
use super::{Formula, Interval, Predicate, Signal, StlError};

pub(crate) trait Algebra {
    type In: Scalar;
    type Out: Clone;

    fn top(&self) -> Self::Out;
    fn predicate(&self, x: Self::In, p: &Predicate) -> Self::Out;
    fn neg(&self, a: &Self::Out) -> Self::Out;
    fn min(&self, a: &Self::Out, b: &Self::Out) -> Self::Out;
    fn max(&self, a: &Self::Out, b: &Self::Out) -> Self::Out;

    fn window_max(&self, xs: &[Self::Out], windows: &[Window]) -> Vec<Self::Out> {
        two_stack_fold(xs, windows, |a, b| self.max(a, b))
    }

    fn window_min(&self, xs: &[Self::Out], windows: &[Window]) -> Vec<Self::Out> {
        two_stack_fold(xs, windows, |a, b| self.min(a, b))
    }
}

/// Exact quantitative semantics with an operation counter.
pub(crate) struct Exact {
    pub top: f64,
    pub ops: Cell<u64>,
}

impl Exact {
    pub fn new(top: f64) -> Self {
        Exact {
            top,
            ops: Cell::new(0),
        }
    }

    fn tick(&self, n: u64) {
        self.ops.set(self.ops.get() + n);
    }
}

impl Algebra for Exact {
    type In = f64;
    type Out = f64;

    fn top(&self) -> f64 {
        self.top
    }
    fn predicate(&self, x: f64, p: &Predicate) -> f64 {
        self.tick(1);
        p.margin(x)
    }
    fn neg(&self, a: &f64) -> f64 {
        self.tick(1);
        -a
    }
    fn min(&self, a: &f64, b: &f64) -> f64 {
        self.tick(1);
        a.min(*b)
    }
    fn max(&self, a: &f64, b: &f64) -> f64 {
        self.tick(1);
        a.max(*b)
    }
    fn window_max(&self, xs: &[f64], windows: &[Window]) -> Vec<f64> {
        let mut steps = 0;
        let out = deque_extreme(xs, windows, |a, b| a > b, &mut steps);
        self.tick(steps);
        out
    }
    fn window_min(&self, xs: &[f64], windows: &[Window]) -> Vec<f64> {
        let mut steps = 0;
        let out = deque_extreme(xs, windows, |a, b| a < b, &mut steps);
        self.tick(steps);
        out
    }
}

/// Log-sum-exp semantics over any [`Scalar`].
pub(crate) struct Smooth<T> {
    pub k: f64,
    pub top: T,
}

impl<T: Scalar> Algebra for Smooth<T> {
    type In = T;
    type Out = T;

    fn top(&self) -> T {
        self.top
    }
    fn predicate(&self, x: T, p: &Predicate) -> T {
        match p.direction {
            super::Direction::AtLeast => x - p.threshold,
            super::Direction::AtMost => T::linear_combination(&[(x, -1.0)], p.threshold),
        }
    }
    fn neg(&self, a: &T) -> T {
        -*a
    }
    fn min(&self, a: &T, b: &T) -> T {
        -lse2(-*a, -*b, self.k)
    }
    fn max(&self, a: &T, b: &T) -> T {
        lse2(*a, *b, self.k)
    }
}

pub(crate) struct Boolean;

impl Algebra for Boolean {
    type In = f64;
    type Out = bool;

    fn top(&self) -> bool {
        true
    }
    fn predicate(&self, x: f64, p: &Predicate) -> bool {
        p.margin(x) >= 0.0
    }
    fn neg(&self, a: &bool) -> bool {
        !a
    }
    fn min(&self, a: &bool, b: &bool) -> bool {
        *a && *b
    }
    fn max(&self, a: &bool, b: &bool) -> bool {
        *a || *b
    }
}

fn shifted(t: f64, offset: f64, end: f64) -> f64 {
    if offset.is_finite() {
        (t + offset).min(end)
    } else {
        end
    }
}

/// Evaluation points for the operands of an `Until` evaluated at `times`.
pub(crate) fn operand_times(times: &[f64], interval: &Interval, end: f64) -> Vec<f64> {
    let (a, b) = (interval.lower(), interval.upper());
    let mut out = Vec::with_capacity(times.len() * 3);
    let (mut i, mut j, mut k) = (0, 0, 0);
    let n = times.len();
    loop {
        let x = times.get(i).copied();
        let y = (j < n).then(|| shifted(times[j], a, end));
        let z = (k < n).then(|| shifted(times[k], b, end));
        let next = [x, y, z]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        if next == f64::INFINITY {
            break;
        }
        if out.last() != Some(&next) {
            out.push(next);
        }
        if x == Some(next) {
            i += 1;
        }
        if y == Some(next) {
            j += 1;
        }
        if z == Some(next) {
            k += 1;
        }
    }
    out
}

fn position_from(points: &[f64], start: usize, t: f64) -> usize {
    let mut p = start;
    while points[p] < t {
        p += 1;
    }
    debug_assert_eq!(points[p], t);
    p
}

pub(crate) fn evaluate<A: Algebra>(
    alg: &A,
    phi: &Formula,
    signal: &Signal<A::In>,
    times: &[f64],
) -> Result<Vec<A::Out>, StlError> {
    match phi {
        Formula::True => Ok(vec![alg.top(); times.len()]),
        Formula::Predicate(p) => {
            if p.channel >= signal.dimension() {
                return Err(StlError::ChannelOutOfRange {
                    channel: p.channel,
                    dimension: signal.dimension(),
                });
            }
            Ok(signal
                .resample_channel(p.channel, times)
                .into_iter()
                .map(|x| alg.predicate(x, p))
                .collect())
        }
        Formula::Not(f) => Ok(evaluate(alg, f, signal, times)?
            .iter()
            .map(|x| alg.neg(x))
            .collect()),
        Formula::And(a, b) => {
            let ra = evaluate(alg, a, signal, times)?;
            let rb = evaluate(alg, b, signal, times)?;
            Ok(ra.iter().zip(&rb).map(|(x, y)| alg.min(x, y)).collect())
        }
        Formula::Until(interval, lhs, rhs) => {
            let end = signal.end();
            let points = operand_times(times, interval, end);
            let r2 = evaluate(alg, rhs, signal, &points)?;

            // start, interval-lower and interval-upper positions in `points`
            let mut starts = Vec::with_capacity(times.len());
            let mut windows = Vec::with_capacity(times.len());
            let (mut s, mut lo, mut hi) = (0, 0, 0);
            for &t in times {
                s = position_from(&points, s, t);
                lo = position_from(&points, lo, shifted(t, interval.lower(), end));
                hi = position_from(&points, hi, shifted(t, interval.upper(), end));
                starts.push(s);
                windows.push((lo, hi));
            }

            if **lhs == Formula::True {
                return Ok(alg.window_max(&r2, &windows));
            }
            let r1 = evaluate(alg, lhs, signal, &points)?;

            // value(t) = max_{j ∈ [lo, hi]} min(r2[j], min r1[s..=j])
            //          = min(min r1[s..lo), max_{j ∈ [lo, hi]} min(r2[j], min r1[lo..=j]))
            // and the second factor is a fold of the monoid
            // (P₁, B₁)·(P₂, B₂) = (min(P₁, P₂), max(B₁, min(P₁, B₂))).
            let pairs: Vec<(A::Out, A::Out)> = r1
                .iter()
                .zip(&r2)
                .map(|(x, y)| (x.clone(), alg.min(y, x)))
                .collect();
            let reach = two_stack_fold(&pairs, &windows, |l, r| {
                (alg.min(&l.0, &r.0), alg.max(&l.1, &alg.min(&l.0, &r.1)))
            });

            let prefix_windows: Vec<Window> = starts
                .iter()
                .zip(&windows)
                .filter(|(&s, &(lo, _))| lo > s)
                .map(|(&s, &(lo, _))| (s, lo - 1))
                .collect();
            let prefix = alg.window_min(&r1, &prefix_windows);
            let mut prefix = prefix.into_iter();

            Ok(starts
                .iter()
                .zip(&windows)
                .zip(reach)
                .map(|((&s, &(lo, _)), (_, b))| {
                    if lo > s {
                        let a = prefix.next().expect("one prefix per nonempty window");
                        alg.min(&a, &b)
                    } else {
                        b
                    }
                })
                .collect())
        }
    }
}
