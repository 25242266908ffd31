//! Sliding-window aggregation over windows whose endpoints only move forward.

use std::collections::VecDeque;

/// Inclusive index window `[lo, hi]`.
pub(crate) type Window = (usize, usize);

/// Running max (or min, with `better = |a, b| a < b`) by monotonic deque.
/// `steps` is incremented once per push, pop and read.
pub(crate) fn deque_extreme(
    xs: &[f64],
    windows: &[Window],
    better: impl Fn(f64, f64) -> bool,
    steps: &mut u64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(windows.len());
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for &(lo, hi) in windows {
        debug_assert!(lo <= hi && hi < xs.len());
        while next <= hi {
            while let Some(&back) = dq.back() {
                *steps += 1;
                if better(xs[back], xs[next]) {
                    break;
                }
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        while let Some(&front) = dq.front() {
            *steps += 1;
            if front >= lo {
                break;
            }
            dq.pop_front();
        }
        out.push(xs[*dq.front().expect("nonempty window")]);
    }
    out
}

/// Fold an associative `combine` over every window with the two-stack queue:
/// amortized three combines per element, no inverse required.
pub(crate) fn two_stack_fold<V: Clone>(
    xs: &[V],
    windows: &[Window],
    mut combine: impl FnMut(&V, &V) -> V,
) -> Vec<V> {
    let mut out = Vec::with_capacity(windows.len());
    // front holds suffix aggregates, oldest element on top
    let mut front: Vec<V> = Vec::new();
    let mut back_agg: Option<V> = None;
    let mut back_start = 0;
    // queue currently covers [head, tail)
    let mut head = 0;
    let mut tail = 0;
    for &(lo, hi) in windows {
        debug_assert!(lo <= hi && hi < xs.len());
        if lo >= tail {
            front.clear();
            back_agg = None;
            head = lo;
            tail = lo;
            back_start = lo;
        }
        while tail <= hi {
            back_agg = Some(match &back_agg {
                None => xs[tail].clone(),
                Some(acc) => combine(acc, &xs[tail]),
            });
            tail += 1;
        }
        while head < lo {
            if front.is_empty() {
                let mut acc: Option<V> = None;
                for i in (back_start..tail).rev() {
                    let agg = match &acc {
                        None => xs[i].clone(),
                        Some(a) => combine(&xs[i], a),
                    };
                    front.push(agg.clone());
                    acc = Some(agg);
                }
                back_agg = None;
                back_start = tail;
            }
            front.pop();
            head += 1;
        }
        let value = match (front.last(), &back_agg) {
            (Some(f), Some(b)) => combine(f, b),
            (Some(f), None) => f.clone(),
            (None, Some(b)) => b.clone(),
            (None, None) => unreachable!("nonempty window"),
        };
        out.push(value);
    }
    out
}
