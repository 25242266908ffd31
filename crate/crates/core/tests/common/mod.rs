//! Brute-force reference semantics and random instance generators shared by
//! the integration tests.
#![allow(dead_code)]

pub mod cwh;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stlplan::stl::{Direction, Formula, Interval, Signal};

pub const TOP: f64 = 1e9;

fn lerp_at(signal: &Signal<f64>, c: usize, t: f64) -> f64 {
    let ts = signal.times();
    let vs = signal.values();
    if t >= ts[ts.len() - 1] {
        return vs[ts.len() - 1][c];
    }
    for i in 0..ts.len() - 1 {
        if ts[i] <= t && t < ts[i + 1] {
            let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
            if w == 0.0 {
                return vs[i][c];
            }
            return vs[i][c] * (1.0 - w) + vs[i + 1][c] * w;
        }
    }
    unreachable!("time before the first sample")
}

fn clamp_shift(t: f64, offset: f64, end: f64) -> f64 {
    if offset.is_infinite() {
        end
    } else {
        (t + offset).min(end)
    }
}

/// Evaluation points of an `Until`'s operands: parent points plus both shifted endpoints.
fn operand_points(times: &[f64], i: &Interval, end: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = times.to_vec();
    for &t in times {
        pts.push(clamp_shift(t, i.lower(), end));
        pts.push(clamp_shift(t, i.upper(), end));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Recursive sup/inf definition evaluated by exhaustive enumeration.
pub fn brute_robustness(phi: &Formula, s: &Signal<f64>, times: &[f64]) -> Vec<f64> {
    match phi {
        Formula::True => vec![TOP; times.len()],
        Formula::Predicate(p) => times
            .iter()
            .map(|&t| {
                let x = lerp_at(s, p.channel, t);
                match p.direction {
                    Direction::AtLeast => x - p.threshold,
                    Direction::AtMost => p.threshold - x,
                }
            })
            .collect(),
        Formula::Not(f) => brute_robustness(f, s, times).iter().map(|x| -x).collect(),
        Formula::And(a, b) => {
            let ra = brute_robustness(a, s, times);
            let rb = brute_robustness(b, s, times);
            ra.iter().zip(&rb).map(|(x, y)| x.min(*y)).collect()
        }
        Formula::Until(i, a, b) => {
            let end = s.end();
            let pts = operand_points(times, i, end);
            let r1 = brute_robustness(a, s, &pts);
            let r2 = brute_robustness(b, s, &pts);
            times
                .iter()
                .map(|&t| {
                    let lo = clamp_shift(t, i.lower(), end);
                    let hi = clamp_shift(t, i.upper(), end);
                    let mut best = f64::NEG_INFINITY;
                    for (j, &tp) in pts.iter().enumerate() {
                        if tp < lo || tp > hi {
                            continue;
                        }
                        let mut inner = f64::INFINITY;
                        for (l, &tpp) in pts.iter().enumerate() {
                            if tpp >= t && tpp <= tp {
                                inner = inner.min(r1[l]);
                            }
                        }
                        best = best.max(r2[j].min(inner));
                    }
                    best
                })
                .collect()
        }
    }
}

pub fn brute_boolean(phi: &Formula, s: &Signal<f64>, times: &[f64]) -> Vec<bool> {
    match phi {
        Formula::True => vec![true; times.len()],
        Formula::Predicate(p) => times
            .iter()
            .map(|&t| {
                let x = lerp_at(s, p.channel, t);
                match p.direction {
                    Direction::AtLeast => x >= p.threshold,
                    Direction::AtMost => x <= p.threshold,
                }
            })
            .collect(),
        Formula::Not(f) => brute_boolean(f, s, times).iter().map(|x| !x).collect(),
        Formula::And(a, b) => {
            let ra = brute_boolean(a, s, times);
            let rb = brute_boolean(b, s, times);
            ra.iter().zip(&rb).map(|(x, y)| *x && *y).collect()
        }
        Formula::Until(i, a, b) => {
            let end = s.end();
            let pts = operand_points(times, i, end);
            let r1 = brute_boolean(a, s, &pts);
            let r2 = brute_boolean(b, s, &pts);
            times
                .iter()
                .map(|&t| {
                    let lo = clamp_shift(t, i.lower(), end);
                    let hi = clamp_shift(t, i.upper(), end);
                    pts.iter().enumerate().any(|(j, &tp)| {
                        tp >= lo
                            && tp <= hi
                            && r2[j]
                            && pts
                                .iter()
                                .enumerate()
                                .all(|(l, &tpp)| tpp < t || tpp > tp || r1[l])
                    })
                })
                .collect()
        }
    }
}

pub fn random_signal(rng: &mut ChaCha8Rng, max_samples: usize, channels: usize) -> Signal<f64> {
    let n = rng.gen_range(1..=max_samples);
    let mut t = 0.0;
    let mut times = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            // half the gaps are whole units so that integer intervals hit samples
            t += if rng.gen_bool(0.5) {
                1.0
            } else {
                rng.gen_range(0.2..1.5)
            };
        }
        times.push(t);
    }
    let values = (0..n)
        .map(|_| (0..channels).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    Signal::new(times, values).unwrap()
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let (a, len) = if rng.gen_bool(0.5) {
        (rng.gen_range(0..3) as f64, rng.gen_range(0..4) as f64)
    } else {
        (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0))
    };
    Interval::new(a, a + len).unwrap()
}

fn random_predicate(rng: &mut ChaCha8Rng, channels: usize) -> Formula {
    let c = rng.gen_range(0..channels);
    let b = rng.gen_range(-3.0..3.0);
    if rng.gen_bool(0.5) {
        Formula::ge(c, b)
    } else {
        Formula::le(c, b)
    }
}

/// Random formula with at most `depth` nested operators and bounded intervals.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize, channels: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.05) {
            Formula::True
        } else {
            random_predicate(rng, channels)
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..7) {
        0 => Formula::not(random_formula(rng, d, channels)),
        1 => Formula::and(
            random_formula(rng, d, channels),
            random_formula(rng, d, channels),
        ),
        2 => Formula::or(
            random_formula(rng, d, channels),
            random_formula(rng, d, channels),
        ),
        3 => Formula::eventually(random_interval(rng), random_formula(rng, d, channels)),
        4 => Formula::always(random_interval(rng), random_formula(rng, d, channels)),
        _ => Formula::until(
            random_interval(rng),
            random_formula(rng, d, channels),
            random_formula(rng, d, channels),
        ),
    }
}

/// Deterministic corpus of (formula, signal) pairs.
pub fn corpus(seed: u64, count: usize) -> Vec<(Formula, Signal<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let channels = rng.gen_range(1..=2);
            let s = random_signal(&mut rng, 20, channels);
            let f = random_formula(&mut rng, 3, channels);
            (f, s)
        })
        .collect()
}
