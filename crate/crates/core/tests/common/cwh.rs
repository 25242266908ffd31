//! Fine-step CWH reference integrator.

use stlplan::dynamics::Plan;

pub fn mean_motion() -> f64 {
    (3.986e14f64 / 353_000f64.powi(3)).sqrt()
}

/// Independent closed-loop integrator: classical RK4 at a fine step with its own
/// reference interpolation and feedback law.
pub fn fine_rollout(
    plan: &Plan<f64>,
    x0: &[f64],
    h: f64,
    horizon: f64,
    every: f64,
) -> Vec<Vec<f64>> {
    let n = mean_motion();
    let m = 500.0;
    let interp = |rows: &Vec<Vec<f64>>, t: f64| -> Vec<f64> {
        let k = &plan.knots;
        let mut i = 0;
        while i + 2 < k.len() && t >= k[i + 1] {
            i += 1;
        }
        let w = ((t - k[i]) / (k[i + 1] - k[i])).clamp(0.0, 1.0);
        rows[i]
            .iter()
            .zip(&rows[i + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    };
    let rhs = |x: &[f64], t: f64| -> Vec<f64> {
        let r = interp(&plan.states, t);
        let ff = interp(&plan.feedforward, t);
        let u: Vec<f64> = (0..3)
            .map(|i| {
                ff[i]
                    + (0..6)
                        .map(|j| plan.gains[i][j] * (r[j] - x[j]))
                        .sum::<f64>()
            })
            .collect();
        vec![
            x[3],
            x[4],
            x[5],
            3.0 * n * n * x[0] + 2.0 * n * x[4] + u[0] / m,
            -2.0 * n * x[3] + u[1] / m,
            -n * n * x[2] + u[2] / m,
        ]
    };
    let steps = (horizon / h).round() as usize;
    let stride = (every / h).round() as usize;
    let mut x = x0.to_vec();
    let mut out = vec![x.clone()];
    for i in 0..steps {
        let t = i as f64 * h;
        let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(p, q)| p + s * q).collect()
        };
        let k1 = rhs(&x, t);
        let k2 = rhs(&add(&x, &k1, h / 2.0), t + h / 2.0);
        let k3 = rhs(&add(&x, &k2, h / 2.0), t + h / 2.0);
        let k4 = rhs(&add(&x, &k3, h), t + h);
        for j in 0..6 {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if (i + 1) % stride == 0 {
            out.push(x.clone());
        }
    }
    out
}
