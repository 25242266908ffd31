mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_boolean, brute_robustness};
use stlplan::dynamics::BoxBounds;
use stlplan::missions::{
    sample_chi, spec_dubins, spec_loiter, spec_mission1, spec_mission2, spec_reach, Mission,
    MissionConfig, SpecKind, Thresholds,
};
use stlplan::planner::{
    maximize_chi, minimize_theta, MaximizeConfig, MinimizeConfig, Phase, Problem,
};
use stlplan::stl::{eval_boolean, robustness, robustness_smooth, Formula, Signal, SmoothingConfig};

/// `(r, v)` channels sampled every 2 s.
fn channels(r: &[f64], v: &[f64]) -> Signal<f64> {
    let rows = r.iter().zip(v).map(|(&a, &b)| vec![a, b]).collect();
    Signal::uniform(0.0, 2.0, rows).unwrap()
}

/// Piecewise-linear profile through `(t, value)` corners, sampled every 2 s on `[0, 200]`.
fn profile(corners: &[(f64, f64)]) -> Vec<f64> {
    (0..=100)
        .map(|i| {
            let t = 2.0 * i as f64;
            let k = corners.iter().rposition(|&(c, _)| c <= t).unwrap();
            match corners.get(k + 1) {
                None => corners[k].1,
                Some(&(t1, v1)) => {
                    let (t0, v0) = corners[k];
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        })
        .collect()
}

/// Reference robustness at `t = 0`, rooted at the sample times like the evaluator.
fn oracle(phi: &Formula, s: &Signal<f64>) -> f64 {
    brute_robustness(phi, s, s.times())[0]
}

#[test]
fn holding_far_away_misses_the_goal_by_its_distance() {
    let th = Thresholds::default();
    let s = channels(&[10.0; 101], &[0.0; 101]);
    let reach = robustness(&spec_reach(&th), &s, 0.0).unwrap();
    assert!((reach - (0.1 - 10.0)).abs() < 1e-12);
    assert_eq!(reach, oracle(&spec_reach(&th), &s));
    let full = robustness(&spec_mission1(&th), &s, 0.0).unwrap();
    assert!((full + 9.9).abs() < 1e-12);
}

#[test]
fn resting_at_the_target_breaks_keep_out_at_the_start() {
    // the left operand of the Until must hold on the closed interval [0, t']
    let th = Thresholds::default();
    let s = channels(&[0.0; 101], &[0.0; 101]);
    let rho = robustness(&spec_mission1(&th), &s, 0.0).unwrap();
    assert_eq!(rho, oracle(&spec_mission1(&th), &s));
    assert!((rho + 2.0).abs() < 1e-12);
    assert!(!eval_boolean(&spec_mission1(&th), &s, 0.0).unwrap());
}

#[test]
fn slow_approach_satisfies_rendezvous() {
    let th = Thresholds::default();
    let r = profile(&[(0.0, 10.0), (100.0, 0.0)]);
    let s = channels(&r, &[0.05; 101]);
    let rho = robustness(&spec_mission1(&th), &s, 0.0).unwrap();
    assert!((rho - 0.05).abs() < 1e-12, "{rho}");
    assert!(brute_boolean(&spec_mission1(&th), &s, s.times())[0]);
}

#[test]
fn long_dwell_satisfies_loiter_mission() {
    let th = Thresholds::default();
    let r = profile(&[(0.0, 10.0), (20.0, 2.5), (40.0, 2.5), (100.0, 0.0)]);
    let s = channels(&r, &[0.05; 101]);
    let rho = robustness(&spec_mission2(&th), &s, 0.0).unwrap();
    assert!((rho - oracle(&spec_mission2(&th), &s)).abs() < 1e-12);
    assert!((rho - 0.05).abs() < 1e-12, "{rho}");
    let loiter = robustness(&spec_loiter(&th), &s, 0.0).unwrap();
    assert!((loiter - 0.5).abs() < 1e-12, "{loiter}");
}

#[test]
fn short_dwell_violates_loiter() {
    let th = Thresholds::default();
    let r = profile(&[
        (0.0, 10.0),
        (18.0, 3.5),
        (20.0, 2.5),
        (24.0, 2.5),
        (26.0, 1.0),
        (100.0, 0.0),
    ]);
    let s = channels(&r, &[0.05; 101]);
    let loiter = robustness(&spec_loiter(&th), &s, 0.0).unwrap();
    assert!(loiter < 0.0, "{loiter}");
    assert_eq!(loiter, oracle(&spec_loiter(&th), &s));
    assert!(!eval_boolean(&spec_loiter(&th), &s, 0.0).unwrap());
    assert!(robustness(&spec_mission2(&th), &s, 0.0).unwrap() < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjunctions_never_raise_robustness(
        r in prop::collection::vec(0.0..12.0f64, 2..16),
        v in prop::collection::vec(0.0..0.5f64, 16),
    ) {
        let th = Thresholds::default();
        let s = channels(&r, &v[..r.len()]);
        let m1 = robustness(&spec_mission1(&th), &s, 0.0).unwrap();
        let m2 = robustness(&spec_mission2(&th), &s, 0.0).unwrap();
        let reach = robustness(&spec_reach(&th), &s, 0.0).unwrap();
        let dubins = robustness(&spec_dubins(&th), &s, 0.0).unwrap();
        prop_assert!(m2 <= m1);
        prop_assert!(dubins <= reach);
        prop_assert!((m2 - oracle(&spec_mission2(&th), &s)).abs() <= 1e-9);
        prop_assert!((dubins - oracle(&spec_dubins(&th), &s)).abs() <= 1e-9);
    }
}

#[test]
fn samples_are_uniform_and_reproducible() {
    let bounds = BoxBounds::new(vec![10.0, -3.0, 0.5], vec![13.0, 3.0, 0.5]).unwrap();
    let n = 10_000;
    let draws = sample_chi(&bounds, &mut ChaCha8Rng::seed_from_u64(5), n);
    assert_eq!(
        draws,
        sample_chi(&bounds, &mut ChaCha8Rng::seed_from_u64(5), n)
    );
    for i in 0..2 {
        let mean = draws.iter().map(|x| x.value()[i]).sum::<f64>() / n as f64;
        let se = bounds.width(i) / 12f64.sqrt() / (n as f64).sqrt();
        assert!(
            (mean - bounds.center()[i]).abs() <= 3.0 * se,
            "coordinate {i}: {mean}"
        );
    }
    assert!(draws
        .iter()
        .all(|x| x.value()[2] == 0.5 && bounds.contains(x.value())));
    let point = BoxBounds::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
    let corner = sample_chi(&point, &mut ChaCha8Rng::seed_from_u64(0), 20);
    assert!(corner.iter().all(|x| x.value() == [1.0, 2.0]));
}

fn random_theta(mission: &Mission, rng: &mut ChaCha8Rng, spread: f64) -> Vec<f64> {
    mission
        .initial_theta()
        .iter()
        .map(|t| t + rng.gen_range(-spread..spread))
        .collect()
}

#[test]
fn cost_is_negated_smooth_robustness_plus_impulse() {
    let mut cfg = MissionConfig::mission1();
    let k = 100.0;
    let mission = Mission::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let theta = random_theta(&mission, &mut rng, 0.2);
    let chi = mission.chi_bounds().sample(&mut rng);
    let eval = mission.evaluate(&theta, &chi).unwrap();
    let signal = stlplan::dynamics::channel_map(mission.plant(), &eval.trace);
    let smooth = robustness_smooth(
        mission.formula(),
        &signal,
        0.0,
        SmoothingConfig::new(k).unwrap(),
    )
    .unwrap();
    let j: f64 = mission.cost(&theta, &chi, k).unwrap();
    assert!((j - (-smooth + 5e-5 * eval.impulse)).abs() < 1e-12);

    cfg.lambda = 0.0;
    let free = Mission::new(cfg).unwrap();
    assert_eq!(free.cost(&theta, &chi, k).unwrap(), -smooth);

    // no feedforward and no feedback: only the norm offset is left to integrate
    let mut idle = theta.clone();
    let n = idle.len();
    idle[11 * 6..n].iter_mut().for_each(|x| *x = 0.0);
    let e = mission.evaluate(&idle, &chi).unwrap();
    assert!(e.impulse < 1e-3, "{}", e.impulse);
    assert!((e.cost + e.smooth_robustness).abs() < 1e-6);
}

#[test]
fn gradient_matches_central_differences() {
    let mission = Mission::new(MissionConfig::mission1()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let k = 100.0;
    let h = 1e-5;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    for _ in 0..2 {
        let theta = random_theta(&mission, &mut rng, 0.3);
        let chi = mission.chi_bounds().sample(&mut rng);
        let (_, g_theta, g_chi) = mission.cost_grad(&theta, &chi, k).unwrap();
        let f = |th: &[f64], ch: &[f64]| -> f64 { mission.cost(th, ch, k).unwrap() };
        for i in (0..theta.len()).step_by(7) {
            let (mut a, mut b) = (theta.clone(), theta.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (f(&a, &chi) - f(&b, &chi)) / (2.0 * h);
            assert!(
                rel(g_theta[i], fd) <= 1e-4,
                "theta[{i}]: {} vs {fd}",
                g_theta[i]
            );
        }
        for i in 0..chi.len() {
            let (mut a, mut b) = (chi.clone(), chi.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (f(&theta, &a) - f(&theta, &b)) / (2.0 * h);
            assert!(rel(g_chi[i], fd) <= 1e-4, "chi[{i}]: {} vs {fd}", g_chi[i]);
        }
    }
}

#[test]
fn mission1_fit_descends_and_adversary_beats_the_dataset() {
    let mission = Mission::new(MissionConfig::mission1()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let chis: Vec<Vec<f64>> = (0..8)
        .map(|_| mission.chi_bounds().sample(&mut rng))
        .collect();
    let data: Vec<&[f64]> = chis.iter().map(Vec::as_slice).collect();
    let fit = minimize_theta(
        &mission,
        &data,
        &mission.initial_theta(),
        Phase::Round(0),
        &MinimizeConfig::default(),
    )
    .unwrap();
    assert!(fit.value < fit.initial_value);
    assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));

    let worst = maximize_chi(
        &mission,
        &fit.theta,
        &data,
        &mut rng,
        Phase::Round(0),
        &MaximizeConfig::default(),
    )
    .unwrap();
    for chi in &data {
        assert!(worst.value >= Problem::cost(&mission, &fit.theta, chi, Phase::Round(0)).unwrap());
    }
    assert!(mission.chi_bounds().contains(&worst.chi));
}

#[test]
fn dubins_mission_runs_end_to_end() {
    let mission = Mission::new(MissionConfig::dubins()).unwrap();
    assert_eq!(mission.config().spec, SpecKind::Dubins);
    let theta = mission.initial_theta();
    let chi = mission.chi_bounds().center();
    let (j, g_theta, g_chi) = mission.cost_grad(&theta, &chi, 100.0).unwrap();
    assert!(j.is_finite());
    assert!(g_theta.iter().chain(&g_chi).all(|g| g.is_finite()));
    let fit = minimize_theta(
        &mission,
        &[&chi],
        &theta,
        Phase::Final,
        &MinimizeConfig {
            max_iterations: 40,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(fit.value < fit.initial_value);
    let eval = mission.evaluate(&fit.theta, &chi).unwrap();
    let reach = robustness(
        &spec_reach(&mission.config().thresholds),
        &stlplan::dynamics::channel_map(mission.plant(), &eval.trace),
        0.0,
    )
    .unwrap();
    assert!(eval.robustness <= reach);
}
