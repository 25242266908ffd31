use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use stlplan::dynamics::{write_trace_csv, DynamicsError, Exogenous};
use stlplan::missions::{run_trial, Method, Mission, MissionConfig, MissionError, Trial};
use stlplan::planner::{falsify_independent, solve_cg, FalsifyCandidate, PlanError, Timings};

use crate::report::BenchmarkReport;
use crate::CliError;

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn from_mission(e: MissionError) -> CliError {
    match e {
        MissionError::Config(_) | MissionError::Io { .. } | MissionError::Stl(_) => input(e),
        MissionError::Dynamics(DynamicsError::Dimension { .. }) => input(e),
        _ => CliError::Solver(e.to_string()),
    }
}

fn from_plan(e: PlanError) -> CliError {
    match e {
        PlanError::Config(_) | PlanError::Dimension { .. } => input(e),
        _ => CliError::Solver(e.to_string()),
    }
}

fn load_mission(path: &Path, workers: usize) -> Result<Mission, CliError> {
    let mut config = MissionConfig::load(path).map_err(from_mission)?;
    config.solver.theta.workers = workers;
    config.solver.chi.workers = workers;
    Mission::new(config).map_err(from_mission)
}

/// A JSON array of numbers, or an object carrying one under `field`.
fn load_vector(path: &Path, field: &str) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let array = match &value {
        Value::Array(_) => &value,
        Value::Object(map) => map
            .get(field)
            .ok_or_else(|| CliError::Input(format!("{}: no `{field}` field", path.display())))?,
        _ => {
            return Err(CliError::Input(format!(
                "{}: expected an array or object",
                path.display()
            )))
        }
    };
    serde_json::from_value(array.clone())
        .map_err(|e| CliError::Input(format!("{}: `{field}`: {e}", path.display())))
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<(), CliError> {
    if expected == found {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "expected {expected} {what}, got {found}"
        )))
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_trace(path: &Path, mission: &Mission, theta: &[f64], chi: &[f64]) -> Result<(), CliError> {
    let trace = mission.rollout(theta, chi).map_err(from_mission)?;
    let file = File::create(path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    write_trace_csv(mission.plant(), &trace, BufWriter::new(file))
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct PlanSummary<'a> {
    mission: &'a str,
    seed: u64,
    termination: stlplan::planner::Termination,
    rounds: usize,
    dataset_size: usize,
    counterexamples: usize,
    /// Exact and smoothed robustness of the trace at the box center.
    nominal_robustness: f64,
    nominal_smooth_robustness: f64,
    nominal_impulse: f64,
    timings: &'a Timings,
}

/// Writes `plan.json` (timing-free, so reruns are byte-identical),
/// `summary.json` and `trace.csv` (the plan flown from the box center).
pub fn plan(config: &Path, seed: u64, out: &Path, threads: usize) -> Result<(), CliError> {
    let mission = load_mission(config, threads)?;
    let mut solver = mission.config().solver;
    solver.seed = seed;
    let result = solve_cg(&mission, &solver).map_err(from_plan)?;
    let center = mission.config().chi_box.center();
    let nominal = mission
        .evaluate(&result.theta, &center)
        .map_err(from_mission)?;
    create_dir(out)?;
    write_json(&out.join("plan.json"), &result.without_timings())?;
    let summary = PlanSummary {
        mission: &mission.config().name,
        seed,
        termination: result.termination,
        rounds: result.rounds.len(),
        dataset_size: result.dataset.len(),
        counterexamples: result.dataset.counterexamples(),
        nominal_robustness: nominal.robustness,
        nominal_smooth_robustness: nominal.smooth_robustness,
        nominal_impulse: nominal.impulse,
        timings: &result.timings,
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_trace(&out.join("trace.csv"), &mission, &result.theta, &center)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

#[derive(Serialize)]
struct FalsifyReport {
    seed: u64,
    restarts: usize,
    chi: Vec<f64>,
    robustness: f64,
    satisfied: bool,
    candidates: Vec<FalsifyCandidate>,
}

pub fn falsify(
    config: &Path,
    theta: &Path,
    restarts: usize,
    seed: u64,
    out: Option<&Path>,
    threads: usize,
) -> Result<(), CliError> {
    if restarts == 0 {
        return Err(CliError::Input("--restarts must be at least 1".into()));
    }
    let mission = load_mission(config, threads)?;
    let theta = load_vector(theta, "theta")?;
    check_len("plan parameters", mission.layout().len(), theta.len())?;
    let found = falsify_independent(
        &mission,
        &theta,
        restarts,
        seed,
        &mission.config().solver.chi,
    )
    .map_err(from_plan)?;
    let robustness = match found.margin {
        Some(m) => m,
        None => mission
            .robustness(&theta, &found.chi)
            .map_err(from_mission)?,
    };
    let report = FalsifyReport {
        seed,
        restarts,
        chi: found.chi,
        robustness,
        satisfied: robustness > 0.0,
        candidates: found.candidates,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateReport {
    chi: Vec<f64>,
    robustness: f64,
    smooth_robustness: f64,
    smoothing_k: f64,
    impulse: f64,
    cost: f64,
}

/// χ outside the box is projected onto it; the report shows the value used.
pub fn evaluate(
    config: &Path,
    theta: &Path,
    chi: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mission = load_mission(config, 1)?;
    let theta = load_vector(theta, "theta")?;
    check_len("plan parameters", mission.layout().len(), theta.len())?;
    let bounds = &mission.config().chi_box;
    let chi = match chi {
        Some(path) => load_vector(path, "chi")?,
        None => bounds.center(),
    };
    check_len("exogenous coordinates", bounds.dim(), chi.len())?;
    let chi = Exogenous::new(&chi, bounds.clone())
        .map_err(input)?
        .value()
        .to_vec();
    let eval = mission.evaluate(&theta, &chi).map_err(from_mission)?;
    let report = EvaluateReport {
        chi,
        robustness: eval.robustness,
        smooth_robustness: eval.smooth_robustness,
        smoothing_k: eval.smoothing_k,
        impulse: eval.impulse,
        cost: eval.cost,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("evaluation.json"), &report)?;
        let file = File::create(dir.join("trace.csv")).map_err(input)?;
        write_trace_csv(mission.plant(), &eval.trace, BufWriter::new(file)).map_err(input)?;
    }
    Ok(())
}

/// `a..b` (exclusive), `a..=b`, or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |what: &str| CliError::Input(format!("--seeds {text:?}: {what}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad("not a seed"));
    let text = text.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else if text.is_empty() {
        Vec::new()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad("empty seed list"));
    }
    Ok(seeds)
}

/// Every (seed, method) pair is planned and falsified; pairs run in parallel
/// with single-threaded solvers, records keep seed-major order.
pub fn benchmark(
    config: &Path,
    methods: &[Method],
    seeds: &[u64],
    restarts: usize,
    out: &Path,
    threads: usize,
) -> Result<(), CliError> {
    if seeds.is_empty() {
        return Err(CliError::Input("empty seed list".into()));
    }
    if methods.is_empty() {
        return Err(CliError::Input("no methods".into()));
    }
    if restarts == 0 {
        return Err(CliError::Input("--restarts must be at least 1".into()));
    }
    let mission = load_mission(config, 1)?;
    create_dir(out)?;
    let jobs: Vec<(u64, Method)> = seeds
        .iter()
        .flat_map(|&s| methods.iter().map(move |&m| (s, m)))
        .collect();
    let slots: Vec<Mutex<Option<Trial>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    let started = Instant::now();
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(seed, method)) = jobs.get(i) else {
                    break;
                };
                let trial = run_trial(&mission, method, seed, restarts, 1);
                eprintln!(
                    "[{:>7.1}s] seed {seed} {method}: {}",
                    started.elapsed().as_secs_f64(),
                    match (&trial.error, trial.worst_robustness) {
                        (Some(e), _) => format!("error: {e}"),
                        (None, Some(rho)) =>
                            format!("worst rho {rho:.4}, dataset {}", trial.dataset_size),
                        (None, None) => "no result".into(),
                    }
                );
                *slots[i].lock().expect("result slot") = Some(trial);
            });
        }
    });
    let records: Vec<Trial> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("result slot").expect("every job ran"))
        .collect();
    let report = BenchmarkReport::new(&mission.config().name, restarts, seeds, methods, records);
    write_json(&out.join("benchmark.json"), &report)?;
    let file = File::create(out.join("benchmark.csv")).map_err(input)?;
    report.write_csv(BufWriter::new(file)).map_err(input)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report.summaries).expect("summary serializes")
    );
    if report.records.iter().any(|r| r.error.is_none()) {
        Ok(())
    } else {
        Err(CliError::Solver("every benchmark record failed".into()))
    }
}
