use std::io::Write;

use serde::{Deserialize, Serialize};
use stlplan::missions::{Method, Trial};

/// Per-method aggregate over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub records: usize,
    pub failures: usize,
    /// Fraction of records whose worst-case robustness is positive.
    pub success_rate: f64,
    pub median_seconds: Option<f64>,
    pub median_dataset_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub mission: String,
    pub restarts: usize,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub records: Vec<Trial>,
    pub summaries: Vec<MethodSummary>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

impl BenchmarkReport {
    pub fn new(
        mission: &str,
        restarts: usize,
        seeds: &[u64],
        methods: &[Method],
        records: Vec<Trial>,
    ) -> Self {
        let summaries = methods
            .iter()
            .map(|&method| {
                let mine: Vec<&Trial> = records.iter().filter(|r| r.method == method).collect();
                let ok: Vec<&&Trial> = mine.iter().filter(|r| r.error.is_none()).collect();
                let successes = mine.iter().filter(|r| r.satisfied).count();
                MethodSummary {
                    method,
                    records: mine.len(),
                    failures: mine.len() - ok.len(),
                    success_rate: if mine.is_empty() {
                        0.0
                    } else {
                        successes as f64 / mine.len() as f64
                    },
                    median_seconds: median(
                        &mut ok.iter().map(|r| r.wall_seconds).collect::<Vec<_>>(),
                    ),
                    median_dataset_size: median(
                        &mut ok.iter().map(|r| r.dataset_size as f64).collect::<Vec<_>>(),
                    ),
                }
            })
            .collect();
        BenchmarkReport {
            mission: mission.to_string(),
            restarts,
            seeds: seeds.to_vec(),
            methods: methods.to_vec(),
            records,
            summaries,
        }
    }

    /// One row per record; the worst exogenous value is `;`-separated.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "seed",
            "method",
            "worst_robustness",
            "satisfied",
            "impulse",
            "wall_seconds",
            "rounds",
            "dataset_size",
            "counterexamples",
            "termination",
            "worst_chi",
            "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let chi = r
                .worst_chi
                .as_ref()
                .map(|c| c.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            let termination = r
                .termination
                .map(|t| {
                    serde_json::to_value(t)
                        .expect("plain enum")
                        .as_str()
                        .unwrap_or("")
                        .to_string()
                })
                .unwrap_or_default();
            w.write_record([
                r.seed.to_string(),
                r.method.to_string(),
                opt(r.worst_robustness),
                r.satisfied.to_string(),
                opt(r.impulse),
                r.wall_seconds.to_string(),
                r.rounds.to_string(),
                r.dataset_size.to_string(),
                r.counterexamples.to_string(),
                termination,
                chi,
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
