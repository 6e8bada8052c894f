//! Grids of generated instances run through the full pipeline.

use std::path::PathBuf;

use ecosched_core::model::{ProblemKind, ValidationError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{batch_report, Row};
use crate::error::AppError;
use crate::generate::{generate_random, GenParams};
use crate::io::problem_serde;
use crate::report::{certify_report, parse_report, run_instance, Algo, OracleMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    /// Inclusive.
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(with = "problem_serde")]
    pub problem: ProblemKind,
    #[serde(default)]
    pub algo: Option<Algo>,
    pub alphas: Vec<f64>,
    #[serde(default = "zero")]
    pub gs: Vec<f64>,
    #[serde(default = "zero")]
    pub wakeup_costs: Vec<f64>,
    /// `null` entries use the power function's own threshold.
    #[serde(default = "no_eps")]
    pub epsilons: Vec<Option<f64>>,
    pub ns: Vec<usize>,
    pub seeds: SeedRange,
    #[serde(default = "one")]
    pub machines: usize,
    #[serde(default = "horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub oracle: OracleMode,
    pub output: PathBuf,
}

fn zero() -> Vec<f64> {
    vec![0.0]
}
fn no_eps() -> Vec<Option<f64>> {
    vec![None]
}
fn one() -> usize {
    1
}
fn horizon() -> f64 {
    20.0
}

/// One cell of the grid with its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub params: GenParams,
    pub epsilon: Option<f64>,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let lists = [
            ("alphas", self.alphas.len()),
            ("gs", self.gs.len()),
            ("wakeup_costs", self.wakeup_costs.len()),
            ("epsilons", self.epsilons.len()),
            ("ns", self.ns.len()),
        ];
        for (name, len) in lists {
            if len == 0 {
                return Err(ValidationError::new(name, "must not be empty"));
            }
        }
        if self.seeds.start > self.seeds.end {
            return Err(ValidationError::new(
                "seeds",
                format!("start {} is after end {}", self.seeds.start, self.seeds.end),
            ));
        }
        if let Some(a) = self.algo {
            if a.problem() != self.problem {
                return Err(ValidationError::new("algo", format!("{a} does not apply to {}", self.problem)));
            }
        }
        Ok(())
    }

    pub fn algo(&self) -> Algo {
        self.algo.unwrap_or_else(|| Algo::default_for(self.problem))
    }

    pub fn tasks(&self) -> Vec<Task> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &g in &self.gs {
                for &a in &self.wakeup_costs {
                    for &eps in &self.epsilons {
                        for &n in &self.ns {
                            for seed in self.seeds.start..=self.seeds.end {
                                let mut p = GenParams::new(self.problem, n, alpha);
                                p.g = g;
                                p.wakeup_cost = a;
                                p.machines = self.machines;
                                p.horizon = self.horizon;
                                out.push(Task { params: p, epsilon: eps, seed });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Generates, runs and certifies one task exactly as the `generate`, `run`
/// and `certify` commands would.
pub fn run_task(task: &Task, algo: Algo, oracle: OracleMode) -> Result<Row, AppError> {
    let inst = generate_random(&task.params, task.seed).map_err(|e| AppError::Usage(e.to_string()))?;
    let eps = if algo == Algo::Ve { task.epsilon } else { None };
    let rep = run_instance(inst, algo, eps)?;
    let rep = parse_report(&serde_json::to_string(&rep).expect("report serialises"))?;
    let cert = certify_report(&rep, oracle)?;
    let inst = rep.instance.to_instance()?;
    Ok(Row::new(task.seed, &inst, rep.epsilon, &cert.certificate))
}

/// Thread cap from `ECOSCHED_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("ECOSCHED_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs every task and returns the CSV text.
pub fn run_sweep(cfg: &SweepConfig) -> Result<String, AppError> {
    cfg.validate()?;
    let algo = cfg.algo();
    let tasks = cfg.tasks();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| AppError::Usage(e.to_string()))?;
    let rows: Result<Vec<Row>, AppError> =
        pool.install(|| tasks.par_iter().map(|t| run_task(t, algo, cfg.oracle)).collect());
    batch_report(&rows?)
}
