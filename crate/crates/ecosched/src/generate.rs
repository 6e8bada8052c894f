//! Seeded random instances.

use ecosched_core::model::{Instance, Job, ProblemKind, ValidationError};
use ecosched_core::power::{PowerError, PowerFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    #[serde(with = "crate::io::problem_serde")]
    pub problem: ProblemKind,
    pub n_jobs: usize,
    #[serde(default = "one")]
    pub machines: usize,
    pub alpha: f64,
    #[serde(default)]
    pub g: f64,
    #[serde(default)]
    pub wakeup_cost: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_volume")]
    pub volume: (f64, f64),
    #[serde(default = "default_value")]
    pub value: (f64, f64),
    #[serde(default = "default_weight")]
    pub weight: (f64, f64),
}

fn one() -> usize {
    1
}
fn default_horizon() -> f64 {
    20.0
}
fn default_volume() -> (f64, f64) {
    (0.5, 5.0)
}
fn default_value() -> (f64, f64) {
    (0.1, 20.0)
}
fn default_weight() -> (f64, f64) {
    (0.5, 5.0)
}

impl GenParams {
    pub fn new(problem: ProblemKind, n_jobs: usize, alpha: f64) -> Self {
        GenParams {
            problem,
            n_jobs,
            machines: 1,
            alpha,
            g: 0.0,
            wakeup_cost: 0.0,
            epsilon: None,
            horizon: default_horizon(),
            volume: default_volume(),
            value: default_value(),
            weight: default_weight(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("range {name} has min {min} > max {max}")]
    Range { name: &'static str, min: f64, max: f64 },
    #[error("horizon must be > 0, got {0}")]
    Horizon(f64),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Releases uniform in `[0, horizon]`, window lengths uniform in
/// `(0, horizon]`, everything else uniform in its range. Parameters the
/// problem has no use for (machines, values, weights, wake-up cost, epsilon)
/// are dropped rather than rejected.
pub fn generate_random(params: &GenParams, seed: u64) -> Result<Instance, GenError> {
    for (name, (lo, hi)) in [("volume", params.volume), ("value", params.value), ("weight", params.weight)] {
        if !(lo <= hi) || lo < 0.0 {
            return Err(GenError::Range { name, min: lo, max: hi });
        }
    }
    if !(params.horizon > 0.0) {
        return Err(GenError::Horizon(params.horizon));
    }
    let kind = params.problem;
    let power = PowerFunction::new(params.alpha, params.g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = params.horizon;
    let machines = if kind == ProblemKind::ValueMinusEnergy { params.machines } else { 1 };
    let jobs = (0..params.n_jobs)
        .map(|k| {
            let release = rng.gen_range(0.0..=h);
            // (0, h]: reflect the half-open draw.
            let len = h - rng.gen_range(0.0..h);
            let volumes = (0..machines).map(|_| uniform(&mut rng, params.volume)).collect();
            let value = uniform(&mut rng, params.value);
            let weight = uniform(&mut rng, params.weight);
            let flow = kind == ProblemKind::FlowPlusEnergy;
            Job {
                id: k as u64,
                release,
                deadline: (!flow).then_some(release + len),
                volumes,
                value: if matches!(kind, ProblemKind::EnergyPlusLostValue | ProblemKind::ValueMinusEnergy) {
                    value
                } else {
                    0.0
                },
                weight: if flow { weight } else { 0.0 },
            }
        })
        .collect();
    let wake = if matches!(kind, ProblemKind::MinEnergySleep | ProblemKind::FlowPlusEnergy) {
        params.wakeup_cost
    } else {
        0.0
    };
    let eps = if kind == ProblemKind::ValueMinusEnergy { params.epsilon } else { None };
    Ok(Instance::new(kind, power, wake, machines, jobs, eps)?)
}
