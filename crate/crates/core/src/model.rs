//! Jobs, instances, schedules and cost breakdowns.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::power::PowerFunction;
use crate::step::{pointwise_sum, StepFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProblemKind {
    EnergyPlusLostValue,
    ValueMinusEnergy,
    MinEnergySleep,
    FlowPlusEnergy,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::EnergyPlusLostValue,
        ProblemKind::ValueMinusEnergy,
        ProblemKind::MinEnergySleep,
        ProblemKind::FlowPlusEnergy,
    ];

    /// Snake-case name used in files.
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::EnergyPlusLostValue => "energy_plus_lost_value",
            ProblemKind::ValueMinusEnergy => "value_minus_energy",
            ProblemKind::MinEnergySleep => "min_energy_sleep",
            ProblemKind::FlowPlusEnergy => "flow_plus_energy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether the objective is maximised.
    pub fn maximises(self) -> bool {
        self == ProblemKind::ValueMinusEnergy
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: u64,
    pub release: f64,
    pub deadline: Option<f64>,
    /// One entry per machine.
    pub volumes: Vec<f64>,
    pub value: f64,
    pub weight: f64,
}

impl Job {
    /// Single-machine deadline job.
    pub fn with_deadline(id: u64, release: f64, deadline: f64, volume: f64, value: f64) -> Self {
        Job { id, release, deadline: Some(deadline), volumes: alloc::vec![volume], value, weight: 0.0 }
    }

    /// Single-machine job without deadline.
    pub fn weighted(id: u64, release: f64, volume: f64, weight: f64) -> Self {
        Job { id, release, deadline: None, volumes: alloc::vec![volume], value: 0.0, weight }
    }

    pub fn volume(&self) -> f64 {
        self.volumes[0]
    }

    /// `w_j / p_j` on the first machine.
    pub fn density(&self) -> f64 {
        self.weight / self.volumes[0]
    }

    /// Deadline, or `+inf` for deadline-less jobs.
    pub fn deadline_or_inf(&self) -> f64 {
        self.deadline.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl core::error::Error for ValidationError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub kind: ProblemKind,
    pub power: PowerFunction,
    pub wakeup_cost: f64,
    pub machines: usize,
    pub jobs: Vec<Job>,
    pub epsilon: Option<f64>,
}

impl Instance {
    /// Validates every invariant and returns the instance unchanged.
    pub fn new(
        kind: ProblemKind,
        power: PowerFunction,
        wakeup_cost: f64,
        machines: usize,
        jobs: Vec<Job>,
        epsilon: Option<f64>,
    ) -> Result<Self, ValidationError> {
        let inst = Instance { kind, power, wakeup_cost, machines, jobs, epsilon };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        fn err(p: impl Into<String>, m: impl Into<String>) -> ValidationError {
            ValidationError::new(p, m)
        }
        if self.machines == 0 {
            return Err(err("machines", "must be at least 1"));
        }
        if self.machines != 1 && self.kind != ProblemKind::ValueMinusEnergy {
            return Err(err("machines", format!("{} requires exactly 1 machine", self.kind)));
        }
        if !(self.wakeup_cost >= 0.0) || !self.wakeup_cost.is_finite() {
            return Err(err("wakeup_cost", "must be a finite number >= 0"));
        }
        let uses_wakeup = matches!(self.kind, ProblemKind::MinEnergySleep | ProblemKind::FlowPlusEnergy);
        if !uses_wakeup && self.wakeup_cost != 0.0 {
            return Err(err("wakeup_cost", format!("must be 0 for {}", self.kind)));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(err("epsilon", "must lie in (0, 1)"));
            }
        }
        let mut ids: Vec<u64> = self.jobs.iter().map(|j| j.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(err(format!("jobs[id={}].id", w[0]), "duplicate job id"));
        }
        let wants_deadline = self.kind != ProblemKind::FlowPlusEnergy;
        for j in &self.jobs {
            let path = |f: &str| format!("jobs[id={}].{}", j.id, f);
            if !(j.release >= 0.0) || !j.release.is_finite() {
                return Err(err(path("release"), "must be a finite number >= 0"));
            }
            match (j.deadline, wants_deadline) {
                (Some(d), true) => {
                    if !(d > j.release) || !d.is_finite() {
                        return Err(err(path("deadline"), format!("deadline {d} must exceed release {}", j.release)));
                    }
                }
                (None, true) => return Err(err(path("deadline"), format!("required for {}", self.kind))),
                (Some(_), false) => return Err(err(path("deadline"), "flow_plus_energy jobs have no deadline")),
                (None, false) => {}
            }
            if j.volumes.len() != self.machines {
                return Err(err(
                    path("volumes"),
                    format!("expected {} entries, found {}", self.machines, j.volumes.len()),
                ));
            }
            if let Some(v) = j.volumes.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(err(path("volumes"), format!("volume {v} must be > 0")));
            }
            if !(j.value >= 0.0) || !j.value.is_finite() {
                return Err(err(path("value"), "must be a finite number >= 0"));
            }
            if !(j.weight >= 0.0) || !j.weight.is_finite() {
                return Err(err(path("weight"), "must be a finite number >= 0"));
            }
        }
        Ok(())
    }

    /// Job indices ordered by `(release, id)`.
    pub fn arrival_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.jobs.len()).collect();
        idx.sort_by(|&a, &b| {
            let (x, y) = (&self.jobs[a], &self.jobs[b]);
            x.release.partial_cmp(&y.release).unwrap().then(x.id.cmp(&y.id))
        });
        idx
    }

    pub fn job(&self, id: u64) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }

    /// Latest deadline (or release) over all jobs.
    pub fn horizon(&self) -> f64 {
        self.jobs.iter().map(|j| j.deadline.unwrap_or(j.release)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    Machine(usize),
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineState {
    Working,
    Idle,
    Sleep,
}

impl MachineState {
    pub fn as_str(self) -> &'static str {
        match self {
            MachineState::Working => "working",
            MachineState::Idle => "idle",
            MachineState::Sleep => "sleep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateInterval {
    pub from: f64,
    pub to: f64,
    pub state: MachineState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub per_job_speed: BTreeMap<u64, StepFunction>,
    pub assignment: BTreeMap<u64, Assignment>,
    /// One timeline per machine.
    pub state_timeline: Vec<Vec<StateInterval>>,
    pub completion_times: BTreeMap<u64, f64>,
}

impl Schedule {
    /// Aggregate speed of machine `i`.
    pub fn machine_speed(&self, i: usize) -> StepFunction {
        let fs: Vec<StepFunction> = self
            .per_job_speed
            .iter()
            .filter(|(id, _)| self.assignment.get(id) == Some(&Assignment::Machine(i)))
            .map(|(_, f)| f.clone())
            .collect();
        pointwise_sum(&fs)
    }

    pub fn accepted(&self) -> Vec<u64> {
        self.assignment.iter().filter(|(_, a)| **a != Assignment::Rejected).map(|(id, _)| *id).collect()
    }

    /// Appends `[from, to)` in `state` to machine `i`, merging with the
    /// previous interval when the state repeats.
    pub fn push_state(&mut self, i: usize, from: f64, to: f64, state: MachineState) {
        if !(to > from) {
            return;
        }
        while self.state_timeline.len() <= i {
            self.state_timeline.push(Vec::new());
        }
        let tl = &mut self.state_timeline[i];
        if let Some(last) = tl.last_mut() {
            if last.state == state && last.to == from {
                last.to = to;
                return;
            }
        }
        tl.push(StateInterval { from, to, state });
    }
}

/// Objective components; fields that do not apply to a problem are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub dynamic_energy: f64,
    pub static_energy: f64,
    pub wakeup_energy: f64,
    pub lost_value: f64,
    pub collected_value: f64,
    pub weighted_flowtime: f64,
    pub total_primal: f64,
}
