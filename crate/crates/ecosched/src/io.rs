//! JSON forms of instances and schedules.

use std::collections::BTreeMap;
use std::path::Path;

use ecosched_core::model::{Assignment, Instance, Job, MachineState, ProblemKind, Schedule, StateInterval, ValidationError};
use ecosched_core::power::PowerFunction;
use ecosched_core::step::StepFunction;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

pub mod problem_serde {
    use ecosched_core::model::ProblemKind;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &ProblemKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(k.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ProblemKind, D::Error> {
        let s = String::deserialize(d)?;
        ProblemKind::parse(&s).ok_or_else(|| {
            let names: Vec<&str> = ProblemKind::ALL.iter().map(|k| k.as_str()).collect();
            de::Error::custom(format!("unknown problem `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFile {
    pub alpha: f64,
    #[serde(default)]
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub id: u64,
    pub release: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
    pub volumes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(with = "problem_serde")]
    pub problem: ProblemKind,
    pub power: PowerFile,
    #[serde(default)]
    pub wakeup_cost: f64,
    #[serde(default = "one")]
    pub machines: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub jobs: Vec<JobFile>,
}

fn one() -> usize {
    1
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let values = matches!(inst.kind, ProblemKind::EnergyPlusLostValue | ProblemKind::ValueMinusEnergy);
        let weights = inst.kind == ProblemKind::FlowPlusEnergy;
        InstanceFile {
            problem: inst.kind,
            power: PowerFile { alpha: inst.power.alpha(), g: inst.power.g() },
            wakeup_cost: inst.wakeup_cost,
            machines: inst.machines,
            epsilon: inst.epsilon,
            jobs: inst
                .jobs
                .iter()
                .map(|j| JobFile {
                    id: j.id,
                    release: j.release,
                    deadline: j.deadline,
                    volumes: j.volumes.clone(),
                    value: (values || j.value != 0.0).then_some(j.value),
                    weight: (weights || j.weight != 0.0).then_some(j.weight),
                })
                .collect(),
        }
    }
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<Instance, ValidationError> {
        let power = PowerFunction::new(self.power.alpha, self.power.g).map_err(|e| {
            let field = if self.power.alpha.is_finite() && self.power.alpha >= 1.0 { "power.g" } else { "power.alpha" };
            ValidationError::new(field, e.to_string())
        })?;
        let jobs = self
            .jobs
            .iter()
            .map(|j| Job {
                id: j.id,
                release: j.release,
                deadline: j.deadline,
                volumes: j.volumes.clone(),
                value: j.value.unwrap_or(0.0),
                weight: j.weight.unwrap_or(0.0),
            })
            .collect();
        Instance::new(self.problem, power, self.wakeup_cost, self.machines, jobs, self.epsilon)
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, AppError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| AppError::Parse(e.to_string()))?;
    Ok(file.to_instance()?)
}

pub fn instance_to_json(inst: &Instance) -> String {
    to_pretty(&InstanceFile::from(inst))
}

pub fn load_instance(path: &Path) -> Result<Instance, AppError> {
    parse_instance(&read(path)?)
}

pub fn read(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|source| AppError::Io { path: path.display().to_string(), source })
}

pub fn write(path: &Path, text: &str) -> Result<(), AppError> {
    std::fs::write(path, text).map_err(|source| AppError::Io { path: path.display().to_string(), source })
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serialises");
    s.push('\n');
    s
}

/// A step function as `[from, to, value]` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepFile(pub Vec<[f64; 3]>);

impl From<&StepFunction> for StepFile {
    fn from(f: &StepFunction) -> Self {
        StepFile(f.pieces().map(|(a, b, v)| [a, b, v]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AssignmentFile {
    Machine(usize),
    Rejected(RejectedTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectedTag {
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub from: f64,
    pub to: f64,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub per_job_speed: BTreeMap<u64, StepFile>,
    pub assignment: BTreeMap<u64, AssignmentFile>,
    pub state_timeline: Vec<Vec<StateFile>>,
    pub completion_times: BTreeMap<u64, f64>,
}

impl From<&Schedule> for ScheduleFile {
    fn from(s: &Schedule) -> Self {
        ScheduleFile {
            per_job_speed: s.per_job_speed.iter().map(|(id, f)| (*id, f.into())).collect(),
            assignment: s
                .assignment
                .iter()
                .map(|(id, a)| {
                    let a = match a {
                        Assignment::Machine(i) => AssignmentFile::Machine(*i),
                        Assignment::Rejected => AssignmentFile::Rejected(RejectedTag::Rejected),
                    };
                    (*id, a)
                })
                .collect(),
            state_timeline: s
                .state_timeline
                .iter()
                .map(|tl| tl.iter().map(state_file).collect())
                .collect(),
            completion_times: s.completion_times.clone(),
        }
    }
}

fn state_file(s: &StateInterval) -> StateFile {
    StateFile { from: s.from, to: s.to, state: s.state.as_str().to_string() }
}

impl ScheduleFile {
    pub fn to_schedule(&self) -> Result<Schedule, AppError> {
        let mut per_job_speed = BTreeMap::new();
        for (id, f) in &self.per_job_speed {
            let pieces: Vec<(f64, f64, f64)> = f.0.iter().map(|p| (p[0], p[1], p[2])).collect();
            let sf = StepFunction::from_pieces(&pieces);
            per_job_speed.insert(*id, sf);
        }
        let assignment = self
            .assignment
            .iter()
            .map(|(id, a)| {
                let a = match a {
                    AssignmentFile::Machine(i) => Assignment::Machine(*i),
                    AssignmentFile::Rejected(_) => Assignment::Rejected,
                };
                (*id, a)
            })
            .collect();
        let mut state_timeline = Vec::new();
        for (i, tl) in self.state_timeline.iter().enumerate() {
            let mut out = Vec::new();
            for (k, s) in tl.iter().enumerate() {
                let state = match s.state.as_str() {
                    "working" => MachineState::Working,
                    "idle" => MachineState::Idle,
                    "sleep" => MachineState::Sleep,
                    other => {
                        return Err(AppError::Validation(ValidationError::new(
                            format!("schedule.state_timeline[{i}][{k}].state"),
                            format!("unknown state `{other}`"),
                        )))
                    }
                };
                out.push(StateInterval { from: s.from, to: s.to, state });
            }
            state_timeline.push(out);
        }
        Ok(Schedule { per_job_speed, assignment, state_timeline, completion_times: self.completion_times.clone() })
    }
}
