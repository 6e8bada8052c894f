//! Run reports, certificates and the glue between them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ecosched_core::certify::{self, Certificate, Check, TOL};
use ecosched_core::energy_value::{self, EnergyValueRun};
use ecosched_core::flow::{self, FlowRun};
use ecosched_core::model::{Instance, ProblemKind, Schedule, ValidationError};
use ecosched_core::oracles::{self, OracleResult, MAX_ENERGY_VALUE_JOBS, MAX_VALUE_ENERGY_JOBS, MAX_VALUE_ENERGY_MACHINES};
use ecosched_core::sleep::{self, SleepRun};
use ecosched_core::value_energy::{self, ValueEnergyRun};
use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::io::{problem_serde, InstanceFile, ScheduleFile};

/// Largest flow instance handed to the grid oracle under `--oracle auto`.
pub const AUTO_FLOW_JOBS: usize = 3;
pub const FLOW_GRID_LEVELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ev,
    Ve,
    Oa,
    Soa,
    Flow,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Ev, Algo::Ve, Algo::Oa, Algo::Soa, Algo::Flow];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Ev => "ev",
            Algo::Ve => "ve",
            Algo::Oa => "oa",
            Algo::Soa => "soa",
            Algo::Flow => "flow",
        }
    }

    pub fn problem(self) -> ProblemKind {
        match self {
            Algo::Ev => ProblemKind::EnergyPlusLostValue,
            Algo::Ve => ProblemKind::ValueMinusEnergy,
            Algo::Oa | Algo::Soa => ProblemKind::MinEnergySleep,
            Algo::Flow => ProblemKind::FlowPlusEnergy,
        }
    }

    /// The algorithm a sweep uses when none is named.
    pub fn default_for(kind: ProblemKind) -> Algo {
        match kind {
            ProblemKind::EnergyPlusLostValue => Algo::Ev,
            ProblemKind::ValueMinusEnergy => Algo::Ve,
            ProblemKind::MinEnergySleep => Algo::Soa,
            ProblemKind::FlowPlusEnergy => Algo::Flow,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Algo::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    #[default]
    Auto,
    None,
}

impl FromStr for OracleMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(OracleMode::Auto),
            "none" => Ok(OracleMode::None),
            _ => Err(format!("unknown oracle mode `{s}`")),
        }
    }
}

/// One dual variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEntry {
    pub job: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algo: Algo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub instance: InstanceFile,
    pub primal: f64,
    /// The run's own dual bound, where the algorithm has one.
    pub dual: Option<f64>,
    pub ratio: Option<f64>,
    pub accepted_ids: Vec<u64>,
    pub lambda: Vec<DualEntry>,
    pub gamma: Vec<DualEntry>,
    pub energy: f64,
    pub lost_value: f64,
    pub collected_value: f64,
    pub weighted_flowtime: f64,
    pub schedule: ScheduleFile,
}

/// A finished run of any algorithm.
pub enum Ran {
    Ev(Box<EnergyValueRun>),
    Ve(Box<ValueEnergyRun>),
    Oa(Box<Schedule>),
    Soa(Box<SleepRun>),
    Flow(Box<FlowRun>),
}

fn algo_err(e: impl fmt::Display) -> AppError {
    AppError::Algorithm(e.to_string())
}

/// Checks that `algo` fits the instance and applies an `epsilon` override.
pub fn prepare(mut inst: Instance, algo: Algo, epsilon: Option<f64>) -> Result<Instance, AppError> {
    if algo.problem() != inst.kind {
        return Err(AppError::Usage(format!("algorithm {algo} does not apply to {} instances", inst.kind)));
    }
    if let Some(e) = epsilon {
        if algo != Algo::Ve {
            return Err(AppError::Usage(format!("--epsilon only applies to ve, not {algo}")));
        }
        if !(e > 0.0 && e < 1.0) {
            return Err(AppError::Validation(ValidationError::new("epsilon", format!("must lie in (0, 1), got {e}"))));
        }
        inst.epsilon = Some(e);
    }
    Ok(inst)
}

pub fn execute(inst: &Instance, algo: Algo) -> Result<Ran, AppError> {
    Ok(match algo {
        Algo::Ev => Ran::Ev(Box::new(energy_value::run(inst).map_err(algo_err)?)),
        Algo::Ve => Ran::Ve(Box::new(value_energy::run(inst).map_err(algo_err)?)),
        Algo::Oa => Ran::Oa(Box::new(sleep::run_oa(inst).map_err(algo_err)?)),
        Algo::Soa => Ran::Soa(Box::new(sleep::run_soa(inst).map_err(algo_err)?)),
        Algo::Flow => Ran::Flow(Box::new(flow::run(inst).map_err(algo_err)?)),
    })
}

fn entries(m: &BTreeMap<u64, f64>) -> Vec<DualEntry> {
    m.iter().map(|(id, v)| DualEntry { job: *id, machine: None, value: *v }).collect()
}

pub fn report(inst: &Instance, algo: Algo, ran: &Ran) -> RunReport {
    let (schedule, bd, dual, lambda, gamma, epsilon) = match ran {
        Ran::Ev(r) => (&r.schedule, r.breakdown, Some(r.dual_value), entries(&r.lambda), entries(&r.gamma), None),
        Ran::Ve(r) => {
            let lambda = r.lambda.iter().map(|((i, id), v)| DualEntry { job: *id, machine: Some(*i), value: *v }).collect();
            (&r.schedule, r.breakdown, Some(r.dual_upper), lambda, entries(&r.gamma), Some(r.epsilon))
        }
        Ran::Oa(s) => {
            let e = s.machine_speed(0).integrate_map(|x| inst.power.dyn_p(x));
            let bd = ecosched_core::model::CostBreakdown { dynamic_energy: e, total_primal: e, ..Default::default() };
            (s.as_ref(), bd, None, Vec::new(), Vec::new(), None)
        }
        Ran::Soa(r) => (&r.schedule, r.breakdown, Some(r.dual_lower_bound), entries(&r.lambda), Vec::new(), None),
        Ran::Flow(r) => (&r.schedule, r.breakdown, None, entries(&r.lambda), Vec::new(), None),
    };
    let primal = match ran {
        Ran::Ve(r) => r.alg_value,
        _ => bd.total_primal,
    };
    RunReport {
        algo,
        epsilon,
        instance: InstanceFile::from(inst),
        primal,
        dual,
        ratio: dual.map(|d| certify::observed_ratio(inst.kind, primal, d)).filter(|r| r.is_finite()),
        accepted_ids: schedule.accepted(),
        lambda,
        gamma,
        energy: bd.dynamic_energy + bd.static_energy + bd.wakeup_energy,
        lost_value: bd.lost_value,
        collected_value: bd.collected_value,
        weighted_flowtime: bd.weighted_flowtime,
        schedule: schedule.into(),
    }
}

pub fn run_instance(inst: Instance, algo: Algo, epsilon: Option<f64>) -> Result<RunReport, AppError> {
    let inst = prepare(inst, algo, epsilon)?;
    let ran = execute(&inst, algo)?;
    Ok(report(&inst, algo, &ran))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckFile {
    pub margin: f64,
    pub passed: bool,
    pub gating: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFile {
    pub value: f64,
    pub kind: String,
    pub method: String,
}

impl From<&OracleResult> for OracleFile {
    fn from(o: &OracleResult) -> Self {
        OracleFile { value: o.value, kind: o.kind.as_str().into(), method: o.method.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    #[serde(with = "problem_serde")]
    pub problem: ProblemKind,
    pub algo: Algo,
    pub primal: f64,
    pub dual_or_bound: f64,
    pub bound_source: String,
    pub claimed_ratio: f64,
    /// `None` when the ratio is unbounded, which JSON cannot carry.
    pub observed_ratio: Option<f64>,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub lemma_checks: BTreeMap<String, CheckFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oracles: Vec<OracleFile>,
}

/// A certificate with the oracle results it used.
#[derive(Debug, Clone)]
pub struct Certified {
    pub algo: Algo,
    pub certificate: Certificate,
    pub oracles: Vec<OracleResult>,
}

impl Certified {
    pub fn to_file(&self) -> CertificateFile {
        let c = &self.certificate;
        CertificateFile {
            problem: c.problem,
            algo: self.algo,
            primal: c.primal,
            dual_or_bound: c.dual_or_bound,
            bound_source: c.bound_source.clone(),
            claimed_ratio: c.claimed_ratio,
            observed_ratio: Some(c.observed_ratio).filter(|r| r.is_finite()),
            verdict: c.verdict.as_str().into(),
            note: c.note.clone(),
            lemma_checks: c
                .lemma_checks
                .iter()
                .map(|(k, v)| (k.clone(), CheckFile { margin: v.margin + 0.0, passed: v.passed, gating: v.gating }))
                .collect(),
            oracles: self.oracles.iter().map(OracleFile::from).collect(),
        }
    }
}

fn cert_err(e: impl fmt::Display) -> AppError {
    AppError::Usage(e.to_string())
}

/// Certifies a finished run.
pub fn certify_ran(inst: &Instance, algo: Algo, ran: &Ran, mode: OracleMode) -> Result<Certified, AppError> {
    let auto = mode == OracleMode::Auto;
    let mut used = Vec::new();
    let certificate = match ran {
        Ran::Ev(r) => {
            let o = (auto && inst.jobs.len() <= MAX_ENERGY_VALUE_JOBS)
                .then(|| oracles::brute_force_energy_value(inst))
                .transpose()
                .map_err(algo_err)?;
            used.extend(o.clone());
            certify::certify_energy_value(inst, r, o.as_ref()).map_err(cert_err)?
        }
        Ran::Ve(r) => {
            let o = (auto && inst.jobs.len() <= MAX_VALUE_ENERGY_JOBS && inst.machines <= MAX_VALUE_ENERGY_MACHINES)
                .then(|| oracles::brute_force_value_energy(inst))
                .transpose()
                .map_err(algo_err)?;
            used.extend(o.clone());
            certify::certify_value_energy(inst, r, o.as_ref()).map_err(cert_err)?
        }
        Ran::Oa(s) => certify::certify_oa(inst, s).map_err(cert_err)?,
        Ran::Soa(r) => {
            let l4 = sleep::check_lemma4_duals(inst, r, 100, TOL);
            let b = oracles::sleep_lower_bound(inst, l4.passes().then_some(r.dual_lower_bound)).map_err(algo_err)?;
            used.push(b.result.clone());
            certify::certify_sleep(inst, r, &b).map_err(cert_err)?
        }
        Ran::Flow(r) => {
            let b = (auto && inst.jobs.len() <= AUTO_FLOW_JOBS)
                .then(|| oracles::grid_opt_flow_energy(inst, FLOW_GRID_LEVELS))
                .transpose()
                .map_err(algo_err)?;
            if let Some(b) = &b {
                used.push(b.lower.clone());
                used.push(b.upper.clone());
            }
            certify::certify_flow(inst, r, b.as_ref()).map_err(cert_err)?
        }
    };
    Ok(Certified { algo, certificate, oracles: used })
}

fn set_lambda(ran: &mut Ran, rep: &RunReport) -> Result<(), AppError> {
    let bad = |what: &str, e: &DualEntry| {
        AppError::Validation(ValidationError::new(format!("{what}[job={}]", e.job), "no such dual variable in the run"))
    };
    fn put(m: &mut BTreeMap<u64, f64>, es: &[DualEntry], what: &str, bad: &dyn Fn(&str, &DualEntry) -> AppError) -> Result<(), AppError> {
        for e in es {
            *m.get_mut(&e.job).ok_or_else(|| bad(what, e))? = e.value;
        }
        Ok(())
    }
    match ran {
        Ran::Ev(r) => {
            put(&mut r.lambda, &rep.lambda, "lambda", &bad)?;
            put(&mut r.gamma, &rep.gamma, "gamma", &bad)?;
        }
        Ran::Ve(r) => {
            for e in &rep.lambda {
                let key = (e.machine.unwrap_or(0), e.job);
                *r.lambda.get_mut(&key).ok_or_else(|| bad("lambda", e))? = e.value;
            }
            put(&mut r.gamma, &rep.gamma, "gamma", &bad)?;
        }
        Ran::Oa(_) => {}
        Ran::Soa(r) => put(&mut r.lambda, &rep.lambda, "lambda", &bad)?,
        Ran::Flow(r) => put(&mut r.lambda, &rep.lambda, "lambda", &bad)?,
    }
    Ok(())
}

/// Re-runs the reported algorithm on the embedded instance, substitutes the
/// reported duals and certifies. A report whose primal disagrees with the
/// re-run fails `report_primal`.
pub fn certify_report(rep: &RunReport, mode: OracleMode) -> Result<Certified, AppError> {
    let inst = rep.instance.to_instance()?;
    let inst = prepare(inst, rep.algo, None)?;
    let mut ran = execute(&inst, rep.algo)?;
    let fresh = report(&inst, rep.algo, &ran);
    set_lambda(&mut ran, rep)?;
    let mut out = certify_ran(&inst, rep.algo, &ran, mode)?;
    let c = &mut out.certificate;
    let scale = fresh.primal.abs().max(1.0);
    let check = Check::slack(-(rep.primal - fresh.primal).abs() / scale, 1e-9, true);
    c.lemma_checks.insert("report_primal".into(), check);
    if !check.passed {
        c.verdict = certify::Verdict::Failed;
    }
    Ok(out)
}

pub fn parse_report(text: &str) -> Result<RunReport, AppError> {
    serde_json::from_str(text).map_err(|e| AppError::Parse(e.to_string()))
}
