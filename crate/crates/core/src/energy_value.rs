//! Single machine, minimise energy plus the value of rejected jobs.
//!
//! Each arriving job water-fills its volume into the virtual load `u` at the
//! cheapest marginal price `P'(v(u))`, where `v` is the dual speed map. The
//! job is accepted when its volume fits before the price reaches
//! `value / volume`, and then runs at exactly its virtual speed.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::edf::{edf, EdfJob};
use crate::model::{Assignment, CostBreakdown, Instance, ProblemKind, Schedule};
use crate::num::{fmax, fmin};
use crate::ode::{closed_form_slope, find_r_star, initial_v, solve_v_of_u, OdeError, Solve, VMap};
use crate::power::PowerFunction;
use crate::step::{combine, joint_window, pointwise_sum, StepFunction};
use crate::waterfill::{fill, level_for_volume, Binding, FillError, LinearPrice, PriceMap};

#[derive(Debug, Clone, PartialEq)]
pub enum EnergyValueError {
    WrongProblem(ProblemKind),
    Ode(OdeError),
    Fill(FillError),
    /// The tabulated speed map stayed infeasible while raising `r`.
    NoSpeedMap { r: f64 },
    DualNonPositive(f64),
}

impl fmt::Display for EnergyValueError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnergyValueError::WrongProblem(k) => write!(f, "expected energy_plus_lost_value, got {k}"),
            EnergyValueError::Ode(e) => write!(f, "speed map: {e}"),
            EnergyValueError::Fill(e) => write!(f, "water-filling: {e}"),
            EnergyValueError::NoSpeedMap { r } => write!(f, "no feasible speed map up to r = {r}"),
            EnergyValueError::DualNonPositive(d) => write!(f, "dual value {d} is not positive"),
        }
    }
}

impl core::error::Error for EnergyValueError {}

impl From<FillError> for EnergyValueError {
    fn from(e: FillError) -> Self {
        EnergyValueError::Fill(e)
    }
}

impl From<OdeError> for EnergyValueError {
    fn from(e: OdeError) -> Self {
        EnergyValueError::Ode(e)
    }
}

/// What happened to one job during its fill.
#[derive(Debug, Clone, PartialEq)]
pub struct FillStep {
    pub id: u64,
    pub window: (f64, f64),
    pub volume: f64,
    pub value: f64,
    pub accepted: bool,
    /// Virtual load before the job.
    pub u_before: StepFunction,
    /// Real speed before the job.
    pub s_before: StepFunction,
    pub level: f64,
    pub placed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyValueRun {
    pub power: PowerFunction,
    pub schedule: Schedule,
    pub virtual_profiles: BTreeMap<u64, StepFunction>,
    pub u_profile: StepFunction,
    pub v_profile: StepFunction,
    pub v_parts: BTreeMap<u64, StepFunction>,
    pub lambda: BTreeMap<u64, f64>,
    pub gamma: BTreeMap<u64, f64>,
    pub accepted: Vec<u64>,
    pub breakdown: CostBreakdown,
    /// `sum gamma + integral Q(v)`; the quantity bounded by `r` times the primal.
    pub dual_value: f64,
    /// `integral P(v) - sum lambda_j integral v_j + sum gamma`.
    pub dual_direct: f64,
    /// Lagrangian dual function at `(lambda, gamma)`: a lower bound on the
    /// optimum by weak duality.
    pub dual_lagrangian: f64,
    pub r: f64,
    pub vmap: VMap,
    pub steps: Vec<FillStep>,
}

struct VPrice<'a> {
    power: PowerFunction,
    vmap: &'a VMap,
}

impl PriceMap for VPrice<'_> {
    fn price(&self, level: f64) -> f64 {
        self.power.dp(self.vmap.v(level))
    }

    fn level_for_price(&self, price: f64) -> Result<f64, FillError> {
        match self.vmap {
            VMap::Linear(c) => LinearPrice { power: self.power, c: *c }.level_for_price(price),
            VMap::Table(_) => crate::waterfill::bisect_level(|l| self.price(l), price),
        }
    }
}

/// Picks `v(u)` and `r`: closed form for `P = z^alpha`, otherwise the
/// tabulated solution of the system at the smallest feasible `r`.
pub fn speed_map_for(inst: &Instance) -> Result<(VMap, f64), EnergyValueError> {
    let p = inst.power;
    if p.g() == 0.0 {
        return Ok((VMap::Linear(closed_form_slope(p.alpha())), p.alpha_pow_alpha()));
    }
    let min_len = inst
        .jobs
        .iter()
        .map(|j| j.deadline.unwrap() - j.release)
        .fold(f64::INFINITY, fmin);
    let total: f64 = inst.jobs.iter().map(|j| j.volume()).sum();
    let u_max = if inst.jobs.is_empty() { 1.0 } else { 2.0 * total / min_len + 1.0 };
    let mut r = find_r_star(&p, 1e-3)?.hi;
    for _ in 0..60 {
        if let Solve::Feasible(m) = solve_v_of_u(&p, r, u_max, u_max / 20_000.0)? {
            return Ok((VMap::Table(m), r));
        }
        r *= 1.01;
    }
    Err(EnergyValueError::NoSpeedMap { r })
}

/// `v` as a function of the load, with untouched time mapped to 0.
fn vfun(vmap: &VMap, u: f64) -> f64 {
    if u > 0.0 {
        vmap.v(u)
    } else {
        0.0
    }
}

pub fn run(inst: &Instance) -> Result<EnergyValueRun, EnergyValueError> {
    if inst.kind != ProblemKind::EnergyPlusLostValue {
        return Err(EnergyValueError::WrongProblem(inst.kind));
    }
    let p = inst.power;
    let (vmap, r) = speed_map_for(inst)?;
    let pm = VPrice { power: p, vmap: &vmap };

    let mut u = StepFunction::zero();
    let mut s = StepFunction::zero();
    let mut virtual_profiles = BTreeMap::new();
    let mut v_parts = BTreeMap::new();
    let mut lambda = BTreeMap::new();
    let mut gamma = BTreeMap::new();
    let mut accepted = Vec::new();
    let mut steps = Vec::new();
    let mut lost = 0.0;
    let mut assignment = BTreeMap::new();

    for idx in inst.arrival_order() {
        let j = &inst.jobs[idx];
        let (rj, dj) = (j.release, j.deadline.unwrap());
        let pj = j.volume();
        let fr = fill(&u, rj, dj, pj, Some(j.value / pj), &pm)?;
        let ok = fr.binding == Binding::VolumeMet;
        let step = FillStep {
            id: j.id,
            window: (rj, dj),
            volume: pj,
            value: j.value,
            accepted: ok,
            u_before: u.clone(),
            s_before: s.clone(),
            level: fr.level,
            placed: fr.placed,
        };
        let vj = combine(&[&u, &fr.increment], |x| fmax(0.0, vfun(&vmap, x[0] + x[1]) - vfun(&vmap, x[0])));
        if ok {
            let lam = pm.price(fr.level);
            lambda.insert(j.id, lam);
            gamma.insert(j.id, lam * pj);
            accepted.push(j.id);
            s = s.add(&fr.increment);
            assignment.insert(j.id, Assignment::Machine(0));
        } else {
            lambda.insert(j.id, j.value / pj);
            gamma.insert(j.id, j.value);
            lost += j.value;
            assignment.insert(j.id, Assignment::Rejected);
        }
        u = u.add(&fr.increment);
        v_parts.insert(j.id, vj);
        virtual_profiles.insert(j.id, fr.increment);
        steps.push(step);
    }

    let jobs: Vec<EdfJob> = accepted
        .iter()
        .map(|id| {
            let j = inst.job(*id).unwrap();
            EdfJob { id: j.id, release: j.release, deadline: j.deadline.unwrap(), volume: j.volume() }
        })
        .collect();
    let ex = edf(&s, &jobs);
    let mut per_job_speed = ex.per_job;
    for j in &inst.jobs {
        per_job_speed.entry(j.id).or_insert_with(StepFunction::zero);
    }
    let schedule = Schedule {
        per_job_speed,
        assignment,
        state_timeline: Vec::new(),
        completion_times: ex.completion,
    };

    let dynamic_energy = s.integrate_map(|x| p.dyn_p(x));
    let breakdown = CostBreakdown {
        dynamic_energy,
        lost_value: lost,
        total_primal: dynamic_energy + lost,
        ..CostBreakdown::default()
    };

    let sum_gamma: f64 = gamma.values().sum();
    let dual_value = sum_gamma + u.integrate_map(|x| p.q(vmap.v(x)));
    let v_profile = u.map(|x| vmap.v(x));
    let lam_int: f64 = v_parts.iter().map(|(id, vj)| lambda[id] * vj.total()).sum();
    let dual_direct = u.integrate_map(|x| p.p(vfun(&vmap, x))) - lam_int + sum_gamma;
    let dual_lagrangian = sum_gamma - lagrangian_penalty(inst, &lambda);

    Ok(EnergyValueRun {
        power: p,
        schedule,
        virtual_profiles,
        u_profile: u,
        v_profile,
        v_parts,
        lambda,
        gamma,
        accepted,
        breakdown,
        dual_value,
        dual_direct,
        dual_lagrangian,
        r,
        vmap,
        steps,
    })
}

/// `integral P*(max_{j: t in window} lambda_j) dt` for the dynamic power.
fn lagrangian_penalty(inst: &Instance, lambda: &BTreeMap<u64, f64>) -> f64 {
    let windows: Vec<StepFunction> = inst
        .jobs
        .iter()
        .map(|j| StepFunction::constant(j.release, j.deadline.unwrap(), lambda[&j.id]))
        .collect();
    let refs: Vec<&StepFunction> = windows.iter().collect();
    let top = combine(&refs, |xs| xs.iter().copied().fold(0.0, fmax));
    top.integrate_map(|y| inst.power.conjugate_dyn(y))
}

/// Worst violation of the per-job accounting that proves
/// `primal <= r * (sum gamma + integral Q(v))`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InductionReport {
    /// `max(0, lhs - rhs) / max(1, |rhs|)` over all chunks.
    pub max_violation: f64,
    pub chunks_checked: usize,
    /// Per job: worst chunk violation.
    pub per_job: Vec<(u64, f64)>,
    /// Smallest `(r-1) a_j + r integral dQ(v)` over rejected jobs (`+inf` if none).
    pub min_rejected_margin: f64,
}

impl InductionReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol && self.min_rejected_margin >= -tol
    }
}

/// Re-simulates every fill in `chunks` equal volume steps and compares the
/// primal increase with `r` times the dual increase on each step.
///
/// The dual increase of a step is `integral dQ(v)` plus the step's volume
/// priced at the level reached at the end of the step; these prices sum to at
/// most `gamma_j`.
pub fn check_induction_step(run: &EnergyValueRun, chunks: usize) -> InductionReport {
    let p = run.power;
    let r = run.r;
    let q = |u: f64| p.q(run.vmap.v(u));
    let price = |l: f64| p.dp(run.vmap.v(l));
    let mut rep = InductionReport { min_rejected_margin: f64::INFINITY, ..Default::default() };
    for st in &run.steps {
        let mut worst = 0.0f64;
        if st.placed > 0.0 {
            let (a, b) = st.window;
            let joint = joint_window(&[&st.u_before, &st.s_before], a, b);
            let base: Vec<(f64, f64, f64)> = joint.iter().map(|(x, y, v)| (*x, *y, v[0])).collect();
            let l0 = base.iter().map(|x| x.2).fold(f64::INFINITY, fmin);
            let mut prev_level = l0;
            let mut dq_total = 0.0;
            for k in 1..=chunks {
                let level = if k == chunks {
                    st.level
                } else {
                    fmin(level_for_volume(&base, st.placed * k as f64 / chunks as f64), st.level)
                };
                let dvol = st.placed / chunks as f64;
                let mut lhs = 0.0;
                let mut dq = 0.0;
                for (x, y, v) in &joint {
                    let w = y - x;
                    let (hu, hs) = (v[0], v[1]);
                    let a0 = fmax(0.0, prev_level - hu);
                    let a1 = fmax(0.0, level - hu);
                    if a1 <= a0 {
                        continue;
                    }
                    lhs += w * (p.dyn_p(hs + a1) - p.dyn_p(hs + a0));
                    dq += w * (q(hu + a1) - q(hu + a0));
                }
                let chunk_price = price(level) * dvol;
                if st.accepted {
                    let rhs = r * (dq + chunk_price);
                    let viol = fmax(0.0, lhs - rhs) / fmax(1.0, rhs.abs());
                    worst = fmax(worst, viol);
                } else {
                    let m = (r - 1.0) * chunk_price + r * dq;
                    let viol = fmax(0.0, -m) / fmax(1.0, chunk_price.abs());
                    worst = fmax(worst, viol);
                }
                dq_total += dq;
                prev_level = level;
                rep.chunks_checked += 1;
            }
            if !st.accepted {
                let margin = (r - 1.0) * st.value + r * dq_total;
                rep.min_rejected_margin = fmin(rep.min_rejected_margin, margin / fmax(1.0, st.value));
            }
        }
        rep.max_violation = fmax(rep.max_violation, worst);
        rep.per_job.push((st.id, worst));
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualFeasibilityReport {
    /// `max(lambda_j - P'(v(t)))` over grid points in job windows.
    pub max_lambda_excess: f64,
    /// `max |lambda_j - P'(v at j's level)|` over accepted jobs.
    pub max_equality_gap: f64,
    /// `max(gamma_j - min(a_j, lambda_j p_j))`.
    pub max_gamma_excess: f64,
}

impl DualFeasibilityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_lambda_excess <= tol && self.max_equality_gap <= tol && self.max_gamma_excess <= tol
    }
}

pub fn check_dual_feasibility(run: &EnergyValueRun, grid: usize) -> DualFeasibilityReport {
    let p = run.power;
    let mut rep = DualFeasibilityReport::default();
    for st in &run.steps {
        let lam = run.lambda[&st.id];
        let (a, b) = st.window;
        for k in 0..grid {
            let t = a + (b - a) * (k as f64 + 0.5) / grid as f64;
            let pv = p.dp(run.vmap.v(run.u_profile.eval(t)));
            rep.max_lambda_excess = fmax(rep.max_lambda_excess, (lam - pv) / fmax(1.0, pv));
        }
        if st.accepted {
            let at = p.dp(run.vmap.v(st.level));
            rep.max_equality_gap = fmax(rep.max_equality_gap, (lam - at).abs() / fmax(1.0, at));
        }
        let g = run.gamma[&st.id];
        let cap = fmin(st.value, lam * st.volume);
        rep.max_gamma_excess = fmax(rep.max_gamma_excess, (g - cap) / fmax(1.0, cap));
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCertificate {
    pub primal: f64,
    pub dual: f64,
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `primal / dual` with the bound `r`. Zero primal gives ratio 1.
pub fn competitive_certificate(run: &EnergyValueRun) -> Result<RatioCertificate, EnergyValueError> {
    let primal = run.breakdown.total_primal;
    let dual = run.dual_value;
    let ratio = if primal <= 1e-12 {
        1.0
    } else if dual <= 0.0 {
        return Err(EnergyValueError::DualNonPositive(dual));
    } else {
        primal / dual
    };
    let holds = primal <= run.r * dual * (1.0 + 1e-6) + 1e-9;
    Ok(RatioCertificate { primal, dual, ratio, bound: run.r, holds })
}

/// Aggregate real speed of a finished run.
pub fn real_speed(run: &EnergyValueRun) -> StepFunction {
    let fs: Vec<StepFunction> = run.accepted.iter().map(|id| run.virtual_profiles[id].clone()).collect();
    pointwise_sum(&fs)
}

/// `v(0)` for the run's power function.
pub fn baseline_v(run: &EnergyValueRun) -> f64 {
    initial_v(&run.power)
}
