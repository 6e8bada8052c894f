//! Speed scaling with a sleep state.
//!
//! [`run_oa`] is Optimal Available: on every arrival the remaining work is
//! re-planned by water-filling in deadline order. [`run_soa`] adds the
//! critical-speed floor, delays low-density work and puts the machine to
//! sleep after `A/g` idle time.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::edf::{edf, EdfJob};
use crate::model::{Assignment, CostBreakdown, Instance, MachineState, ProblemKind, Schedule, StateInterval};
use crate::num::{fmax, fmin, powf};
use crate::power::PowerFunction;
use crate::step::StepFunction;
use crate::waterfill::{fill, FillError, LinearPrice};

#[derive(Debug, Clone, PartialEq)]
pub enum SleepError {
    WrongProblem(ProblemKind),
    Fill(FillError),
    /// Static power without a critical speed (`alpha = 1`, `g > 0`).
    NoCriticalSpeed,
    DeadlineMissed { id: u64, completion: f64, deadline: f64 },
    StaticPowerInOa,
}

impl fmt::Display for SleepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SleepError::WrongProblem(k) => write!(f, "expected min_energy_sleep, got {k}"),
            SleepError::Fill(e) => write!(f, "water-filling: {e}"),
            SleepError::NoCriticalSpeed => f.write_str("power function has no critical speed"),
            SleepError::DeadlineMissed { id, completion, deadline } => {
                write!(f, "job {id} completes at {completion} after its deadline {deadline}")
            }
            SleepError::StaticPowerInOa => f.write_str("optimal available needs g = 0 and A = 0"),
        }
    }
}

impl core::error::Error for SleepError {}

impl From<FillError> for SleepError {
    fn from(e: FillError) -> Self {
        SleepError::Fill(e)
    }
}

fn check(inst: &Instance) -> Result<(), SleepError> {
    if inst.kind != ProblemKind::MinEnergySleep {
        return Err(SleepError::WrongProblem(inst.kind));
    }
    Ok(())
}

fn edf_job(inst: &Instance, k: usize) -> EdfJob {
    let j = &inst.jobs[k];
    EdfJob { id: j.id, release: j.release, deadline: j.deadline.unwrap(), volume: j.volume() }
}

fn by_deadline(a: &EdfJob, b: &EdfJob) -> core::cmp::Ordering {
    a.deadline.partial_cmp(&b.deadline).unwrap().then(a.id.cmp(&b.id))
}

/// Optimal Available. Requires `g = 0` and `A = 0`.
pub fn run_oa(inst: &Instance) -> Result<Schedule, SleepError> {
    check(inst)?;
    if inst.power.g() != 0.0 || inst.wakeup_cost != 0.0 {
        return Err(SleepError::StaticPowerInOa);
    }
    let pm = LinearPrice { power: inst.power, c: 1.0 };
    let order = inst.arrival_order();
    let mut releases: Vec<f64> = order.iter().map(|&k| inst.jobs[k].release).collect();
    releases.dedup();
    let mut pending: Vec<EdfJob> = Vec::new();
    let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
    let mut next = 0;
    for (e, &tau) in releases.iter().enumerate() {
        while next < order.len() && inst.jobs[order[next]].release <= tau {
            let mut j = edf_job(inst, order[next]);
            j.release = tau;
            pending.push(j);
            next += 1;
        }
        pending.sort_by(by_deadline);
        let mut plan = StepFunction::zero();
        for j in &pending {
            plan = plan.add(&fill(&plan, tau, j.deadline, j.volume, None, &pm)?.increment);
        }
        let until = releases.get(e + 1).copied().unwrap_or(f64::INFINITY);
        let seg = plan.restrict(tau, until);
        pieces.extend(seg.pieces());
        let done = edf(&seg, &pending);
        for j in &mut pending {
            j.volume -= done.per_job[&j.id].total();
            j.release = until;
        }
        pending.retain(|j| j.volume > 1e-12 * fmax(1.0, j.volume));
    }
    let speed = StepFunction::from_pieces(&pieces);
    let jobs: Vec<EdfJob> = (0..inst.jobs.len()).map(|k| edf_job(inst, k)).collect();
    let ex = edf(&speed, &jobs);
    let mut sched = Schedule {
        per_job_speed: ex.per_job,
        assignment: inst.jobs.iter().map(|j| (j.id, Assignment::Machine(0))).collect(),
        state_timeline: alloc::vec![Vec::new()],
        completion_times: ex.completion,
    };
    for (a, b, _) in speed.pieces() {
        sched.push_state(0, a, b, MachineState::Working);
    }
    Ok(sched)
}

/// `max_{t' > t} V(t, t') / (t' - t)` over `(deadline, remaining volume)`
/// pairs, with the latest maximising `t'`.
pub fn oa_closed_form(pending: &[(f64, f64)], t: f64) -> (f64, f64) {
    let mut ds: Vec<(f64, f64)> = pending.iter().copied().filter(|x| x.1 > 0.0).collect();
    ds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut best = (0.0, t);
    let mut v = 0.0;
    for (k, &(d, q)) in ds.iter().enumerate() {
        v += q;
        if k + 1 < ds.len() && ds[k + 1].0 == d {
            continue;
        }
        if d <= t {
            return (f64::INFINITY, d);
        }
        let s = v / (d - t);
        if s >= best.0 * (1.0 - 1e-12) {
            best = (fmax(s, best.0), d);
        }
    }
    best
}

pub fn oa_closed_form_speed(pending: &[(f64, f64)], t: f64) -> f64 {
    oa_closed_form(pending, t).0
}

/// Largest gap between `speed` and the closed-form Optimal Available speed
/// computed from the remaining volumes of `sched` itself, over midpoints of
/// every piece of the joint partition.
pub fn oa_gap(inst: &Instance, sched: &Schedule, speed: &StepFunction) -> f64 {
    let mut cuts: Vec<f64> = speed.breakpoints().to_vec();
    for j in &inst.jobs {
        cuts.push(j.release);
        cuts.push(j.deadline.unwrap());
    }
    for f in sched.per_job_speed.values() {
        cuts.extend_from_slice(f.breakpoints());
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut gap: f64 = 0.0;
    for w in cuts.windows(2) {
        // Slivers left by rounding say nothing about the speed.
        if w[1] - w[0] <= 1e-9 * fmax(1.0, w[1].abs()) {
            continue;
        }
        let t = 0.5 * (w[0] + w[1]);
        let pending: Vec<(f64, f64)> = inst
            .jobs
            .iter()
            .filter(|j| j.release <= t)
            .map(|j| {
                let done = sched.per_job_speed[&j.id].integrate(f64::NEG_INFINITY, t).unwrap_or(0.0);
                (j.deadline.unwrap(), fmax(0.0, j.volume() - done))
            })
            .filter(|x| x.1 > 1e-9)
            .collect();
        gap = fmax(gap, (speed.eval(t) - oa_closed_form_speed(&pending, t)).abs());
    }
    gap
}

/// Optimal Available driven only by the closed form: run the critical
/// group at constant speed until it finishes or a job arrives.
pub fn oa_reference(inst: &Instance) -> StepFunction {
    let order = inst.arrival_order();
    let mut rem: Vec<(u64, f64, f64)> = Vec::new();
    let mut next = 0;
    let mut t = order.first().map_or(0.0, |&k| inst.jobs[k].release);
    let mut pieces = Vec::new();
    loop {
        while next < order.len() && inst.jobs[order[next]].release <= t {
            let j = &inst.jobs[order[next]];
            rem.push((j.id, j.deadline.unwrap(), j.volume()));
            next += 1;
        }
        rem.retain(|x| x.2 > 1e-12 * fmax(1.0, x.2));
        let next_rel = order.get(next).map_or(f64::INFINITY, |&k| inst.jobs[k].release);
        if rem.is_empty() {
            if next_rel.is_infinite() {
                break;
            }
            t = next_rel;
            continue;
        }
        let view: Vec<(f64, f64)> = rem.iter().map(|x| (x.1, x.2)).collect();
        let (s, crit) = oa_closed_form(&view, t);
        let end = fmin(crit, next_rel);
        pieces.push((t, end, s));
        // EDF at speed s over [t, end).
        rem.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let mut budget = s * (end - t);
        for x in rem.iter_mut() {
            let take = fmin(budget, x.2);
            x.2 -= take;
            budget -= take;
        }
        if end >= crit {
            for x in rem.iter_mut().filter(|x| x.1 <= crit) {
                x.2 = 0.0;
            }
        }
        t = end;
    }
    StepFunction::from_pieces(&pieces)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualCase {
    /// The machine runs throughout the job's window.
    Busy,
    /// The machine stops somewhere in the window.
    Gap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SleepRun {
    pub schedule: Schedule,
    pub speed: StepFunction,
    pub lambda: BTreeMap<u64, f64>,
    pub cases: BTreeMap<u64, DualCase>,
    pub beta: f64,
    pub critical_speed: f64,
    pub breakdown: CostBreakdown,
    /// Dynamic energy.
    pub e1: f64,
    /// Static plus wake-up energy.
    pub e2: f64,
    pub wakes: usize,
    pub dual_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Sim {
    pieces: BTreeMap<u64, Vec<(f64, f64, f64)>>,
    timeline: Vec<StateInterval>,
    completion: BTreeMap<u64, f64>,
    e_dyn: f64,
    work_time: f64,
    idle_time: f64,
    wakes: usize,
}

struct Pending {
    id: u64,
    deadline: f64,
    rem: f64,
}

fn push(tl: &mut Vec<StateInterval>, from: f64, to: f64, state: MachineState) {
    if !(to > from) {
        return;
    }
    if let Some(last) = tl.last_mut() {
        if last.state == state && last.to == from {
            last.to = to;
            return;
        }
    }
    tl.push(StateInterval { from, to, state });
}

fn plan_speed(pending: &[Pending], t: f64) -> f64 {
    let v: Vec<(f64, f64)> = pending.iter().map(|p| (p.deadline, p.rem)).collect();
    oa_closed_form_speed(&v, t)
}

/// Latest time from which running everything pending at `sc` in deadline
/// order still meets every deadline.
fn latest_start(pending: &[Pending], sc: f64) -> f64 {
    let mut ds: Vec<(f64, f64)> = pending.iter().map(|p| (p.deadline, p.rem)).collect();
    ds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut v = 0.0;
    let mut best = f64::INFINITY;
    for (d, q) in ds {
        v += q;
        best = fmin(best, d - v / sc);
    }
    best
}

fn simulate(inst: &Instance, subset: &[usize], sc: f64) -> Result<Sim, SleepError> {
    let p = inst.power;
    let g = p.g();
    let budget = if g > 0.0 { inst.wakeup_cost / g } else { f64::INFINITY };
    let floor = sc * (1.0 - 1e-9);
    let mut order: Vec<usize> = subset.to_vec();
    order.sort_by(|&a, &b| {
        let (x, y) = (&inst.jobs[a], &inst.jobs[b]);
        x.release.partial_cmp(&y.release).unwrap().then(x.id.cmp(&y.id))
    });
    let mut sim = Sim::default();
    let mut pending: Vec<Pending> = Vec::new();
    let mut next = 0;
    let mut t = 0.0;
    let mut state = MachineState::Sleep;
    let mut idle_acc = 0.0;
    loop {
        while next < order.len() && inst.jobs[order[next]].release <= t {
            let j = &inst.jobs[order[next]];
            pending.push(Pending { id: j.id, deadline: j.deadline.unwrap(), rem: j.volume() });
            next += 1;
        }
        let next_rel = order.get(next).map_or(f64::INFINITY, |&k| inst.jobs[k].release);
        match state {
            MachineState::Working => {
                if pending.is_empty() {
                    state = MachineState::Idle;
                    continue;
                }
                let z = fmax(plan_speed(&pending, t), sc);
                let k = (0..pending.len())
                    .min_by(|&a, &b| {
                        let (x, y) = (&pending[a], &pending[b]);
                        x.deadline.partial_cmp(&y.deadline).unwrap().then(x.id.cmp(&y.id))
                    })
                    .unwrap();
                let finish = t + pending[k].rem / z;
                let end = fmin(finish, next_rel);
                sim.pieces.entry(pending[k].id).or_default().push((t, end, z));
                sim.e_dyn += p.dyn_p(z) * (end - t);
                sim.work_time += end - t;
                push(&mut sim.timeline, t, end, MachineState::Working);
                pending[k].rem -= z * (end - t);
                if end >= finish || pending[k].rem <= 1e-12 * fmax(1.0, pending[k].rem) {
                    let job = pending.swap_remove(k);
                    let slack = 1e-9 * fmax(1.0, job.deadline);
                    if end > job.deadline + slack {
                        return Err(SleepError::DeadlineMissed { id: job.id, completion: end, deadline: job.deadline });
                    }
                    sim.completion.insert(job.id, end);
                }
                t = end;
            }
            MachineState::Idle => {
                let mut wake_at = f64::INFINITY;
                if !pending.is_empty() {
                    if plan_speed(&pending, t) >= floor {
                        state = MachineState::Working;
                        continue;
                    }
                    wake_at = fmax(t, latest_start(&pending, sc));
                }
                let sleep_at = t + fmax(0.0, budget - idle_acc);
                let stop = fmin(fmin(wake_at, sleep_at), next_rel);
                if stop.is_infinite() {
                    break;
                }
                push(&mut sim.timeline, t, stop, MachineState::Idle);
                sim.idle_time += stop - t;
                idle_acc += stop - t;
                t = stop;
                if wake_at <= stop {
                    state = MachineState::Working;
                } else if sleep_at <= stop && next_rel > stop {
                    state = MachineState::Sleep;
                }
            }
            MachineState::Sleep => {
                let mut wake_at = f64::INFINITY;
                if !pending.is_empty() {
                    wake_at = if plan_speed(&pending, t) >= floor { t } else { fmax(t, latest_start(&pending, sc)) };
                }
                let stop = fmin(wake_at, next_rel);
                if stop.is_infinite() {
                    break;
                }
                push(&mut sim.timeline, t, stop, MachineState::Sleep);
                t = stop;
                if wake_at <= stop {
                    sim.wakes += 1;
                    idle_acc = 0.0;
                    state = MachineState::Working;
                }
            }
        }
    }
    Ok(sim)
}

fn critical(p: &PowerFunction) -> Result<f64, SleepError> {
    p.critical_speed().map_err(|_| SleepError::NoCriticalSpeed)
}

/// `P(s^c)/s^c`, taken as its limit 0 when `g = 0`.
pub fn critical_ratio(p: &PowerFunction) -> f64 {
    if p.g() == 0.0 {
        return 0.0;
    }
    p.critical_ratio().unwrap_or(f64::INFINITY)
}

pub fn run_soa(inst: &Instance) -> Result<SleepRun, SleepError> {
    check(inst)?;
    let p = inst.power;
    let sc = critical(&p)?;
    let all: Vec<usize> = (0..inst.jobs.len()).collect();
    let sim = simulate(inst, &all, sc)?;

    let per_job_speed: BTreeMap<u64, StepFunction> = inst
        .jobs
        .iter()
        .map(|j| (j.id, sim.pieces.get(&j.id).map_or_else(StepFunction::zero, |ps| StepFunction::from_pieces(ps))))
        .collect();
    let speed = crate::step::pointwise_sum(&per_job_speed.values().cloned().collect::<Vec<_>>());
    let schedule = Schedule {
        per_job_speed,
        assignment: inst.jobs.iter().map(|j| (j.id, Assignment::Machine(0))).collect(),
        state_timeline: alloc::vec![sim.timeline.clone()],
        completion_times: sim.completion.clone(),
    };

    let g = p.g();
    let static_energy = g * (sim.work_time + sim.idle_time);
    let wakeup_energy = inst.wakeup_cost * sim.wakes as f64;
    let breakdown = CostBreakdown {
        dynamic_energy: sim.e_dyn,
        static_energy,
        wakeup_energy,
        total_primal: sim.e_dyn + static_energy + wakeup_energy,
        ..CostBreakdown::default()
    };

    let alpha = p.alpha();
    let beta = powf(alpha, 1.0 - alpha);
    let mut lambda = BTreeMap::new();
    let mut cases = BTreeMap::new();
    let order = inst.arrival_order();
    let mut prev = Sim::default();
    for (pos, &k) in order.iter().enumerate() {
        let j = &inst.jobs[k];
        let with = simulate(inst, &order[..=pos], sc)?;
        // Trim the rounding sliver the simulation may leave before a deadline.
        let d = j.deadline.unwrap();
        let end = fmax(j.release, d - 1e-9 * fmax(1.0, d.abs()));
        let case = if speed.min_on(j.release, end) > 0.0 { DualCase::Busy } else { DualCase::Gap };
        let lam = match case {
            DualCase::Busy => beta * (with.e_dyn - prev.e_dyn) / j.volume(),
            DualCase::Gap => (with.e_dyn + g * with.work_time - prev.e_dyn - g * prev.work_time) / j.volume(),
        };
        lambda.insert(j.id, lam);
        cases.insert(j.id, case);
        prev = with;
    }

    let e1 = sim.e_dyn;
    let e2 = static_energy + wakeup_energy;
    Ok(SleepRun {
        schedule,
        speed,
        lambda,
        cases,
        beta,
        critical_speed: sc,
        breakdown,
        e1,
        e2,
        wakes: sim.wakes,
        dual_lower_bound: e1 / p.alpha_pow_alpha() + e2 / 4.0,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lemma4Report {
    /// Worst `(lambda_j - beta P'(s*(t))) / max(1, beta P')` over busy jobs.
    pub max_busy_excess: f64,
    /// Worst `|lambda_j - P(s^c)/s^c| / max(1, P(s^c)/s^c)` over gap jobs.
    pub max_gap_error: f64,
    pub violations: Vec<u64>,
}

impl Lemma4Report {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_lemma4_duals(inst: &Instance, run: &SleepRun, grid: usize, tol: f64) -> Lemma4Report {
    let p = inst.power;
    let theta = critical_ratio(&p);
    let mut rep = Lemma4Report::default();
    for j in &inst.jobs {
        let lam = run.lambda[&j.id];
        let (a, b) = (j.release, j.deadline.unwrap());
        let bad = match run.cases[&j.id] {
            DualCase::Busy => {
                let mut worst: f64 = f64::NEG_INFINITY;
                for k in 0..=grid {
                    let t = fmin(a + (b - a) * k as f64 / grid as f64, b - 1e-12 * fmax(1.0, b));
                    let rhs = run.beta * p.dp(run.speed.eval(t));
                    worst = fmax(worst, (lam - rhs) / fmax(1.0, rhs));
                }
                rep.max_busy_excess = fmax(rep.max_busy_excess, worst);
                worst > tol
            }
            DualCase::Gap => {
                let err = (lam - theta).abs() / fmax(1.0, theta);
                rep.max_gap_error = fmax(rep.max_gap_error, err);
                err > tol
            }
        };
        if bad {
            rep.violations.push(j.id);
        }
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SleepCertificate {
    pub primal: f64,
    pub bound: f64,
    pub ratio: f64,
    pub claimed: f64,
    pub holds: bool,
}

/// Checks `primal <= max(4, alpha^alpha) * opt_lower_bound`.
pub fn competitive_certificate(inst: &Instance, run: &SleepRun, opt_lower_bound: f64) -> SleepCertificate {
    let claimed = fmax(4.0, inst.power.alpha_pow_alpha());
    let primal = run.breakdown.total_primal;
    let ratio = if primal <= 1e-12 { 1.0 } else { primal / opt_lower_bound };
    SleepCertificate { primal, bound: opt_lower_bound, ratio, claimed, holds: primal <= claimed * opt_lower_bound + 1e-6 }
}

/// Checks on the state timeline: idle stretches between wake-ups never exceed
/// `A/g`, and each wake-up follows a sleep.
pub fn idle_budget_excess(inst: &Instance, run: &SleepRun) -> f64 {
    let g = inst.power.g();
    if g == 0.0 {
        return 0.0;
    }
    let budget = inst.wakeup_cost / g;
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for iv in run.schedule.state_timeline.first().map(|v| v.as_slice()).unwrap_or(&[]) {
        match iv.state {
            MachineState::Sleep => acc = 0.0,
            MachineState::Idle => {
                acc += iv.to - iv.from;
                worst = fmax(worst, acc - budget);
            }
            MachineState::Working => {}
        }
    }
    worst
}
