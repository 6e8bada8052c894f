//! Weighted flow-time plus energy on one machine with a sleep state.
//!
//! The machine runs the highest-density pending job at speed `W^(1/alpha)`
//! while `alpha/(alpha-1) W^((alpha-1)/alpha)` exceeds `P(s^c)/s^c`, and at
//! the critical speed otherwise. Light work found while idle or asleep is
//! planned as one block at `s^c`, started when the block's energy equals its
//! weighted flow-time.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{Assignment, CostBreakdown, Instance, MachineState, ProblemKind, Schedule, StateInterval};
use crate::num::{fmax, fmin, powf};
use crate::power::PowerFunction;
use crate::step::StepFunction;

#[derive(Debug, Clone, PartialEq)]
pub enum FlowError {
    WrongProblem(ProblemKind),
    /// The trigger `alpha/(alpha-1) W^((alpha-1)/alpha)` needs `alpha > 1`.
    AlphaOne,
    /// Event loop failed to make progress.
    Stalled { t: f64 },
}

impl fmt::Display for FlowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowError::WrongProblem(k) => write!(f, "expected flow_plus_energy, got {k}"),
            FlowError::AlphaOne => f.write_str("flow_plus_energy needs alpha > 1"),
            FlowError::Stalled { t } => write!(f, "simulation stalled at t = {t}"),
        }
    }
}

impl core::error::Error for FlowError {}

/// A block plan that was actually started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanRecord {
    /// Time the plan was (last) computed.
    pub planned_at: f64,
    pub start: f64,
    pub energy: f64,
    /// Weighted flow-time of the planned jobs if the plan runs undisturbed.
    pub flow: f64,
    /// Start was pulled forward to the planning time because flow already
    /// exceeded energy there.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub schedule: Schedule,
    pub speed: StepFunction,
    pub lambda: BTreeMap<u64, f64>,
    pub breakdown: CostBreakdown,
    /// Dynamic energy.
    pub e1: f64,
    /// Static energy.
    pub e2: f64,
    /// Transition cost.
    pub e3: f64,
    /// Weighted flow-time.
    pub flow: f64,
    pub w_profile: StepFunction,
    pub plans: Vec<PlanRecord>,
    pub wakes: usize,
    pub critical_speed: f64,
    /// `P(s^c)/s^c`, or 0 when `g = 0`.
    pub theta: f64,
    /// `g = 0`: the critical speed degenerates and the third term of
    /// `lambda` is dropped.
    pub outside_model: bool,
}

struct Pending {
    id: u64,
    release: f64,
    weight: f64,
    volume: f64,
    rem: f64,
}

impl Pending {
    fn density(&self) -> f64 {
        self.weight / self.volume
    }
}

/// Highest density first, ties by id.
fn hdf(a: &Pending, b: &Pending) -> core::cmp::Ordering {
    b.density().partial_cmp(&a.density()).unwrap().then(a.id.cmp(&b.id))
}

/// `alpha/(alpha-1) W^((alpha-1)/alpha)`.
pub fn trigger(alpha: f64, w: f64) -> f64 {
    alpha / (alpha - 1.0) * powf(w, (alpha - 1.0) / alpha)
}

fn theta_of(p: &PowerFunction) -> f64 {
    if p.g() == 0.0 {
        0.0
    } else {
        p.critical_ratio().unwrap_or(f64::INFINITY)
    }
}

/// Start time at which a block at `sc` over `pending` (HDF order) has
/// energy equal to its weighted flow-time, clamped to `now`.
fn plan(pending: &mut [Pending], p: &PowerFunction, sc: f64, now: f64) -> PlanRecord {
    pending.sort_by(hdf);
    let total_w: f64 = pending.iter().map(|j| j.weight).sum();
    let mut cum = 0.0;
    let mut fixed = 0.0;
    for j in pending.iter() {
        cum += j.rem / sc;
        fixed += j.weight * (cum - j.release);
    }
    let energy = p.p(sc) * cum;
    let flow_at = |t: f64| total_w * t + fixed;
    let (start, clamped) = if total_w <= 0.0 {
        (now, false)
    } else {
        let t = (energy - fixed) / total_w;
        if t < now {
            (now, true)
        } else {
            (t, false)
        }
    };
    PlanRecord { planned_at: now, start, energy, flow: flow_at(start), clamped }
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

/// Evaluates the `lambda` display for job `j` given the pending jobs at its
/// arrival as `(id, weight, volume, remaining)`.
pub fn lambda_of_job(j: u64, pending: &[(u64, f64, f64, f64)], p: &PowerFunction) -> f64 {
    let alpha = p.alpha();
    let mut js: Vec<(u64, f64, f64, f64)> = pending.to_vec();
    js.sort_by(|a, b| {
        let (da, db) = (a.1 / a.2, b.1 / b.2);
        db.partial_cmp(&da).unwrap().then(a.0.cmp(&b.0))
    });
    let idx = js.iter().position(|x| x.0 == j).expect("job must be pending at its arrival");
    let mut suffix = alloc::vec![0.0; js.len() + 1];
    for a in (0..js.len()).rev() {
        suffix[a] = suffix[a + 1] + js[a].1;
    }
    let (_, wj, pj, qj) = js[idx];
    let root = |w: f64| powf(w, 1.0 / alpha);
    let mut first = 0.0;
    if wj > 0.0 {
        for a in 0..=idx {
            assert!(suffix[a] > 0.0, "pending weight vanished");
            first += js[a].3 / root(suffix[a]);
        }
        first *= wj;
    }
    let second = if suffix[idx + 1] > 0.0 { suffix[idx + 1] * qj / root(suffix[idx]) } else { 0.0 };
    let third = theta_of(p) * qj;
    (first + second + third) / pj
}

pub fn run(inst: &Instance) -> Result<FlowRun, FlowError> {
    if inst.kind != ProblemKind::FlowPlusEnergy {
        return Err(FlowError::WrongProblem(inst.kind));
    }
    let p = inst.power;
    let alpha = p.alpha();
    if alpha <= 1.0 {
        return Err(FlowError::AlphaOne);
    }
    let g = p.g();
    let sc = p.critical_speed().unwrap_or(0.0);
    let theta = theta_of(&p);
    let budget = if g > 0.0 { inst.wakeup_cost / g } else { f64::INFINITY };
    let order = inst.arrival_order();

    let mut pending: Vec<Pending> = Vec::new();
    let mut pieces: BTreeMap<u64, Vec<(f64, f64, f64)>> = BTreeMap::new();
    let mut completion = BTreeMap::new();
    let mut timeline = Vec::new();
    let mut lambda = BTreeMap::new();
    let mut plans = Vec::new();
    let (mut e1, mut active, mut wakes) = (0.0, 0.0, 0usize);
    let mut next = 0;
    let mut t = 0.0;
    let mut state = MachineState::Sleep;
    let mut idle_acc = 0.0;
    let mut guard = 0usize;

    loop {
        guard += 1;
        if guard > 100_000 + 100 * inst.jobs.len() * inst.jobs.len() {
            return Err(FlowError::Stalled { t });
        }
        while next < order.len() && inst.jobs[order[next]].release <= t {
            let j = &inst.jobs[order[next]];
            pending.push(Pending { id: j.id, release: j.release, weight: j.weight, volume: j.volume(), rem: j.volume() });
            let snap: Vec<(u64, f64, f64, f64)> = pending.iter().map(|x| (x.id, x.weight, x.volume, x.rem)).collect();
            lambda.insert(j.id, lambda_of_job(j.id, &snap, &p));
            next += 1;
        }
        let next_rel = order.get(next).map_or(f64::INFINITY, |&k| inst.jobs[k].release);
        let w: f64 = pending.iter().map(|x| x.weight).sum();
        let heavy = w > 0.0 && trigger(alpha, w) > theta;
        match state {
            MachineState::Working => {
                if pending.is_empty() {
                    state = MachineState::Idle;
                    continue;
                }
                let z = if heavy { powf(w, 1.0 / alpha) } else { sc };
                pending.sort_by(hdf);
                let finish = t + pending[0].rem / z;
                let end = fmin(finish, next_rel);
                pieces.entry(pending[0].id).or_default().push((t, end, z));
                e1 += p.dyn_p(z) * (end - t);
                active += end - t;
                push(&mut timeline, t, end, MachineState::Working);
                pending[0].rem -= z * (end - t);
                if end >= finish || pending[0].rem <= 1e-12 * pending[0].volume {
                    let done = pending.remove(0);
                    completion.insert(done.id, end);
                }
                t = end;
            }
            MachineState::Idle | MachineState::Sleep => {
                let asleep = state == MachineState::Sleep;
                let mut wake_at = f64::INFINITY;
                let mut planned = None;
                if heavy {
                    wake_at = t;
                } else if !pending.is_empty() {
                    let pr = plan(&mut pending, &p, sc, t);
                    wake_at = pr.start;
                    planned = Some(pr);
                }
                let sleep_at = if asleep { f64::INFINITY } else { t + fmax(0.0, budget - idle_acc) };
                let stop = fmin(fmin(wake_at, sleep_at), next_rel);
                if stop.is_infinite() {
                    break;
                }
                if asleep {
                    push(&mut timeline, t, stop, MachineState::Sleep);
                } else {
                    push(&mut timeline, t, stop, MachineState::Idle);
                    active += stop - t;
                    idle_acc += stop - t;
                }
                t = stop;
                if wake_at <= stop {
                    if asleep {
                        wakes += 1;
                        idle_acc = 0.0;
                    }
                    if let Some(pr) = planned {
                        plans.push(pr);
                    }
                    state = MachineState::Working;
                } else if !asleep && sleep_at <= stop && next_rel > stop {
                    state = MachineState::Sleep;
                }
            }
        }
    }

    let per_job_speed: BTreeMap<u64, StepFunction> = inst
        .jobs
        .iter()
        .map(|j| (j.id, pieces.get(&j.id).map_or_else(StepFunction::zero, |ps| StepFunction::from_pieces(ps))))
        .collect();
    let speed = crate::step::pointwise_sum(&per_job_speed.values().cloned().collect::<Vec<_>>());
    let w_parts: Vec<StepFunction> =
        inst.jobs.iter().map(|j| StepFunction::constant(j.release, completion[&j.id], j.weight)).collect();
    let w_profile = crate::step::pointwise_sum(&w_parts);
    let flow: f64 = inst.jobs.iter().map(|j| j.weight * (completion[&j.id] - j.release)).sum();
    let e2 = g * active;
    let e3 = inst.wakeup_cost * wakes as f64;
    let breakdown = CostBreakdown {
        dynamic_energy: e1,
        static_energy: e2,
        wakeup_energy: e3,
        weighted_flowtime: flow,
        total_primal: e1 + e2 + e3 + flow,
        ..CostBreakdown::default()
    };
    let schedule = Schedule {
        per_job_speed,
        assignment: inst.jobs.iter().map(|j| (j.id, Assignment::Machine(0))).collect(),
        state_timeline: alloc::vec![timeline],
        completion_times: completion,
    };
    Ok(FlowRun {
        schedule,
        speed,
        lambda,
        breakdown,
        e1,
        e2,
        e3,
        flow,
        w_profile,
        plans,
        wakes,
        critical_speed: sc,
        theta,
        outside_model: g == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma8Report {
    pub sum_lambda_p: f64,
    /// `2 E1 + 3 E2 - F`.
    pub flow_margin: f64,
    /// `sum lambda p - E1`.
    pub energy_margin: f64,
    /// `sum lambda p - (7/8 E1 + F/16 - 3/16 E2)`.
    pub combined_margin: f64,
    pub holds: bool,
}

pub fn check_lemma8(inst: &Instance, run: &FlowRun) -> Lemma8Report {
    let slp: f64 = inst.jobs.iter().map(|j| run.lambda[&j.id] * j.volume()).sum();
    let flow_margin = 2.0 * run.e1 + 3.0 * run.e2 - run.flow;
    let energy_margin = slp - run.e1;
    let combined_margin = slp - (0.875 * run.e1 + run.flow / 16.0 - 0.1875 * run.e2);
    let tol = |scale: f64| 1e-6 * fmax(1.0, scale);
    let holds = flow_margin >= -tol(run.flow)
        && energy_margin >= -tol(run.e1)
        && combined_margin >= -tol(slp);
    Lemma8Report { sum_lambda_p: slp, flow_margin, energy_margin, combined_margin, holds }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma10Report {
    /// Smallest `rhs - lhs` over all samples.
    pub worst_margin: f64,
    pub worst_at: Option<(u64, f64)>,
    /// Same, restricted to samples with `t < C_j`.
    pub worst_active_margin: f64,
    pub worst_active_at: Option<(u64, f64)>,
    pub samples: usize,
}

impl Lemma10Report {
    /// Every sample `t >= r_j`.
    pub fn holds(&self, tol: f64) -> bool {
        self.worst_margin >= -tol
    }

    /// Samples while the job is pending, the only ones the ratio bound uses.
    pub fn holds_active(&self, tol: f64) -> bool {
        self.worst_active_margin >= -tol
    }
}

/// `lambda_j - delta_j (t - r_j) <= max(trigger(W(t)) + theta, 2 theta)`
/// at `grid` uniform times in `[r_j, last completion]` plus every
/// breakpoint of `W` after `r_j`.
pub fn check_lemma10(inst: &Instance, run: &FlowRun, grid: usize) -> Lemma10Report {
    let alpha = inst.power.alpha();
    let end = run.schedule.completion_times.values().copied().fold(0.0, fmax);
    let mut rep = Lemma10Report {
        worst_margin: f64::INFINITY,
        worst_at: None,
        worst_active_margin: f64::INFINITY,
        worst_active_at: None,
        samples: 0,
    };
    for j in &inst.jobs {
        let lam = run.lambda[&j.id];
        let done = run.schedule.completion_times.get(&j.id).copied().unwrap_or(f64::INFINITY);
        let dens = j.density();
        let r = j.release;
        let mut ts: Vec<f64> = (0..=grid).map(|k| r + (fmax(end, r) - r) * k as f64 / grid as f64).collect();
        ts.extend(run.w_profile.breakpoints().iter().copied().filter(|&b| b >= r));
        for t in ts {
            let lhs = lam - dens * (t - r);
            let rhs = fmax(trigger(alpha, run.w_profile.eval(t)) + run.theta, 2.0 * run.theta);
            let m = (rhs - lhs) / fmax(1.0, rhs);
            if m < rep.worst_margin {
                rep.worst_margin = m;
                rep.worst_at = Some((j.id, t));
            }
            if t < done && m < rep.worst_active_margin {
                rep.worst_active_margin = m;
                rep.worst_active_at = Some((j.id, t));
            }
            rep.samples += 1;
        }
    }
    if rep.samples == 0 {
        rep.worst_margin = 0.0;
    }
    if rep.worst_active_at.is_none() {
        rep.worst_active_margin = 0.0;
    }
    rep
}

/// Largest `|energy - flow| / max(1, energy)` over started plans that were
/// not clamped.
pub fn plan_balance(run: &FlowRun) -> f64 {
    run.plans
        .iter()
        .filter(|p| !p.clamped)
        .map(|p| (p.energy - p.flow).abs() / fmax(1.0, p.energy))
        .fold(0.0, fmax)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCertificate {
    pub primal: f64,
    pub opt: f64,
    pub ratio: f64,
    pub claimed: f64,
    pub holds: bool,
}

/// `max(64, 32 alpha / ln alpha)`.
pub fn claimed_ratio(alpha: f64) -> f64 {
    fmax(64.0, 32.0 * alpha / libm::log(alpha))
}

pub fn competitive_certificate(inst: &Instance, run: &FlowRun, opt: f64) -> FlowCertificate {
    let claimed = claimed_ratio(inst.power.alpha());
    let primal = run.breakdown.total_primal;
    let ratio = if primal <= 1e-12 { 1.0 } else { primal / opt };
    FlowCertificate { primal, opt, ratio, claimed, holds: primal <= claimed * opt + 1e-6 }
}
