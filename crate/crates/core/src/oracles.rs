//! Offline baselines for small instances.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::edf::{edf, EdfJob};
use crate::model::{Assignment, Instance, MachineState, ProblemKind, Schedule};
use crate::num::{fmax, fmin, powf};
use crate::power::PowerFunction;
use crate::step::StepFunction;

pub const MAX_ENERGY_VALUE_JOBS: usize = 12;
pub const MAX_VALUE_ENERGY_JOBS: usize = 8;
pub const MAX_VALUE_ENERGY_MACHINES: usize = 2;
pub const MAX_FLOW_JOBS: usize = 4;
pub const MAX_FLOW_LEVELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Exact,
    LowerBound,
    UpperBound,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Exact => "exact",
            OracleKind::LowerBound => "lower_bound",
            OracleKind::UpperBound => "upper_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub kind: OracleKind,
    pub method: String,
    pub witness: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    TooLarge { what: &'static str, got: usize, max: usize },
    WrongProblem(ProblemKind),
    MissingDeadline(u64),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooLarge { what, got, max } => write!(f, "oracle limited to {max} {what}, got {got}"),
            OracleError::WrongProblem(k) => write!(f, "oracle does not apply to {k}"),
            OracleError::MissingDeadline(id) => write!(f, "job {id} has no deadline"),
        }
    }
}

impl core::error::Error for OracleError {}

/// Minimum-energy deadline schedule for convex power without static cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Yds {
    pub speed: StepFunction,
    /// `integral s^alpha`.
    pub energy: f64,
    /// Critical intervals in extraction order: `(density, original pieces)`.
    pub rounds: Vec<(f64, Vec<(f64, f64)>)>,
}

#[derive(Clone, Copy)]
struct CJob {
    r: f64,
    d: f64,
    p: f64,
}

fn snap(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * fmax(1.0, fmax(x.abs(), y.abs()))
}

/// Original time of compressed point `x`. `after` skips intervals that start
/// exactly at the image.
fn uncompress(assigned: &[(f64, f64)], x: f64, after: bool) -> f64 {
    let mut o = x;
    for &(s, e) in assigned {
        if s < o || (after && snap(s, o)) {
            o += e - s;
        } else {
            break;
        }
    }
    o
}

fn free_parts(assigned: &[(f64, f64)], a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = a;
    for &(s, e) in assigned {
        if e <= t || snap(e, t) {
            continue;
        }
        if s >= b || snap(s, b) {
            break;
        }
        if s > t && !snap(s, t) {
            out.push((t, s));
        }
        t = fmax(t, e);
    }
    if b > t && !snap(b, t) {
        out.push((t, b));
    }
    out
}

/// Repeatedly extracts the interval of maximum intensity
/// `sum_{[r_j, d_j] in [a, b]} p_j / (b - a)` and compresses it away.
pub fn yds(jobs: &[EdfJob], alpha: f64) -> Yds {
    let mut active: Vec<CJob> = jobs.iter().map(|j| CJob { r: j.release, d: j.deadline, p: j.volume }).collect();
    let mut assigned: Vec<(f64, f64)> = Vec::new();
    let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
    let mut rounds = Vec::new();
    while !active.is_empty() {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let mut starts: Vec<f64> = active.iter().map(|j| j.r).collect();
        starts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        starts.dedup();
        for &a in &starts {
            let mut inside: Vec<&CJob> = active.iter().filter(|j| j.r >= a).collect();
            inside.sort_by(|x, y| x.d.partial_cmp(&y.d).unwrap());
            let mut cum = 0.0;
            for (k, j) in inside.iter().enumerate() {
                cum += j.p;
                if k + 1 < inside.len() && inside[k + 1].d == j.d {
                    continue;
                }
                let dens = cum / (j.d - a);
                if dens > best.0 * (1.0 + 1e-12) {
                    best = (dens, a, j.d);
                }
            }
        }
        let (dens, a, b) = best;
        let oa = uncompress(&assigned, a, true);
        let ob = uncompress(&assigned, b, false);
        let parts = free_parts(&assigned, oa, ob);
        for &(x, y) in &parts {
            pieces.push((x, y, dens));
            assigned.push((x, y));
        }
        assigned.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        rounds.push((dens, parts));
        let len = b - a;
        let squash = |x: f64| {
            if x <= a {
                x
            } else if x <= b {
                a
            } else {
                x - len
            }
        };
        active.retain(|j| !(j.r >= a && j.d <= b));
        for j in &mut active {
            j.r = squash(j.r);
            j.d = squash(j.d);
        }
    }
    pieces.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let speed = StepFunction::from_pieces(&pieces);
    let energy = speed.integrate_map(|s| powf(s, alpha));
    Yds { speed, energy, rounds }
}

fn edf_jobs(inst: &Instance, machine: usize, ids: &[usize]) -> Result<Vec<EdfJob>, OracleError> {
    ids.iter()
        .map(|&k| {
            let j = &inst.jobs[k];
            let d = j.deadline.ok_or(OracleError::MissingDeadline(j.id))?;
            Ok(EdfJob { id: j.id, release: j.release, deadline: d, volume: j.volumes[machine] })
        })
        .collect()
}

fn subset(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|k| mask & (1 << k) != 0).collect()
}

/// YDS energy of every subset of jobs on one machine.
fn subset_energies(inst: &Instance, machine: usize) -> Result<Vec<f64>, OracleError> {
    let n = inst.jobs.len();
    (0..1u32 << n)
        .map(|mask| {
            let js = edf_jobs(inst, machine, &subset(mask, n))?;
            Ok(yds(&js, inst.power.alpha()).energy)
        })
        .collect()
}

fn witness(inst: &Instance, choice: &[Option<usize>]) -> Result<Schedule, OracleError> {
    let mut sched = Schedule::default();
    for i in 0..inst.machines {
        let ids: Vec<usize> = (0..inst.jobs.len()).filter(|&k| choice[k] == Some(i)).collect();
        let js = edf_jobs(inst, i, &ids)?;
        let y = yds(&js, inst.power.alpha());
        let ex = edf(&y.speed, &js);
        sched.per_job_speed.extend(ex.per_job);
        sched.completion_times.extend(ex.completion);
    }
    for (k, j) in inst.jobs.iter().enumerate() {
        sched.assignment.insert(j.id, choice[k].map_or(Assignment::Rejected, Assignment::Machine));
        sched.per_job_speed.entry(j.id).or_insert_with(StepFunction::zero);
    }
    Ok(sched)
}

/// `min_S yds(S) + sum_{j not in S} a_j` over all subsets.
pub fn brute_force_energy_value(inst: &Instance) -> Result<OracleResult, OracleError> {
    if inst.kind != ProblemKind::EnergyPlusLostValue {
        return Err(OracleError::WrongProblem(inst.kind));
    }
    let n = inst.jobs.len();
    if n > MAX_ENERGY_VALUE_JOBS {
        return Err(OracleError::TooLarge { what: "jobs", got: n, max: MAX_ENERGY_VALUE_JOBS });
    }
    let energies = subset_energies(inst, 0)?;
    let mut best = (f64::INFINITY, 0u32);
    for (mask, e) in energies.iter().enumerate() {
        let lost: f64 = (0..n).filter(|k| mask & (1 << k) == 0).map(|k| inst.jobs[k].value).sum();
        if e + lost < best.0 {
            best = (e + lost, mask as u32);
        }
    }
    let choice: Vec<Option<usize>> = (0..n).map(|k| (best.1 & (1 << k) != 0).then_some(0)).collect();
    Ok(OracleResult {
        value: best.0,
        kind: OracleKind::Exact,
        method: "subset enumeration with YDS".into(),
        witness: Some(witness(inst, &choice)?),
    })
}

/// `max` over assignments of jobs to machines or rejection of
/// `sum a_j - sum_i yds_i` at unit speed.
pub fn brute_force_value_energy(inst: &Instance) -> Result<OracleResult, OracleError> {
    if inst.kind != ProblemKind::ValueMinusEnergy {
        return Err(OracleError::WrongProblem(inst.kind));
    }
    let n = inst.jobs.len();
    let m = inst.machines;
    if n > MAX_VALUE_ENERGY_JOBS {
        return Err(OracleError::TooLarge { what: "jobs", got: n, max: MAX_VALUE_ENERGY_JOBS });
    }
    if m > MAX_VALUE_ENERGY_MACHINES {
        return Err(OracleError::TooLarge { what: "machines", got: m, max: MAX_VALUE_ENERGY_MACHINES });
    }
    let energies: Vec<Vec<f64>> = (0..m).map(|i| subset_energies(inst, i)).collect::<Result<_, _>>()?;
    let total = (m + 1).pow(n as u32);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut digits = alloc::vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for d in digits.iter_mut() {
            *d = c % (m + 1);
            c /= m + 1;
        }
        let mut masks = alloc::vec![0u32; m];
        let mut value = 0.0;
        for (k, &d) in digits.iter().enumerate() {
            if d < m {
                masks[d] |= 1 << k;
                value += inst.jobs[k].value;
            }
        }
        let energy: f64 = (0..m).map(|i| energies[i][masks[i] as usize]).sum();
        if value - energy > best.0 {
            best = (value - energy, digits.clone());
        }
    }
    let choice: Vec<Option<usize>> = best.1.iter().map(|&d| (d < m).then_some(d)).collect();
    Ok(OracleResult {
        value: best.0,
        kind: OracleKind::Exact,
        method: "assignment enumeration with YDS".into(),
        witness: Some(witness(inst, &choice)?),
    })
}

/// Energy of the YDS profile under the lower convex envelope of
/// `P(s) 1[s > 0]`, plus one wake-up when there is work.
///
/// Below the critical speed the envelope is linear with slope
/// `P(s^c)/s^c`; YDS is optimal for every convex power, so this bounds the
/// energy of any schedule with sleep states from below.
pub fn yds_critical_bound(inst: &Instance) -> Result<f64, OracleError> {
    let js = edf_jobs(inst, 0, &(0..inst.jobs.len()).collect::<Vec<_>>())?;
    if js.is_empty() {
        return Ok(0.0);
    }
    let p = inst.power;
    let y = yds(&js, p.alpha());
    let sc = p.critical_speed().unwrap_or(0.0);
    let theta = if sc > 0.0 { p.p(sc) / sc } else { 0.0 };
    let e = y.speed.integrate_map(|s| if s >= sc { p.p(s) } else { theta * s });
    Ok(e + inst.wakeup_cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SleepBound {
    pub result: OracleResult,
    pub yds_dynamic: f64,
    pub yds_critical: f64,
    /// The online run's dual bound, when its lemma checks pass.
    pub gated_dual: Option<f64>,
}

/// Largest of the dynamic-only YDS energy, the critical-envelope bound and
/// the dual bound of the online run (only if its lemma checks pass).
pub fn sleep_lower_bound(inst: &Instance, gated_dual: Option<f64>) -> Result<SleepBound, OracleError> {
    if inst.kind != ProblemKind::MinEnergySleep {
        return Err(OracleError::WrongProblem(inst.kind));
    }
    let js = edf_jobs(inst, 0, &(0..inst.jobs.len()).collect::<Vec<_>>())?;
    let yds_dynamic = yds(&js, inst.power.alpha()).energy;
    let yds_critical = yds_critical_bound(inst)?;
    let value = fmax(fmax(yds_dynamic, yds_critical), gated_dual.unwrap_or(0.0));
    Ok(SleepBound {
        result: OracleResult {
            value,
            kind: OracleKind::LowerBound,
            method: "max of YDS, critical-speed envelope and gated dual".into(),
            witness: None,
        },
        yds_dynamic,
        yds_critical,
        gated_dual,
    })
}

/// Best constant speed for a lone job: minimises `(w + P(s)) p / s`.
pub fn single_job_flow_speed(p: &PowerFunction, w: f64) -> f64 {
    let a = p.alpha();
    if a <= 1.0 {
        return f64::INFINITY;
    }
    powf((w + p.g()) / (a - 1.0), 1.0 / a)
}

/// `min_s (w + P(s)) p / s`.
pub fn single_job_flow_cost(p: &PowerFunction, w: f64, vol: f64) -> f64 {
    let s = single_job_flow_speed(p, w);
    if !s.is_finite() {
        return w * 0.0 + p.p(1.0) * vol;
    }
    (w + p.p(s)) * vol / s
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowBracket {
    pub lower: OracleResult,
    pub upper: OracleResult,
}

/// Cost of processing `order` back to back at `speeds`, sleeping in a gap
/// whenever that is cheaper than idling.
fn flow_plan_cost(inst: &Instance, order: &[usize], speeds: &[f64]) -> (f64, Vec<(usize, f64, f64)>) {
    let p = inst.power;
    let mut t = f64::NEG_INFINITY;
    let mut cost = 0.0;
    let mut spans = Vec::with_capacity(order.len());
    for (k, &j) in order.iter().enumerate() {
        let job = &inst.jobs[j];
        let start = fmax(t, job.release);
        if k == 0 {
            cost += inst.wakeup_cost;
        } else if start > t {
            cost += fmin(p.g() * (start - t), inst.wakeup_cost);
        }
        let dur = job.volumes[0] / speeds[k];
        let end = start + dur;
        cost += p.p(speeds[k]) * dur + job.weight * (end - job.release);
        spans.push((j, start, end));
        t = end;
    }
    (cost, spans)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return alloc::vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut v = rest.clone();
            v.insert(pos, n - 1);
            out.push(v);
        }
    }
    out
}

/// Bracket for the optimum of weighted flow-time plus energy.
///
/// Upper: best back-to-back schedule over every job order and per-job
/// speeds from a geometric grid of `levels` values, then refined by
/// coordinate search. Lower: each job alone at its best constant speed,
/// plus one wake-up.
pub fn grid_opt_flow_energy(inst: &Instance, levels: usize) -> Result<FlowBracket, OracleError> {
    if inst.kind != ProblemKind::FlowPlusEnergy {
        return Err(OracleError::WrongProblem(inst.kind));
    }
    let n = inst.jobs.len();
    if n > MAX_FLOW_JOBS {
        return Err(OracleError::TooLarge { what: "jobs", got: n, max: MAX_FLOW_JOBS });
    }
    if levels == 0 || levels > MAX_FLOW_LEVELS {
        return Err(OracleError::TooLarge { what: "speed levels", got: levels, max: MAX_FLOW_LEVELS });
    }
    let p = inst.power;
    let lower_value: f64 = if n == 0 {
        0.0
    } else {
        inst.jobs.iter().map(|j| single_job_flow_cost(&p, j.weight, j.volumes[0])).sum::<f64>() + inst.wakeup_cost
    };
    let lower = OracleResult {
        value: lower_value,
        kind: OracleKind::LowerBound,
        method: "per-job relaxation".into(),
        witness: None,
    };
    if n == 0 {
        let upper = OracleResult { value: 0.0, kind: OracleKind::UpperBound, method: "empty".into(), witness: None };
        return Ok(FlowBracket { lower, upper });
    }
    let (best_cost, best_order, best_speeds) = flow_grid_search(inst, levels, true);
    let (_, spans) = flow_plan_cost(inst, &best_order, &best_speeds);
    let mut sched = Schedule::default();
    for (k, &(j, a, b)) in spans.iter().enumerate() {
        let id = inst.jobs[j].id;
        sched.per_job_speed.insert(id, StepFunction::constant(a, b, best_speeds[k]));
        sched.assignment.insert(id, Assignment::Machine(0));
        sched.completion_times.insert(id, b);
        sched.push_state(0, a, b, MachineState::Working);
    }
    let upper = OracleResult {
        value: best_cost,
        kind: OracleKind::UpperBound,
        method: "order and speed-grid search".into(),
        witness: Some(sched),
    };
    Ok(FlowBracket { lower, upper })
}

/// Best grid schedule; `refine` adds a coordinate search on top.
pub fn flow_grid_search(inst: &Instance, levels: usize, refine: bool) -> (f64, Vec<usize>, Vec<f64>) {
    let p = inst.power;
    let n = inst.jobs.len();
    let total_w: f64 = inst.jobs.iter().map(|j| j.weight).sum();
    let min_w = inst.jobs.iter().map(|j| j.weight).fold(f64::INFINITY, fmin);
    let lo = 0.25 * fmin(single_job_flow_speed(&p, min_w), fmax(p.critical_speed().unwrap_or(0.0), 1e-3));
    let hi = 4.0 * single_job_flow_speed(&p, total_w);
    let lo = fmax(lo, 1e-6);
    let grid: Vec<f64> = (0..levels)
        .map(|i| if levels == 1 { hi } else { lo * powf(hi / lo, i as f64 / (levels - 1) as f64) })
        .collect();
    let mut best = (f64::INFINITY, Vec::new(), Vec::new());
    for order in permutations(n) {
        let mut idx = alloc::vec![0usize; n];
        loop {
            let speeds: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
            let (c, _) = flow_plan_cost(inst, &order, &speeds);
            if c < best.0 {
                best = (c, order.clone(), speeds);
            }
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < levels {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    if refine {
        let (mut cost, order, mut speeds) = best;
        for _ in 0..6 {
            for k in 0..n {
                let f = |x: f64| {
                    let mut s = speeds.clone();
                    s[k] = libm::exp(x);
                    flow_plan_cost(inst, &order, &s).0
                };
                let c = libm::log(speeds[k]);
                let x = golden(&f, c - 2.0, c + 2.0, 60);
                let trial = f(x);
                if trial < cost {
                    cost = trial;
                    speeds[k] = libm::exp(x);
                }
            }
        }
        return (cost, order, speeds);
    }
    best
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let phi = 0.618_033_988_749_894_9;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Objective of a deadline schedule: dynamic energy of each machine.
pub fn recost_dynamic(sched: &Schedule, machines: usize, alpha: f64) -> f64 {
    (0..machines).map(|i| sched.machine_speed(i).integrate_map(|s| powf(s, alpha))).sum()
}

/// Value of the accepted jobs of a schedule.
pub fn accepted_value(inst: &Instance, sched: &Schedule) -> f64 {
    let by_id: BTreeMap<u64, f64> = inst.jobs.iter().map(|j| (j.id, j.value)).collect();
    sched.accepted().iter().map(|id| by_id[id]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Job;
    use alloc::vec;
    use proptest::prelude::*;

    fn ej(id: u64, r: f64, d: f64, p: f64) -> EdfJob {
        EdfJob { id, release: r, deadline: d, volume: p }
    }

    #[test]
    fn yds_examples() {
        assert!((yds(&[ej(0, 0.0, 1.0, 2.0)], 2.0).energy - 4.0).abs() < 1e-12);
        let y = yds(&[ej(0, 0.0, 1.0, 1.0), ej(1, 0.0, 2.0, 1.0)], 2.0);
        assert!((y.energy - 2.0).abs() < 1e-12);
        assert_eq!(y.speed, StepFunction::constant(0.0, 2.0, 1.0));
        let y = yds(&[ej(0, 0.0, 1.0, 1.0), ej(1, 2.0, 4.0, 1.0)], 3.0);
        assert!((y.energy - (1.0 + 2.0 * 0.125)).abs() < 1e-12);
        assert!(yds(&[], 2.0).speed.is_zero());
    }

    #[test]
    fn yds_nested_compression() {
        // Dense inner job on [1,2], loose outer job on [0,4].
        let js = [ej(0, 1.0, 2.0, 3.0), ej(1, 0.0, 4.0, 3.0)];
        let y = yds(&js, 2.0);
        assert!((y.speed.eval(1.5) - 3.0).abs() < 1e-12);
        assert!((y.speed.eval(0.5) - 1.0).abs() < 1e-12);
        assert!((y.speed.eval(3.0) - 1.0).abs() < 1e-12);
        assert!(edf(&y.speed, &js).feasible());
    }

    fn discretised_opt(js: &[EdfJob], alpha: f64, per_unit: usize) -> f64 {
        // Convex program on a fine grid, by iterated water-filling of each
        // job into the cells of its window (block coordinate descent).
        let h = js.iter().map(|j| j.deadline).fold(0.0, f64::max);
        let cells = h as usize * per_unit;
        let dt = 1.0 / per_unit as f64;
        let mut x = vec![vec![0.0; cells]; js.len()];
        for _ in 0..200 {
            for (k, j) in js.iter().enumerate() {
                let cs: Vec<usize> =
                    (0..cells).filter(|&c| c as f64 * dt >= j.release - 1e-12 && (c + 1) as f64 * dt <= j.deadline + 1e-12).collect();
                let other: Vec<f64> = cs.iter().map(|&c| (0..js.len()).filter(|&q| q != k).map(|q| x[q][c]).sum()).collect();
                let pieces: Vec<(f64, f64, f64)> =
                    cs.iter().enumerate().map(|(i, &c)| (c as f64 * dt, (c + 1) as f64 * dt, other[i])).collect();
                let level = crate::waterfill::level_for_volume(&pieces, j.volume);
                for (i, &c) in cs.iter().enumerate() {
                    x[k][c] = (level - other[i]).max(0.0);
                }
            }
        }
        (0..cells).map(|c| powf((0..js.len()).map(|q| x[q][c]).sum::<f64>(), alpha) * dt).sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn yds_matches_grid_program(raw in proptest::collection::vec((0u8..8, 1u8..5, 1u32..40), 1..5)) {
            let js: Vec<EdfJob> = raw.iter().enumerate()
                .map(|(k, &(r, len, p))| ej(k as u64, r as f64, (r + len) as f64, p as f64 / 10.0)).collect();
            let y = yds(&js, 2.0);
            prop_assert!(edf(&y.speed, &js).feasible());
            let tot: f64 = js.iter().map(|j| j.volume).sum();
            prop_assert!((y.speed.total() - tot).abs() < 1e-9);
            let grid = discretised_opt(&js, 2.0, 4);
            prop_assert!(y.energy <= grid + 1e-6, "yds {} grid {}", y.energy, grid);
            prop_assert!(grid <= y.energy * (1.0 + 1e-3) + 1e-9, "yds {} grid {}", y.energy, grid);
        }
    }

    fn ev(jobs: Vec<Job>) -> Instance {
        Instance::new(ProblemKind::EnergyPlusLostValue, PowerFunction::new(2.0, 0.0).unwrap(), 0.0, 1, jobs, None)
            .unwrap()
    }

    #[test]
    fn energy_value_oracle() {
        assert_eq!(brute_force_energy_value(&ev(vec![Job::with_deadline(0, 0.0, 1.0, 2.0, 1.0)])).unwrap().value, 1.0);
        let r = brute_force_energy_value(&ev(vec![Job::with_deadline(0, 0.0, 1.0, 2.0, 1e6)])).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
        let w = r.witness.unwrap();
        assert!((recost_dynamic(&w, 1, 2.0) - r.value).abs() < 1e-9);
        assert_eq!(brute_force_energy_value(&ev(vec![])).unwrap().value, 0.0);
    }

    fn ve(m: usize, jobs: Vec<Job>) -> Instance {
        Instance::new(ProblemKind::ValueMinusEnergy, PowerFunction::new(2.0, 0.0).unwrap(), 0.0, m, jobs, Some(0.5))
            .unwrap()
    }

    #[test]
    fn value_energy_oracle() {
        assert_eq!(brute_force_value_energy(&ve(1, vec![])).unwrap().value, 0.0);
        let r = brute_force_value_energy(&ve(1, vec![Job::with_deadline(0, 0.0, 1.0, 1.0, 3.0)])).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        // Two unit jobs on [0,1]: stacking costs 4, splitting 2.
        let j = |id| Job { volumes: vec![1.0, 1.0], ..Job::with_deadline(id, 0.0, 1.0, 1.0, 3.0) };
        let r = brute_force_value_energy(&ve(2, vec![j(0), j(1)])).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
        let w = r.witness.unwrap();
        assert!((accepted_value(&ve(2, vec![j(0), j(1)]), &w) - recost_dynamic(&w, 2, 2.0) - r.value).abs() < 1e-9);
    }

    #[test]
    fn value_energy_oracle_monotone() {
        let mut jobs = Vec::new();
        let mut prev = 0.0;
        for k in 0..6u64 {
            let r = (k % 3) as f64;
            jobs.push(Job { volumes: vec![1.0 + k as f64 * 0.3, 2.0 - k as f64 * 0.2], ..Job::with_deadline(k, r, r + 2.0, 1.0, 1.0 + k as f64) });
            let v = brute_force_value_energy(&ve(2, jobs.clone())).unwrap().value;
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn too_large_is_rejected() {
        let jobs = (0..13).map(|k| Job::with_deadline(k, 0.0, 1.0, 1.0, 1.0)).collect();
        assert!(matches!(brute_force_energy_value(&ev(jobs)), Err(OracleError::TooLarge { .. })));
    }

    fn sl(g: f64, a: f64, jobs: Vec<Job>) -> Instance {
        Instance::new(ProblemKind::MinEnergySleep, PowerFunction::new(2.0, g).unwrap(), a, 1, jobs, None).unwrap()
    }

    #[test]
    fn sleep_bound_reduces_to_yds() {
        let i = sl(0.0, 0.0, vec![Job::with_deadline(0, 0.0, 1.0, 2.0, 0.0)]);
        let b = sleep_lower_bound(&i, None).unwrap();
        assert!((b.result.value - 4.0).abs() < 1e-12);
        assert_eq!(sleep_lower_bound(&sl(1.0, 1.0, vec![]), None).unwrap().result.value, 0.0);
        // Slow job under static power: the envelope charges theta per unit of work.
        let i = sl(4.0, 0.0, vec![Job::with_deadline(0, 0.0, 10.0, 1.0, 0.0)]);
        assert!((yds_critical_bound(&i).unwrap() - 4.0).abs() < 1e-12);
    }

    fn fl(g: f64, a: f64, jobs: Vec<Job>) -> Instance {
        Instance::new(ProblemKind::FlowPlusEnergy, PowerFunction::new(2.0, g).unwrap(), a, 1, jobs, None).unwrap()
    }

    #[test]
    fn flow_single_job_calculus() {
        // w=1, p=1, alpha=2, g=0: cost (1 + s^2)/s, minimised at s=1 with value 2.
        let i = fl(0.0, 0.0, vec![Job::weighted(0, 0.0, 1.0, 1.0)]);
        let b = grid_opt_flow_energy(&i, 8).unwrap();
        assert!((b.lower.value - 2.0).abs() < 1e-12);
        assert!(b.upper.value >= b.lower.value - 1e-12);
        assert!(b.upper.value <= 2.0 + 1e-6);
        let e = grid_opt_flow_energy(&fl(0.0, 0.0, vec![]), 8).unwrap();
        assert_eq!((e.lower.value, e.upper.value), (0.0, 0.0));
    }

    #[test]
    fn flow_grid_nested_levels() {
        let i = fl(1.0, 2.0, vec![Job::weighted(0, 0.0, 1.0, 1.0), Job::weighted(1, 0.5, 2.0, 3.0), Job::weighted(2, 4.0, 0.5, 1.0)]);
        let mut prev = f64::INFINITY;
        for levels in [3usize, 5, 9, 17] {
            let (c, _, _) = flow_grid_search(&i, levels, false);
            assert!(c <= prev + 1e-12);
            prev = c;
        }
        let b = grid_opt_flow_energy(&i, 8).unwrap();
        assert!(b.lower.value <= b.upper.value);
    }
}
