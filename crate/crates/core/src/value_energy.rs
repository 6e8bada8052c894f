//! Unrelated machines, maximise collected value minus energy.
//!
//! Every machine water-fills the arriving job with price `P'((1-eps) u)` and
//! cap `a_j / p_ij`. Machines that reach the volume before the cap are
//! candidates; the job goes to the one with the smallest `p_ij lambda_ij`.
//! The machine is then run at speed `u`, which costs `P((1-eps) u)`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::edf::{edf, EdfJob};
use crate::model::{Assignment, CostBreakdown, Instance, ProblemKind, Schedule};
use crate::num::{fmax, fmin};
use crate::step::{combine, pointwise_sum, StepFunction};
use crate::waterfill::{fill, Binding, FillError, LinearPrice, PriceMap};

#[derive(Debug, Clone, PartialEq)]
pub enum ValueEnergyError {
    WrongProblem(ProblemKind),
    Fill(FillError),
}

impl core::fmt::Display for ValueEnergyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ValueEnergyError::WrongProblem(k) => write!(f, "expected value_minus_energy, got {k}"),
            ValueEnergyError::Fill(e) => write!(f, "water-filling: {e}"),
        }
    }
}

impl core::error::Error for ValueEnergyError {}

impl From<FillError> for ValueEnergyError {
    fn from(e: FillError) -> Self {
        ValueEnergyError::Fill(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueEnergyRun {
    pub schedule: Schedule,
    pub machines: usize,
    /// `u_ij` for every machine the job was filled on.
    pub u_profiles: BTreeMap<(usize, u64), StepFunction>,
    /// Final virtual load of each machine.
    pub u_total: Vec<StepFunction>,
    pub lambda: BTreeMap<(usize, u64), f64>,
    pub gamma: BTreeMap<u64, f64>,
    pub accepted: BTreeMap<u64, usize>,
    pub epsilon: f64,
    /// `epsilon < epsilon(P)`: the guarantee does not apply.
    pub below_threshold: bool,
    pub breakdown: CostBreakdown,
    /// `sum gamma - sum_i integral P(u_i) + sum lambda_ij integral u_ij`.
    pub dual_value: f64,
    /// `sum gamma + sum_i integral P*(max lambda_ij)`: an upper bound on the
    /// unit-speed optimum.
    pub dual_upper: f64,
    pub alg_value: f64,
}

pub fn run(inst: &Instance) -> Result<ValueEnergyRun, ValueEnergyError> {
    run_with_epsilon(inst, inst.epsilon.unwrap_or_else(|| inst.power.epsilon()))
}

pub fn run_with_epsilon(inst: &Instance, eps: f64) -> Result<ValueEnergyRun, ValueEnergyError> {
    if inst.kind != ProblemKind::ValueMinusEnergy {
        return Err(ValueEnergyError::WrongProblem(inst.kind));
    }
    let p = inst.power;
    let m = inst.machines;
    let pm = LinearPrice { power: p, c: 1.0 - eps };

    let mut u: Vec<StepFunction> = alloc::vec![StepFunction::zero(); m];
    let mut s: Vec<StepFunction> = alloc::vec![StepFunction::zero(); m];
    let mut u_profiles = BTreeMap::new();
    let mut lambda = BTreeMap::new();
    let mut gamma = BTreeMap::new();
    let mut accepted = BTreeMap::new();
    let mut assignment = BTreeMap::new();
    let mut per_machine_jobs: Vec<Vec<EdfJob>> = alloc::vec![Vec::new(); m];

    for idx in inst.arrival_order() {
        let j = &inst.jobs[idx];
        let (rj, dj) = (j.release, j.deadline.unwrap());
        let mut fills = Vec::with_capacity(m);
        for (i, (ui, &pij)) in u.iter().zip(&j.volumes).enumerate() {
            let fr = fill(ui, rj, dj, pij, Some(j.value / pij), &pm)?;
            let lam = if fr.binding == Binding::VolumeMet { pm.price(fr.level) } else { j.value / pij };
            lambda.insert((i, j.id), lam);
            fills.push(fr);
        }
        let best = (0..m)
            .filter(|&i| fills[i].binding == Binding::VolumeMet)
            .min_by(|&x, &y| {
                let cx = j.volumes[x] * lambda[&(x, j.id)];
                let cy = j.volumes[y] * lambda[&(y, j.id)];
                cx.partial_cmp(&cy).unwrap().then(x.cmp(&y))
            });
        match best {
            Some(i) => {
                gamma.insert(j.id, fmax(0.0, j.value - j.volumes[i] * lambda[&(i, j.id)]));
                accepted.insert(j.id, i);
                assignment.insert(j.id, Assignment::Machine(i));
                s[i] = s[i].add(&fills[i].increment);
                per_machine_jobs[i].push(EdfJob { id: j.id, release: rj, deadline: dj, volume: j.volumes[i] });
            }
            None => {
                gamma.insert(j.id, 0.0);
                assignment.insert(j.id, Assignment::Rejected);
            }
        }
        for (i, fr) in fills.into_iter().enumerate() {
            u[i] = u[i].add(&fr.increment);
            u_profiles.insert((i, j.id), fr.increment);
        }
    }

    let mut per_job_speed = BTreeMap::new();
    let mut completion_times = BTreeMap::new();
    for i in 0..m {
        let ex = edf(&s[i], &per_machine_jobs[i]);
        per_job_speed.extend(ex.per_job);
        completion_times.extend(ex.completion);
    }
    for j in &inst.jobs {
        per_job_speed.entry(j.id).or_insert_with(StepFunction::zero);
    }
    let schedule = Schedule { per_job_speed, assignment, state_timeline: Vec::new(), completion_times };

    let collected: f64 = accepted.keys().map(|id| inst.job(*id).unwrap().value).sum();
    let energy: f64 = s.iter().map(|si| si.integrate_map(|x| p.dyn_p((1.0 - eps) * x))).sum();
    let lost: f64 = inst.jobs.iter().filter(|j| !accepted.contains_key(&j.id)).map(|j| j.value).sum();
    let breakdown = CostBreakdown {
        dynamic_energy: energy,
        lost_value: lost,
        collected_value: collected,
        total_primal: collected - energy,
        ..CostBreakdown::default()
    };

    let sum_gamma: f64 = gamma.values().sum();
    let lam_u: f64 = u_profiles.iter().map(|(k, f)| lambda[k] * f.total()).sum();
    let e_u: f64 = u.iter().map(|ui| ui.integrate_map(|x| p.dyn_p(x))).sum();
    let dual_value = sum_gamma - e_u + lam_u;
    let dual_upper = sum_gamma + conjugate_term(inst, &lambda);

    Ok(ValueEnergyRun {
        schedule,
        machines: m,
        u_profiles,
        u_total: u,
        lambda,
        gamma,
        accepted,
        epsilon: eps,
        below_threshold: eps < inst.power.epsilon() - 1e-12,
        breakdown,
        dual_value,
        dual_upper,
        alg_value: collected - energy,
    })
}

/// `sum_i integral P*(max_{j: t in window} lambda_ij) dt`.
fn conjugate_term(inst: &Instance, lambda: &BTreeMap<(usize, u64), f64>) -> f64 {
    (0..inst.machines)
        .map(|i| {
            let ws: Vec<StepFunction> = inst
                .jobs
                .iter()
                .map(|j| StepFunction::constant(j.release, j.deadline.unwrap(), lambda[&(i, j.id)]))
                .collect();
            let refs: Vec<&StepFunction> = ws.iter().collect();
            combine(&refs, |xs| xs.iter().copied().fold(0.0, fmax)).integrate_map(|y| inst.power.conjugate_dyn(y))
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    /// `max(a_j - gamma_j - p_ij lambda_ij)` over all pairs.
    pub max_cover_violation: f64,
    /// `max(lambda_ij - P'((1-eps) u_i(t)))` over grid points of windows.
    pub max_lambda_excess: f64,
    /// `max |lambda_ij - P'((1-eps) u_i(t))|` on the support of `u_ij`.
    pub max_equality_gap: f64,
    pub violations: usize,
}

impl FeasibilityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_cover_violation <= tol && self.max_lambda_excess <= tol && self.max_equality_gap <= tol
    }
}

pub fn check_dual_feasibility(inst: &Instance, run: &ValueEnergyRun, grid: usize, tol: f64) -> FeasibilityReport {
    let p = inst.power;
    let c = 1.0 - run.epsilon;
    let mut rep = FeasibilityReport::default();
    for j in &inst.jobs {
        let (a, b) = (j.release, j.deadline.unwrap());
        for i in 0..run.machines {
            let lam = run.lambda[&(i, j.id)];
            let cover = (j.value - run.gamma[&j.id] - j.volumes[i] * lam) / fmax(1.0, j.value);
            if cover > tol {
                rep.violations += 1;
            }
            rep.max_cover_violation = fmax(rep.max_cover_violation, cover);
            let uij = &run.u_profiles[&(i, j.id)];
            for k in 0..grid {
                let t = a + (b - a) * (k as f64 + 0.5) / grid as f64;
                let price = p.dp(c * run.u_total[i].eval(t));
                let ex = (lam - price) / fmax(1.0, price);
                if ex > tol {
                    rep.violations += 1;
                }
                rep.max_lambda_excess = fmax(rep.max_lambda_excess, ex);
            }
            for (x, y, v) in uij.pieces() {
                if v <= 0.0 {
                    continue;
                }
                let price = p.dp(c * run.u_total[i].eval(0.5 * (x + y)));
                // Later jobs can only raise u, so on supp(u_ij) the price is
                // at least lambda_ij; equality holds at the time of the fill.
                let gap = fmax(0.0, lam - price) / fmax(1.0, price);
                rep.max_equality_gap = fmax(rep.max_equality_gap, gap);
            }
        }
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma5Report {
    pub left: f64,
    pub right: f64,
    pub holds: bool,
}

/// `(1/eps)(collected - sum_i integral P((1-eps) s_i))` against
/// `sum gamma - sum_i integral P(u_i) + sum lambda_ij integral u_ij`.
pub fn check_lemma5(run: &ValueEnergyRun) -> Lemma5Report {
    let left = run.alg_value / run.epsilon;
    let right = run.dual_value;
    Lemma5Report { left, right, holds: left >= right - 1e-6 * fmax(1.0, right.abs()) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueCertificate {
    pub alg_value: f64,
    pub opt_value: f64,
    /// `alg / opt`, 1 when both vanish.
    pub ratio: f64,
    pub holds: bool,
}

/// Checks `alg >= eps * opt`. Without an oracle value the dual upper bound
/// stands in for `opt`.
pub fn competitive_certificate(run: &ValueEnergyRun, oracle_value: Option<f64>) -> ValueCertificate {
    let opt = oracle_value.unwrap_or(run.dual_upper);
    let alg = run.alg_value;
    let ratio = if opt.abs() <= 1e-12 { 1.0 } else { alg / opt };
    ValueCertificate { alg_value: alg, opt_value: opt, ratio, holds: alg >= run.epsilon * opt - 1e-6 }
}

/// Real speed of machine `i`.
pub fn machine_speed(run: &ValueEnergyRun, i: usize) -> StepFunction {
    let fs: Vec<StepFunction> = run
        .accepted
        .iter()
        .filter(|(_, m)| **m == i)
        .map(|(id, _)| run.u_profiles[&(i, *id)].clone())
        .collect();
    pointwise_sum(&fs)
}

/// Smallest `gamma_j + p_ij lambda_ij - a_j`; negative means infeasible.
pub fn min_cover_slack(inst: &Instance, run: &ValueEnergyRun) -> f64 {
    let mut best = f64::INFINITY;
    for j in &inst.jobs {
        for i in 0..run.machines {
            best = fmin(best, run.gamma[&j.id] + j.volumes[i] * run.lambda[&(i, j.id)] - j.value);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Job;
    use crate::power::PowerFunction;
    use alloc::vec;

    fn inst(m: usize, eps: f64, jobs: Vec<Job>) -> Instance {
        Instance::new(ProblemKind::ValueMinusEnergy, PowerFunction::new(2.0, 0.0).unwrap(), 0.0, m, jobs, Some(eps))
            .unwrap()
    }

    #[test]
    fn single_job_accepted() {
        let i = inst(1, 0.5, vec![Job::with_deadline(0, 0.0, 1.0, 1.0, 100.0)]);
        let r = run(&i).unwrap();
        assert_eq!(r.accepted.get(&0), Some(&0));
        assert!((r.lambda[&(0, 0)] - 1.0).abs() < 1e-12);
        assert!((r.gamma[&0] - 99.0).abs() < 1e-12);
        // Energy (0.5 * 1)^2 = 0.25.
        assert!((r.alg_value - 99.75).abs() < 1e-12);
        assert!(check_dual_feasibility(&i, &r, 50, 1e-9).passes(1e-9));
        assert!(check_lemma5(&r).holds);
        // Unit-speed optimum: 100 - 1.
        let c = competitive_certificate(&r, Some(99.0));
        assert!(c.holds);
    }

    #[test]
    fn zero_value_rejected() {
        let i = inst(2, 0.5, vec![Job { volumes: vec![1.0, 2.0], ..Job::with_deadline(4, 0.0, 1.0, 1.0, 0.0) }]);
        let r = run(&i).unwrap();
        assert!(r.accepted.is_empty());
        assert_eq!(r.gamma[&4], 0.0);
        assert_eq!(r.lambda[&(1, 4)], 0.0);
        assert!(check_dual_feasibility(&i, &r, 10, 1e-9).passes(1e-9));
    }

    #[test]
    fn cheaper_machine_wins() {
        let i = inst(2, 0.5, vec![Job { volumes: vec![1.0, 2.0], ..Job::with_deadline(0, 0.0, 1.0, 1.0, 50.0) }]);
        let r = run(&i).unwrap();
        assert_eq!(r.accepted[&0], 0);
        assert!(machine_speed(&r, 1).is_zero());
        // The losing machine keeps its virtual load.
        assert!(r.u_total[1].total() > 0.0);
        assert!(min_cover_slack(&i, &r) >= -1e-9);
    }

    #[test]
    fn empty_instance() {
        let r = run(&inst(1, 0.5, vec![])).unwrap();
        assert_eq!(r.alg_value, 0.0);
        let l = check_lemma5(&r);
        assert!(l.holds && l.left == 0.0 && l.right == 0.0);
        assert_eq!(competitive_certificate(&r, Some(0.0)).ratio, 1.0);
    }

    #[test]
    fn below_threshold_flagged() {
        let r = run(&inst(1, 0.2, vec![Job::with_deadline(0, 0.0, 1.0, 1.0, 1.0)])).unwrap();
        assert!(r.below_threshold);
    }
}
