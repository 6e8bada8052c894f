//! Verdicts from runs, dual bounds and oracles.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;

use crate::energy_value::{self, EnergyValueRun};
use crate::flow::{self, FlowRun};
use crate::model::{Instance, ProblemKind, Schedule};
use crate::num::fmax;
use crate::oracles::{FlowBracket, OracleKind, OracleResult, SleepBound};
use crate::sleep::{self, SleepRun};
use crate::value_energy::{self, ValueEnergyRun};

/// Relative tolerance for every inequality check.
pub const TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Certified,
    InformationalOnly,
    Failed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Certified => "certified",
            Verdict::InformationalOnly => "informational_only",
            Verdict::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Verdict::Certified, Verdict::InformationalOnly, Verdict::Failed].into_iter().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One inequality with its slack. Negative margin means violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub margin: f64,
    pub passed: bool,
    /// A failing gating check fails the certificate.
    pub gating: bool,
}

impl Check {
    /// `lhs <= rhs` with relative tolerance.
    pub fn le(lhs: f64, rhs: f64, gating: bool) -> Self {
        let margin = rhs - lhs;
        let passed = margin >= -TOL * fmax(1.0, fmax(lhs.abs(), rhs.abs()));
        Check { margin, passed, gating }
    }

    /// Slack already normalised; passes when `margin >= -tol`.
    pub fn slack(margin: f64, tol: f64, gating: bool) -> Self {
        Check { margin, passed: margin >= -tol, gating }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub problem: ProblemKind,
    pub primal: f64,
    pub dual_or_bound: f64,
    /// Where the bound came from.
    pub bound_source: String,
    pub claimed_ratio: f64,
    pub observed_ratio: f64,
    pub lemma_checks: BTreeMap<String, Check>,
    pub verdict: Verdict,
    /// Why a certificate is informational, if it is.
    pub note: Option<String>,
}

impl Certificate {
    pub fn failed_checks(&self) -> impl Iterator<Item = &str> {
        self.lemma_checks.iter().filter(|(_, c)| !c.passed).map(|(k, _)| k.as_str())
    }

    /// Recomputes the ratio condition from the raw fields.
    pub fn ratio_holds(&self) -> bool {
        ratio_holds(self.problem, self.primal, self.dual_or_bound, self.claimed_ratio)
    }
}

fn ratio_holds(kind: ProblemKind, primal: f64, bound: f64, claimed: f64) -> bool {
    if kind.maximises() {
        primal >= bound / claimed - TOL * fmax(1.0, bound.abs())
    } else {
        primal <= claimed * bound + TOL * fmax(1.0, (claimed * bound).abs())
    }
}

/// Cost over bound for minimisation, bound over value for maximisation;
/// 1 when both sides vanish.
pub fn observed_ratio(kind: ProblemKind, primal: f64, bound: f64) -> f64 {
    let (num, den) = if kind.maximises() { (bound, primal) } else { (primal, bound) };
    if num.abs() <= 1e-12 {
        1.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertifyError {
    AlphaNotAboveOne(f64),
    MissingEpsilon,
    Mismatch { expected: ProblemKind, got: ProblemKind },
}

impl fmt::Display for CertifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertifyError::AlphaNotAboveOne(a) => write!(f, "bound needs alpha > 1, got {a}"),
            CertifyError::MissingEpsilon => f.write_str("value_minus_energy needs epsilon"),
            CertifyError::Mismatch { expected, got } => write!(f, "run is for {got}, instance is {expected}"),
        }
    }
}

impl core::error::Error for CertifyError {}

/// Competitive ratio proved for each problem.
pub fn claimed_bound(kind: ProblemKind, alpha: f64, epsilon: Option<f64>) -> Result<f64, CertifyError> {
    Ok(match kind {
        ProblemKind::EnergyPlusLostValue => libm::pow(alpha, alpha),
        ProblemKind::ValueMinusEnergy => 1.0 / epsilon.ok_or(CertifyError::MissingEpsilon)?,
        ProblemKind::MinEnergySleep => fmax(4.0, libm::pow(alpha, alpha)),
        ProblemKind::FlowPlusEnergy => {
            if alpha <= 1.0 {
                return Err(CertifyError::AlphaNotAboveOne(alpha));
            }
            flow::claimed_ratio(alpha)
        }
    })
}

fn expect(inst: &Instance, kind: ProblemKind) -> Result<(), CertifyError> {
    if inst.kind != kind {
        return Err(CertifyError::Mismatch { expected: inst.kind, got: kind });
    }
    Ok(())
}

fn verdict(checks: &BTreeMap<String, Check>, ratio_ok: bool, informational: bool) -> Verdict {
    let gating_ok = checks.values().all(|c| c.passed || !c.gating);
    if informational {
        Verdict::InformationalOnly
    } else if gating_ok && ratio_ok {
        Verdict::Certified
    } else {
        Verdict::Failed
    }
}

fn exact(oracle: Option<&OracleResult>) -> Option<f64> {
    oracle.filter(|o| o.kind == OracleKind::Exact).map(|o| o.value)
}

pub fn certify_energy_value(
    inst: &Instance,
    run: &EnergyValueRun,
    oracle: Option<&OracleResult>,
) -> Result<Certificate, CertifyError> {
    expect(inst, ProblemKind::EnergyPlusLostValue)?;
    let static_power = inst.power.g() > 0.0;
    let claimed = if static_power { run.r } else { claimed_bound(inst.kind, inst.power.alpha(), None)? };
    let mut checks = BTreeMap::new();
    let ind = energy_value::check_induction_step(run, 1000);
    checks.insert("induction_step".to_string(), Check::slack(-ind.max_violation, TOL, true));
    checks.insert("rejected_step".to_string(), Check::slack(ind.min_rejected_margin, TOL, true));
    let feas = energy_value::check_dual_feasibility(run, 64);
    checks.insert("lambda_le_price".to_string(), Check::slack(-feas.max_lambda_excess, TOL, true));
    checks.insert("lambda_eq_price".to_string(), Check::slack(-feas.max_equality_gap, TOL, true));
    checks.insert("gamma_le_cap".to_string(), Check::slack(-feas.max_gamma_excess, TOL, true));
    let late = crate::edf::edf(&energy_value::real_speed(run), &edf_jobs_accepted(inst, run)).late.len();
    checks.insert("deadlines_met".to_string(), Check::slack(-(late as f64), 0.0, true));
    checks.insert("q_dual_le_lagrangian".to_string(), Check::le(run.dual_value, run.dual_lagrangian, true));
    if let Some(opt) = exact(oracle) {
        checks.insert("weak_duality".to_string(), Check::le(run.dual_lagrangian, opt, true));
        checks.insert("ratio_vs_oracle".to_string(), Check::le(run.breakdown.total_primal, claimed * opt, true));
    }
    let primal = run.breakdown.total_primal;
    let bound = run.dual_value;
    let ok = ratio_holds(inst.kind, primal, bound, claimed);
    Ok(Certificate {
        problem: inst.kind,
        primal,
        dual_or_bound: bound,
        bound_source: "dual".into(),
        claimed_ratio: claimed,
        observed_ratio: observed_ratio(inst.kind, primal, bound),
        verdict: verdict(&checks, ok, static_power),
        lemma_checks: checks,
        note: static_power.then(|| "static power: speed map is numeric and energy counts dynamic power only".into()),
    })
}

fn edf_jobs_accepted(inst: &Instance, run: &EnergyValueRun) -> alloc::vec::Vec<crate::edf::EdfJob> {
    run.accepted
        .iter()
        .map(|id| {
            let j = inst.job(*id).unwrap();
            crate::edf::EdfJob { id: j.id, release: j.release, deadline: j.deadline.unwrap(), volume: j.volume() }
        })
        .collect()
}

pub fn certify_value_energy(
    inst: &Instance,
    run: &ValueEnergyRun,
    oracle: Option<&OracleResult>,
) -> Result<Certificate, CertifyError> {
    expect(inst, ProblemKind::ValueMinusEnergy)?;
    let claimed = claimed_bound(inst.kind, inst.power.alpha(), Some(run.epsilon))?;
    let mut checks = BTreeMap::new();
    let feas = value_energy::check_dual_feasibility(inst, run, 64, TOL);
    checks.insert("cover".to_string(), Check::slack(-feas.max_cover_violation, TOL, true));
    checks.insert("lambda_le_price".to_string(), Check::slack(-feas.max_lambda_excess, TOL, true));
    checks.insert("lambda_eq_price".to_string(), Check::slack(-feas.max_equality_gap, TOL, true));
    let l5 = value_energy::check_lemma5(run);
    checks.insert("lemma5".to_string(), Check::le(l5.right, l5.left, true));
    let mut late = 0usize;
    for i in 0..run.machines {
        let js: alloc::vec::Vec<crate::edf::EdfJob> = run
            .accepted
            .iter()
            .filter(|(_, m)| **m == i)
            .map(|(id, _)| {
                let j = inst.job(*id).unwrap();
                crate::edf::EdfJob { id: j.id, release: j.release, deadline: j.deadline.unwrap(), volume: j.volumes[i] }
            })
            .collect();
        late += crate::edf::edf(&value_energy::machine_speed(run, i), &js).late.len();
    }
    checks.insert("deadlines_met".to_string(), Check::slack(-(late as f64), 0.0, true));
    let (bound, source) = match exact(oracle) {
        Some(opt) => {
            checks.insert("weak_duality".to_string(), Check::le(opt, run.dual_upper, true));
            (opt, "oracle")
        }
        None => (run.dual_upper, "dual"),
    };
    let primal = run.alg_value;
    let ok = ratio_holds(inst.kind, primal, bound, claimed);
    // The run only bounds its value against the dual evaluated at its own
    // u; the dual objective takes the sup over u and may exceed that. A miss
    // against it says nothing about the optimum.
    let loose = !ok && exact(oracle).is_none();
    let note = if run.below_threshold {
        Some("epsilon below epsilon(P): no guarantee applies".into())
    } else if loose {
        Some("dual upper bound exceeds claimed ratio times value; needs an exact optimum".into())
    } else {
        None
    };
    let gating_ok = checks.values().all(|c| c.passed || !c.gating);
    Ok(Certificate {
        problem: inst.kind,
        primal,
        dual_or_bound: bound,
        bound_source: source.into(),
        claimed_ratio: claimed,
        observed_ratio: observed_ratio(inst.kind, primal, bound),
        verdict: verdict(&checks, ok, run.below_threshold || (loose && gating_ok)),
        lemma_checks: checks,
        note,
    })
}

/// Lemma checks of a sleep run; `bound` should already include the run's
/// dual bound only if these pass.
pub fn certify_sleep(inst: &Instance, run: &SleepRun, bound: &SleepBound) -> Result<Certificate, CertifyError> {
    expect(inst, ProblemKind::MinEnergySleep)?;
    let claimed = claimed_bound(inst.kind, inst.power.alpha(), None)?;
    let mut checks = BTreeMap::new();
    let l4 = sleep::check_lemma4_duals(inst, run, 100, TOL);
    // Only gates the dual term of the bound.
    checks.insert("lemma4_busy".to_string(), Check::slack(-l4.max_busy_excess, TOL, false));
    checks.insert("lemma4_gap".to_string(), Check::slack(-l4.max_gap_error, TOL, false));
    checks.insert("idle_budget".to_string(), Check::slack(-sleep::idle_budget_excess(inst, run), 1e-9, true));
    let primal = run.breakdown.total_primal;
    let lb = bound.result.value;
    let ok = ratio_holds(inst.kind, primal, lb, claimed);
    Ok(Certificate {
        problem: inst.kind,
        primal,
        dual_or_bound: lb,
        bound_source: "lower_bound".into(),
        claimed_ratio: claimed,
        observed_ratio: observed_ratio(inst.kind, primal, lb),
        verdict: verdict(&checks, ok, false),
        lemma_checks: checks,
        note: None,
    })
}

/// Optimal Available against the exact YDS optimum (`g = 0`, `A = 0`).
pub fn certify_oa(inst: &Instance, sched: &Schedule) -> Result<Certificate, CertifyError> {
    expect(inst, ProblemKind::MinEnergySleep)?;
    let alpha = inst.power.alpha();
    let claimed = fmax(1.0, inst.power.alpha_pow_alpha());
    let speed = sched.machine_speed(0);
    let jobs: alloc::vec::Vec<crate::edf::EdfJob> = inst
        .jobs
        .iter()
        .map(|j| crate::edf::EdfJob { id: j.id, release: j.release, deadline: j.deadline.unwrap(), volume: j.volume() })
        .collect();
    let opt = crate::oracles::yds(&jobs, alpha).energy;
    let mut checks = BTreeMap::new();
    checks.insert("oa_closed_form".to_string(), Check::slack(-sleep::oa_gap(inst, sched, &speed), TOL, true));
    let late = crate::edf::edf(&speed, &jobs).late.len();
    checks.insert("deadlines_met".to_string(), Check::slack(-(late as f64), 0.0, true));
    let primal = speed.integrate_map(|s| inst.power.dyn_p(s));
    let ok = ratio_holds(inst.kind, primal, opt, claimed);
    Ok(Certificate {
        problem: inst.kind,
        primal,
        dual_or_bound: opt,
        bound_source: "yds".into(),
        claimed_ratio: claimed,
        observed_ratio: observed_ratio(inst.kind, primal, opt),
        verdict: verdict(&checks, ok, false),
        lemma_checks: checks,
        note: None,
    })
}

/// Lower bound valid at any size: every job alone at its best speed.
pub fn flow_lower_bound(inst: &Instance) -> f64 {
    if inst.jobs.is_empty() {
        return 0.0;
    }
    inst.jobs.iter().map(|j| crate::oracles::single_job_flow_cost(&inst.power, j.weight, j.volume())).sum::<f64>()
        + inst.wakeup_cost
}

pub fn certify_flow(inst: &Instance, run: &FlowRun, bracket: Option<&FlowBracket>) -> Result<Certificate, CertifyError> {
    expect(inst, ProblemKind::FlowPlusEnergy)?;
    let claimed = claimed_bound(inst.kind, inst.power.alpha(), None)?;
    let mut checks = BTreeMap::new();
    let l8 = flow::check_lemma8(inst, run);
    checks.insert("lemma8_flow".to_string(), Check::slack(l8.flow_margin / fmax(1.0, run.flow), TOL, true));
    checks.insert("lemma8_energy".to_string(), Check::slack(l8.energy_margin / fmax(1.0, run.e1), TOL, true));
    checks.insert("lemma8_combined".to_string(), Check::slack(l8.combined_margin / fmax(1.0, l8.sum_lambda_p), TOL, true));
    let l10 = flow::check_lemma10(inst, run, 100);
    checks.insert("lemma10".to_string(), Check::slack(l10.worst_active_margin, TOL, true));
    // The stated form also covers t >= C_j, which the ratio bound never uses.
    checks.insert("lemma10_after_completion".to_string(), Check::slack(l10.worst_margin, TOL, false));
    checks.insert("plan_balance".to_string(), Check::slack(-flow::plan_balance(run), 1e-9, true));
    let (lb, source) = match bracket {
        Some(b) => {
            checks.insert("bracket_ordered".to_string(), Check::le(b.lower.value, b.upper.value, true));
            (fmax(b.lower.value, flow_lower_bound(inst)), "grid_lower")
        }
        None => (flow_lower_bound(inst), "relaxation_lower"),
    };
    let primal = run.breakdown.total_primal;
    let ok = ratio_holds(inst.kind, primal, lb, claimed);
    Ok(Certificate {
        problem: inst.kind,
        primal,
        dual_or_bound: lb,
        bound_source: source.into(),
        claimed_ratio: claimed,
        observed_ratio: observed_ratio(inst.kind, primal, lb),
        verdict: verdict(&checks, ok, run.outside_model),
        lemma_checks: checks,
        note: run.outside_model.then(|| "g = 0 has no critical speed; outside the analysed model".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Job;
    use crate::power::PowerFunction;
    use alloc::vec;

    #[test]
    fn claimed_bounds() {
        assert_eq!(claimed_bound(ProblemKind::EnergyPlusLostValue, 2.0, None).unwrap(), 4.0);
        assert_eq!(claimed_bound(ProblemKind::ValueMinusEnergy, 2.0, Some(0.5)).unwrap(), 2.0);
        assert_eq!(claimed_bound(ProblemKind::MinEnergySleep, 1.2, None).unwrap(), 4.0);
        // 32 alpha / ln alpha >= 32 e > 64 for every alpha > 1.
        assert!((claimed_bound(ProblemKind::FlowPlusEnergy, 2.0, None).unwrap() - 64.0 / libm::log(2.0)).abs() < 1e-12);
        assert!(claimed_bound(ProblemKind::FlowPlusEnergy, 1.0, None).is_err());
        assert!((claimed_bound(ProblemKind::FlowPlusEnergy, 20.0, None).unwrap() - 640.0 / libm::log(20.0)).abs() < 1e-9);
    }

    fn ev() -> Instance {
        Instance::new(
            ProblemKind::EnergyPlusLostValue,
            PowerFunction::new(2.0, 0.0).unwrap(),
            0.0,
            1,
            vec![Job::with_deadline(0, 0.0, 1.0, 2.0, 100.0), Job::with_deadline(1, 0.5, 2.0, 1.0, 0.5)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn energy_value_certified() {
        let i = ev();
        let r = energy_value::run(&i).unwrap();
        let o = crate::oracles::brute_force_energy_value(&i).unwrap();
        let c = certify_energy_value(&i, &r, Some(&o)).unwrap();
        assert_eq!(c.verdict, Verdict::Certified, "{c:?}");
        assert!(c.ratio_holds());
    }

    #[test]
    fn tampered_lambda_fails() {
        let i = ev();
        let mut r = energy_value::run(&i).unwrap();
        *r.lambda.get_mut(&0).unwrap() *= 1.5;
        let c = certify_energy_value(&i, &r, None).unwrap();
        assert_eq!(c.verdict, Verdict::Failed);
        assert!(c.failed_checks().any(|n| n == "lambda_le_price"));
    }

    #[test]
    fn value_energy_below_threshold_is_informational() {
        let i = Instance::new(
            ProblemKind::ValueMinusEnergy,
            PowerFunction::new(2.0, 0.0).unwrap(),
            0.0,
            1,
            vec![Job::with_deadline(0, 0.0, 1.0, 1.0, 5.0)],
            Some(0.1),
        )
        .unwrap();
        let r = value_energy::run(&i).unwrap();
        let c = certify_value_energy(&i, &r, None).unwrap();
        assert_eq!(c.verdict, Verdict::InformationalOnly);
    }

    #[test]
    fn mismatch_is_an_error() {
        let i = ev();
        let f = Instance { kind: ProblemKind::FlowPlusEnergy, ..i.clone() };
        let r = energy_value::run(&i).unwrap();
        assert!(matches!(certify_energy_value(&f, &r, None), Err(CertifyError::Mismatch { .. })));
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(observed_ratio(ProblemKind::MinEnergySleep, 0.0, 0.0), 1.0);
        assert_eq!(observed_ratio(ProblemKind::ValueMinusEnergy, 2.0, 4.0), 2.0);
        assert!(ratio_holds(ProblemKind::ValueMinusEnergy, 2.0, 4.0, 2.0));
        assert!(!ratio_holds(ProblemKind::ValueMinusEnergy, 1.0, 4.0, 2.0));
    }
}
