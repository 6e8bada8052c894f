//! Acceptance sweeps. Each test prints exactly one `criterion N: PASS|FAIL`
//! line with the worst observed quantities, then asserts.

use std::time::Instant;

use ecosched::generate::{generate_random, GenParams};
use ecosched_core::certify::{self, Verdict};
use ecosched_core::energy_value;
use ecosched_core::flow;
use ecosched_core::model::{Instance, ProblemKind};
use ecosched_core::ode::{self, closed_form_slope, QConvention, VMap};
use ecosched_core::oracles;
use ecosched_core::power::PowerFunction;
use ecosched_core::sleep;
use ecosched_core::value_energy;

const TOL: f64 = 1e-6;

fn verdict_line(n: u32, ok: bool, text: String) {
    println!("criterion {n}: {} {text}", if ok { "PASS" } else { "FAIL" });
}

fn gen(kind: ProblemKind, n: usize, alpha: f64, seed: u64, tweak: impl FnOnce(&mut GenParams)) -> Instance {
    let mut p = GenParams::new(kind, n, alpha);
    tweak(&mut p);
    generate_random(&p, seed).unwrap()
}

fn ev_sweep() -> impl Iterator<Item = (f64, u64, Instance)> {
    [1.5, 2.0, 3.0].into_iter().flat_map(|a| {
        (1..=100).map(move |seed| {
            let inst = gen(ProblemKind::EnergyPlusLostValue, 10, a, seed, |p| {
                p.horizon = 20.0;
                p.value = (0.1, 20.0);
            });
            (a, seed, inst)
        })
    })
}

#[test]
fn criterion_1_energy_value_ratio() {
    let t0 = Instant::now();
    let (mut runs, mut bad) = (0, Vec::new());
    let (mut worst_dual, mut worst_opt, mut worst_wd): (f64, f64, f64) = (0.0, 0.0, f64::NEG_INFINITY);
    for (a, seed, inst) in ev_sweep() {
        let run = energy_value::run(&inst).unwrap();
        let opt = oracles::brute_force_energy_value(&inst).unwrap().value;
        let bound = a.powf(a);
        let primal = run.breakdown.total_primal;
        runs += 1;
        worst_dual = worst_dual.max(primal / run.dual_value);
        worst_opt = worst_opt.max(primal / opt / bound);
        worst_wd = worst_wd.max(run.dual_lagrangian - opt);
        if primal > bound * run.dual_value + TOL || primal > bound * opt + TOL || run.dual_lagrangian > opt + TOL {
            bad.push((a, seed));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict_line(
        1,
        bad.is_empty(),
        format!(
            "runs={runs} violations={} max primal/dual={worst_dual:.4} max primal/(a^a opt)={worst_opt:.4} max dual-opt={worst_wd:.3e} time={secs:.1}s",
            bad.len()
        ),
    );
    assert!(bad.is_empty(), "violations at {bad:?}");
}

#[test]
fn criterion_2_induction_step() {
    let mut worst: f64 = 0.0;
    let mut rejected: f64 = f64::INFINITY;
    let mut runs = 0;
    for (_, _, inst) in ev_sweep() {
        let run = energy_value::run(&inst).unwrap();
        let rep = energy_value::check_induction_step(&run, 1000);
        worst = worst.max(rep.max_violation);
        rejected = rejected.min(rep.min_rejected_margin);
        runs += 1;
    }
    let ok = worst <= TOL && rejected >= -TOL;
    verdict_line(2, ok, format!("runs={runs} max violation={worst:.3e} min rejected margin={rejected:.3e}"));
    assert!(ok);
}

fn ve_instance(seed: u64) -> Instance {
    let n = 1 + (seed % 8) as usize;
    let m = 1 + ((seed / 8) % 2) as usize;
    let mut inst = gen(ProblemKind::ValueMinusEnergy, n, 2.0, seed, |p| p.machines = m);
    inst.epsilon = Some(inst.power.epsilon());
    inst
}

#[test]
fn criterion_3_value_energy_feasibility() {
    let t0 = Instant::now();
    let (mut viol, mut lemma5_bad, mut ratio_bad) = (0usize, 0usize, 0usize);
    let mut worst: f64 = 0.0;
    let mut multi = 0;
    for seed in 1..=100 {
        let inst = ve_instance(seed);
        multi += (inst.machines == 2) as usize;
        let run = value_energy::run(&inst).unwrap();
        let f = value_energy::check_dual_feasibility(&inst, &run, 64, TOL);
        viol += f.violations + (!f.passes(TOL)) as usize;
        lemma5_bad += (!value_energy::check_lemma5(&run).holds) as usize;
        let opt = oracles::brute_force_value_energy(&inst).unwrap().value;
        if run.alg_value < run.epsilon * opt - TOL {
            ratio_bad += 1;
        }
        if run.alg_value > 0.0 {
            worst = worst.max(opt / run.alg_value);
        }
    }
    let ok = viol == 0 && lemma5_bad == 0 && ratio_bad == 0;
    let secs = t0.elapsed().as_secs_f64();
    verdict_line(
        3,
        ok,
        format!(
            "runs=100 (two machines: {multi}) feasibility violations={viol} lemma5 failures={lemma5_bad} ratio failures={ratio_bad} max opt/alg={worst:.4} time={secs:.1}s"
        ),
    );
    assert!(ok);
}

/// Same sweep with the smaller printed threshold, for comparison only.
#[test]
fn epsilon_root_alpha_diagnostic() {
    let (mut ratio_bad, mut info) = (0, 0);
    for seed in 1..=100 {
        let mut inst = ve_instance(seed);
        let e = inst.power.epsilon_root_alpha();
        inst.epsilon = Some(e);
        let run = value_energy::run(&inst).unwrap();
        let opt = oracles::brute_force_value_energy(&inst).unwrap();
        if run.alg_value < e * opt.value - TOL {
            ratio_bad += 1;
        }
        let c = certify::certify_value_energy(&inst, &run, Some(&opt)).unwrap();
        info += (c.verdict == Verdict::InformationalOnly) as usize;
    }
    println!(
        "diagnostic: epsilon_root_alpha={:.6} vs epsilon={:.6}; runs=100 informational={info} ratio misses={ratio_bad}",
        PowerFunction::new(2.0, 0.0).unwrap().epsilon_root_alpha(),
        PowerFunction::new(2.0, 0.0).unwrap().epsilon()
    );
    assert_eq!(info, 100);
}

#[test]
fn criterion_4_oa_closed_form() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ref_gap: f64 = 0.0;
    for seed in 1..=200u64 {
        let alpha = [1.5, 2.0, 3.0][(seed % 3) as usize];
        let inst = gen(ProblemKind::MinEnergySleep, 1 + (seed % 10) as usize, alpha, seed, |_| {});
        let s = sleep::run_oa(&inst).unwrap();
        let speed = s.machine_speed(0);
        worst = worst.max(sleep::oa_gap(&inst, &s, &speed));
        let r = sleep::oa_reference(&inst);
        ref_gap = ref_gap.max(speed.sub_clamped(&r).max_value()).max(r.sub_clamped(&speed).max_value());
    }
    let ok = worst <= TOL;
    let secs = t0.elapsed().as_secs_f64();
    verdict_line(
        4,
        ok,
        format!("runs=200 max sup gap={worst:.3e} max gap to closed-form simulator={ref_gap:.3e} time={secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_5_sleep_bound() {
    let t0 = Instant::now();
    let (mut runs, mut late, mut l4_bad, mut ratio_bad) = (0, 0, 0, 0);
    let mut worst: f64 = 0.0;
    for g in [0.0, 1.0, 4.0] {
        for a in [0.0, 1.0, 10.0] {
            for seed in 1..=50u64 {
                let inst = gen(ProblemKind::MinEnergySleep, 1 + (seed % 10) as usize, 2.0, seed, |p| {
                    p.g = g;
                    p.wakeup_cost = a;
                });
                runs += 1;
                let run = match sleep::run_soa(&inst) {
                    Ok(r) => r,
                    Err(_) => {
                        late += 1;
                        continue;
                    }
                };
                for j in &inst.jobs {
                    let c = run.schedule.completion_times.get(&j.id).copied().unwrap_or(f64::INFINITY);
                    if c > j.deadline.unwrap() + 1e-9 * j.deadline.unwrap().abs().max(1.0) {
                        late += 1;
                    }
                }
                let l4 = sleep::check_lemma4_duals(&inst, &run, 100, TOL);
                l4_bad += (!l4.passes()) as usize;
                let lb = oracles::sleep_lower_bound(&inst, l4.passes().then_some(run.dual_lower_bound)).unwrap();
                let claimed = 4f64.max(inst.power.alpha_pow_alpha());
                let primal = run.breakdown.total_primal;
                if primal > claimed * lb.result.value + TOL {
                    ratio_bad += 1;
                }
                if lb.result.value > 0.0 {
                    worst = worst.max(primal / lb.result.value);
                }
            }
        }
    }
    let ok = late == 0 && l4_bad == 0 && ratio_bad == 0;
    let secs = t0.elapsed().as_secs_f64();
    verdict_line(
        5,
        ok,
        format!(
            "runs={runs} late={late} lemma4 failures={l4_bad} ratio failures={ratio_bad} max primal/bound={worst:.4} time={secs:.1}s"
        ),
    );
    assert!(ok);
}

fn flow_instance(seed: u64, n: usize) -> Instance {
    let alpha = [2.0, 3.0][(seed % 2) as usize];
    gen(ProblemKind::FlowPlusEnergy, n, alpha, seed, |p| {
        p.g = [1.0, 4.0][((seed / 2) % 2) as usize];
        p.wakeup_cost = [1.0, 10.0][((seed / 4) % 2) as usize];
    })
}

#[test]
fn criterion_6_flow_lemmas() {
    let t0 = Instant::now();
    let (mut l8_bad, mut l10_bad, mut samples) = (0, 0, 0);
    let (mut worst10, mut worst_balance, mut min8): (f64, f64, f64) = (f64::INFINITY, 0.0, f64::INFINITY);
    let mut worst_active = f64::INFINITY;
    for seed in 1..=100u64 {
        let inst = flow_instance(seed, 1 + (seed % 10) as usize);
        let run = flow::run(&inst).unwrap();
        let l8 = flow::check_lemma8(&inst, &run);
        l8_bad += (!l8.holds) as usize;
        min8 = min8.min(l8.flow_margin).min(l8.energy_margin).min(l8.combined_margin);
        let l10 = flow::check_lemma10(&inst, &run, 100);
        l10_bad += (!l10.holds(TOL)) as usize;
        samples += l10.samples;
        worst10 = worst10.min(l10.worst_margin);
        worst_active = worst_active.min(l10.worst_active_margin);
        worst_balance = worst_balance.max(flow::plan_balance(&run));
    }
    let ok = l8_bad == 0 && l10_bad == 0 && worst_balance <= 1e-9;
    let secs = t0.elapsed().as_secs_f64();
    verdict_line(
        6,
        ok,
        format!(
            "runs=100 lemma8 failures={l8_bad} (min margin {min8:.3e}) lemma10 failures={l10_bad} over {samples} samples (min margin {worst10:.3e}, while pending {worst_active:.3e}) max plan imbalance={worst_balance:.3e} time={secs:.1}s"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_flow_tiny_oracle() {
    let t0 = Instant::now();
    let (mut bad, mut order_bad) = (0, 0);
    let mut worst: f64 = 0.0;
    let runs = 48u64;
    for seed in 1..=runs {
        let inst = flow_instance(seed, 1 + (seed % 3) as usize);
        let run = flow::run(&inst).unwrap();
        let b = oracles::grid_opt_flow_energy(&inst, 16).unwrap();
        let claimed = certify::claimed_bound(inst.kind, inst.power.alpha(), None).unwrap();
        let primal = run.breakdown.total_primal;
        if primal > claimed * b.upper.value + TOL {
            bad += 1;
        }
        if b.lower.value > b.upper.value + TOL {
            order_bad += 1;
        }
        worst = worst.max(primal / b.upper.value);
    }
    let ok = bad == 0 && order_bad == 0;
    let secs = t0.elapsed().as_secs_f64();
    verdict_line(
        7,
        ok,
        format!("runs={runs} ratio failures={bad} bracket inversions={order_bad} max primal/upper={worst:.4} time={secs:.1}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_ode() {
    let p2 = PowerFunction::new(2.0, 0.0).unwrap();
    let rs = ode::find_r_star(&p2, 1e-3).unwrap();
    let bracket_ok = rs.lo <= rs.hi && rs.hi - rs.lo < 1e-3 && (rs.value - 4.0).abs() < 1e-2;
    let mut rows = Vec::new();
    let mut wired_ok = true;
    for alpha in [1.5, 2.0, 3.0] {
        let claim = ode::closed_form_claim(alpha);
        let valid: Vec<_> = claim.iter().filter(|r| r.validates()).collect();
        let names: Vec<String> = valid.iter().map(|r| format!("{} with v = {:.4} u", r.convention.label(), r.c)).collect();
        rows.push(format!("alpha={alpha}: {}", names.join("; ")));
        let wired = valid.iter().any(|r| r.convention == ode::DEFAULT_CONVENTION && r.c == closed_form_slope(alpha));
        let inst = gen(ProblemKind::EnergyPlusLostValue, 3, alpha, 1, |_| {});
        let (vmap, r) = energy_value::speed_map_for(&inst).unwrap();
        let linear = matches!(vmap, VMap::Linear(c) if c == closed_form_slope(alpha));
        wired_ok &= wired && linear && r == alpha.powf(alpha) && ode::DEFAULT_CONVENTION == QConvention::PMinusZdP;
    }
    let ok = bracket_ok && wired_ok;
    verdict_line(
        8,
        ok,
        format!("r* bracket at alpha=2: [{:.5}, {:.5}]; validated: {}; wired={}", rs.lo, rs.hi, rows.join(" | "), wired_ok),
    );
    assert!(ok);
}

#[test]
fn criterion_9_weak_duality() {
    let mut checked = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (_, _, inst) in ev_sweep().filter(|(_, s, _)| s % 4 == 0) {
        let run = energy_value::run(&inst).unwrap();
        let opt = oracles::brute_force_energy_value(&inst).unwrap();
        let c = certify::certify_energy_value(&inst, &run, Some(&opt)).unwrap();
        worst = worst.max(c.dual_or_bound - opt.value);
        checked += 1;
    }
    for seed in 1..=100 {
        let inst = ve_instance(seed);
        let run = value_energy::run(&inst).unwrap();
        let opt = oracles::brute_force_value_energy(&inst).unwrap();
        // Maximisation: the dual is an upper bound on the optimum.
        worst = worst.max(opt.value - run.dual_upper);
        checked += 1;
    }
    for seed in 1..=24u64 {
        let inst = flow_instance(seed, 1 + (seed % 3) as usize);
        let b = oracles::grid_opt_flow_energy(&inst, 16).unwrap();
        worst = worst.max(b.lower.value - b.upper.value);
        checked += 1;
    }
    let ok = worst <= TOL;
    verdict_line(9, ok, format!("instances={checked} max (bound - oracle) on the wrong side={worst:.3e}"));
    assert!(ok);
}
