use ecosched::batch::{batch_report, parse_rows, summarise, table, Row, SUMMARY_SEED};
use ecosched::generate::{generate_random, GenParams};
use ecosched::io::{instance_to_json, parse_instance, to_pretty, ScheduleFile};
use ecosched::report::{certify_report, parse_report, run_instance, Algo, OracleMode};
use ecosched::AppError;
use ecosched_core::certify::Verdict;
use ecosched_core::model::ProblemKind;
use proptest::prelude::*;

const KINDS: [ProblemKind; 4] = [
    ProblemKind::EnergyPlusLostValue,
    ProblemKind::ValueMinusEnergy,
    ProblemKind::MinEnergySleep,
    ProblemKind::FlowPlusEnergy,
];

fn params(kind: ProblemKind, n: usize, alpha: f64, g: f64, a: f64) -> GenParams {
    let mut p = GenParams::new(kind, n, alpha);
    p.g = g;
    if matches!(kind, ProblemKind::MinEnergySleep | ProblemKind::FlowPlusEnergy) {
        p.wakeup_cost = a;
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_json_round_trips(
        k in 0usize..4,
        n in 0usize..12,
        alpha in 1.1..4.0f64,
        g in 0.0..3.0f64,
        a in 0.0..5.0f64,
        seed in any::<u64>(),
    ) {
        let inst = generate_random(&params(KINDS[k], n, alpha, g, a), seed).unwrap();
        let text = instance_to_json(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(instance_to_json(&back), text);
    }

    #[test]
    fn report_round_trips_and_certifies(k in 0usize..4, n in 1usize..6, seed in 0u64..1000) {
        let (g, a) = if KINDS[k] == ProblemKind::FlowPlusEnergy { (1.0, 2.0) } else { (0.0, 0.0) };
        let inst = generate_random(&params(KINDS[k], n, 2.0, g, a), seed).unwrap();
        let rep = run_instance(inst, Algo::default_for(KINDS[k]), None).unwrap();
        let back = parse_report(&to_pretty(&rep)).unwrap();
        prop_assert_eq!(&back, &rep);
        let sched = back.schedule.to_schedule().unwrap();
        prop_assert_eq!(&ScheduleFile::from(&sched), &back.schedule);
        let cert = certify_report(&back, OracleMode::None).unwrap();
        prop_assert!(cert.certificate.verdict != Verdict::Failed);
    }
}

#[test]
fn generator_is_deterministic_per_seed() {
    for kind in KINDS {
        let p = params(kind, 9, 2.5, 0.5, 1.0);
        let a = generate_random(&p, 42).unwrap();
        assert_eq!(a, generate_random(&p, 42).unwrap());
        assert_ne!(a, generate_random(&p, 43).unwrap());
        assert_eq!(a.kind, kind);
        assert_eq!(a.jobs.len(), 9);
        for j in &a.jobs {
            assert!(j.release >= 0.0 && j.release <= p.horizon);
            assert!((p.volume.0..=p.volume.1).contains(&j.volume()));
            assert_eq!(j.deadline.is_some(), kind != ProblemKind::FlowPlusEnergy);
        }
    }
}

#[test]
fn generator_rejects_bad_ranges_and_drops_unused_fields() {
    let mut p = GenParams::new(ProblemKind::MinEnergySleep, 3, 2.0);
    p.volume = (5.0, 1.0);
    assert!(generate_random(&p, 0).is_err());
    let mut p = GenParams::new(ProblemKind::MinEnergySleep, 3, 2.0);
    p.horizon = 0.0;
    assert!(generate_random(&p, 0).is_err());
    assert!(generate_random(&GenParams::new(ProblemKind::MinEnergySleep, 3, 0.5), 0).is_err());
    let mut p = GenParams::new(ProblemKind::EnergyPlusLostValue, 3, 2.0);
    p.machines = 2;
    p.wakeup_cost = 3.0;
    let i = generate_random(&p, 0).unwrap();
    assert_eq!((i.machines, i.wakeup_cost), (1, 0.0));
}

fn validation_path(text: &str) -> String {
    match parse_instance(text) {
        Err(AppError::Validation(e)) => e.path,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn validation_errors_name_the_field() {
    let bad_deadline = r#"{"problem":"min_energy_sleep","power":{"alpha":2},
        "jobs":[{"id":7,"release":3,"deadline":2,"volumes":[1]}]}"#;
    assert_eq!(validation_path(bad_deadline), "jobs[id=7].deadline");
    let dup = r#"{"problem":"flow_plus_energy","power":{"alpha":2,"g":1},
        "jobs":[{"id":1,"release":0,"volumes":[1],"weight":1},{"id":1,"release":1,"volumes":[1],"weight":1}]}"#;
    assert_eq!(validation_path(dup), "jobs[id=1].id");
    let alpha = r#"{"problem":"min_energy_sleep","power":{"alpha":0.5},"jobs":[]}"#;
    assert_eq!(validation_path(alpha), "power.alpha");
    let g = r#"{"problem":"min_energy_sleep","power":{"alpha":2,"g":-1},"jobs":[]}"#;
    assert_eq!(validation_path(g), "power.g");
    let volumes = r#"{"problem":"value_minus_energy","power":{"alpha":2},"machines":2,
        "jobs":[{"id":4,"release":0,"deadline":1,"volumes":[1],"value":3}]}"#;
    assert_eq!(validation_path(volumes), "jobs[id=4].volumes");
    let wake = r#"{"problem":"energy_plus_lost_value","power":{"alpha":2},"wakeup_cost":1,"jobs":[]}"#;
    assert_eq!(validation_path(wake), "wakeup_cost");
}

#[test]
fn malformed_json_is_a_parse_error() {
    for text in [
        "",
        "{",
        r#"{"problem":"nope","power":{"alpha":2},"jobs":[]}"#,
        r#"{"problem":"min_energy_sleep","power":{"alpha":2},"jobs":[],"extra":1}"#,
        r#"{"problem":"min_energy_sleep","jobs":[]}"#,
    ] {
        let e = parse_instance(text).unwrap_err();
        assert!(matches!(e, AppError::Parse(_)), "{text:?} gave {e:?}");
        assert_eq!(e.exit_code(), 1);
    }
}

#[test]
fn empty_instance_runs_to_zero() {
    for kind in KINDS {
        let inst = generate_random(&params(kind, 0, 2.0, 0.0, 0.0), 0).unwrap();
        let rep = run_instance(inst, Algo::default_for(kind), None).unwrap();
        assert_eq!(rep.primal, 0.0);
        assert!(rep.accepted_ids.is_empty());
    }
}

#[test]
fn single_job_energy_is_volume_squared_over_window() {
    let text = r#"{"problem":"energy_plus_lost_value","power":{"alpha":2},
        "jobs":[{"id":0,"release":0,"deadline":1,"volumes":[2],"value":100}]}"#;
    let rep = run_instance(parse_instance(text).unwrap(), Algo::Ev, None).unwrap();
    assert!((rep.primal - 4.0).abs() < 1e-12);
    assert_eq!(rep.accepted_ids, vec![0]);
}

#[test]
fn algorithm_must_match_problem() {
    let inst = generate_random(&GenParams::new(ProblemKind::MinEnergySleep, 2, 2.0), 1).unwrap();
    assert!(matches!(run_instance(inst.clone(), Algo::Ev, None), Err(AppError::Usage(_))));
    assert!(run_instance(inst.clone(), Algo::Oa, None).is_ok());
    assert!(run_instance(inst, Algo::Soa, Some(0.5)).is_err());
}

fn row(seed: u64, alpha: f64, ratio: f64, verdict: Verdict) -> Row {
    Row {
        seed: seed.to_string(),
        n: 3,
        alpha,
        g: 0.0,
        a: 0.0,
        epsilon: None,
        problem: "min_energy_sleep".into(),
        primal: Some(ratio),
        bound: Some(1.0),
        ratio,
        verdict: verdict.as_str().into(),
    }
}

#[test]
fn empty_batch_is_header_only() {
    let csv = batch_report(&[]).unwrap();
    assert_eq!(csv, "seed,n,alpha,g,A,epsilon,problem,primal,bound,ratio,verdict\n");
    assert!(parse_rows(&csv).unwrap().is_empty());
}

#[test]
fn batch_sorts_rows_and_appends_summaries() {
    let rows = vec![
        row(10, 3.0, 1.5, Verdict::Certified),
        row(2, 2.0, 1.2, Verdict::Certified),
        row(9, 2.0, 1.9, Verdict::InformationalOnly),
        row(1, 3.0, 1.1, Verdict::Certified),
    ];
    let csv = batch_report(&rows).unwrap();
    let back = parse_rows(&csv).unwrap();
    let seeds: Vec<&str> = back.iter().map(|r| r.seed.as_str()).collect();
    assert_eq!(seeds, ["2", "9", "1", "10", SUMMARY_SEED, SUMMARY_SEED]);
    let s2 = &back[4];
    assert_eq!((s2.alpha, s2.ratio, s2.verdict.as_str()), (2.0, 1.9, "informational_only"));
    assert!(s2.primal.is_none() && s2.bound.is_none());
    let s3 = &back[5];
    assert_eq!((s3.alpha, s3.ratio, s3.verdict.as_str()), (3.0, 1.5, "certified"));
    let mut shuffled = rows.clone();
    shuffled.reverse();
    assert_eq!(batch_report(&shuffled).unwrap(), csv);
    assert_eq!(batch_report(&back).unwrap(), csv);

    let sums = summarise(&back);
    assert_eq!(sums.len(), 2);
    assert_eq!((sums[0].count, sums[0].certified, sums[0].informational), (2, 1, 1));
    assert!((sums[0].mean_ratio - 1.55).abs() < 1e-12);
    let t = table(&sums);
    assert_eq!(t.lines().count(), 3);
    assert!(t.lines().next().unwrap().contains("max_ratio"));
}
