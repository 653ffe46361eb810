mod common;

use dedpoz::instance::{
    derive_segments, evaluate_cost, evaluate_loss_mw, evaluate_violations_with_tol, LossModel, Schedule,
    SystemInstance,
};
use dedpoz::io::{instance_to_json, parse_instance, read_schedule_csv, write_schedule_csv, CSV_AUDIT_TOL};
use dedpoz::model::{perspective_gap_bound, surrogate_cost};
use dedpoz::oracle::{assignment_count, dp_error_bound, dp_exact_dispatch, enumerate_assignments, DEFAULT_ENUMERATION_CAP};
use dedpoz::{solve_ded_with_loss, IaConfig};
use proptest::prelude::*;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// A random point in a random segment of every unit, every period.
fn segment_schedule(inst: &SystemInstance, seed: u64) -> Schedule {
    let mut rng = common::rng(seed);
    let segments = inst.segments();
    let p = (0..inst.num_periods())
        .map(|_| {
            segments
                .iter()
                .map(|segs| {
                    let s = &segs[rng.gen_range(0..segs.len())];
                    rng.gen_range(s.lo..=s.hi)
                })
                .collect()
        })
        .collect();
    Schedule::with_max_reserve(inst, p)
}

/// `E_t` from first principles, with the loss written out term by term.
fn independent_violation(inst: &SystemInstance, p: &[f64], t: usize) -> f64 {
    let loss = match &inst.loss_model {
        None => 0.0,
        Some(l) => {
            let n = p.len();
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += (p[i] / l.base_mva) * l.b_matrix[i][j] * (p[j] / l.base_mva);
                }
            }
            let lin: f64 = (0..n).map(|i| l.b0[i] * p[i] / l.base_mva).sum();
            (quad + lin + l.b00) * l.base_mva
        }
    };
    (p.iter().sum::<f64>() - inst.demand[t] - loss).abs()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn segments_tile_the_operating_range(seed in any::<u64>()) {
        let inst = common::tiny_lossless(&mut common::rng(seed));
        for u in &inst.units {
            let segs = derive_segments(u).unwrap();
            let seg_len: f64 = segs.iter().map(|s| s.width()).sum();
            let zone_len: f64 = u.prohibited_zones.iter().map(|z| z.width()).sum();
            prop_assert!((seg_len + zone_len - (u.p_max - u.p_min)).abs() < 1e-9);
            prop_assert_eq!(segs.first().unwrap().lo, u.p_min);
            prop_assert_eq!(segs.last().unwrap().hi, u.p_max);
            for (k, w) in segs.windows(2).enumerate() {
                prop_assert_eq!(w[0].hi, u.prohibited_zones[k].lo);
                prop_assert_eq!(w[1].lo, u.prohibited_zones[k].hi);
            }
        }
    }

    #[test]
    fn loss_is_invariant_under_base_rescaling(seed in any::<u64>(), s in 0.1f64..10.0) {
        let inst = common::lossy(&mut common::rng(seed));
        let loss = inst.loss_model.clone().unwrap();
        let rescaled = LossModel {
            b00: loss.b00 / s,
            b0: loss.b0.clone(),
            b_matrix: loss.b_matrix.iter().map(|r| r.iter().map(|v| v * s).collect()).collect(),
            base_mva: loss.base_mva * s,
        };
        let sched = segment_schedule(&inst, seed ^ 1);
        for row in &sched.p {
            let a = evaluate_loss_mw(&loss, row).unwrap();
            let b = evaluate_loss_mw(&rescaled, row).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn balance_violation_matches_independent_evaluator(seed in any::<u64>()) {
        let inst = common::lossy(&mut common::rng(seed));
        let sched = segment_schedule(&inst, seed ^ 2);
        let report = evaluate_violations_with_tol(&inst, &sched, 0.0).unwrap();
        for (t, row) in sched.p.iter().enumerate() {
            let e = independent_violation(&inst, row, t);
            prop_assert!((report.balance_violation[t] - e).abs() <= 1e-9 * e.max(1.0));
        }
    }

    #[test]
    fn cut_objective_sandwiches_exact_cost(seed in any::<u64>(), tangents in 1usize..8) {
        let inst = common::tiny_lossless(&mut common::rng(seed));
        let sched = segment_schedule(&inst, seed ^ 3);
        let exact = evaluate_cost(&inst, &sched).unwrap();
        let surrogate = surrogate_cost(&inst, &sched, tangents).unwrap();
        let bound = perspective_gap_bound(&inst, &sched, tangents).unwrap();
        prop_assert!(exact - surrogate >= -1e-6);
        prop_assert!(exact - surrogate <= bound + 1e-6);
    }

    #[test]
    fn enumeration_count_matches_closed_form(seed in any::<u64>()) {
        let inst = common::tiny_lossless(&mut common::rng(seed));
        let closed: u128 = inst
            .units
            .iter()
            .map(|u| u.prohibited_zones.len() as u128 + 1)
            .product::<u128>()
            .pow(inst.num_periods() as u32);
        prop_assert_eq!(assignment_count(&inst), closed);
        if closed <= DEFAULT_ENUMERATION_CAP {
            let all: Vec<_> = enumerate_assignments(&inst, DEFAULT_ENUMERATION_CAP).unwrap().collect();
            prop_assert_eq!(all.len() as u128, closed);
            prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn instance_json_round_trips(seed in any::<u64>(), lossy in any::<bool>()) {
        let mut rng = common::rng(seed);
        let inst = if lossy { common::lossy(&mut rng) } else { common::tiny_lossless(&mut rng) };
        let text = instance_to_json(&inst).unwrap();
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(instance_to_json(&back).unwrap(), text);
    }

    #[test]
    fn csv_audit_reproduces_in_memory_report(seed in any::<u64>()) {
        let inst = common::lossy(&mut common::rng(seed));
        let sched = segment_schedule(&inst, seed ^ 4);
        let direct = evaluate_violations_with_tol(&inst, &sched, CSV_AUDIT_TOL).unwrap();
        let mut buf = Vec::new();
        write_schedule_csv(&mut buf, &inst, &sched).unwrap();
        let p = read_schedule_csv(buf.as_slice(), &inst).unwrap();
        let audited = evaluate_violations_with_tol(&inst, &Schedule::with_max_reserve(&inst, p), CSV_AUDIT_TOL).unwrap();
        prop_assert_eq!(audited.bounds_ok, direct.bounds_ok);
        prop_assert_eq!(audited.poz_ok, direct.poz_ok);
        prop_assert_eq!(audited.ramp_ok, direct.ramp_ok);
        prop_assert_eq!(audited.reserve_ok, direct.reserve_ok);
        for (a, b) in audited.balance_violation.iter().zip(&direct.balance_violation) {
            prop_assert!((a - b).abs() <= CSV_AUDIT_TOL);
        }
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn halving_the_grid_stays_within_the_bound(seed in any::<u64>()) {
        let inst = common::tiny_lossless_sized(&mut common::rng(seed), 2, 2);
        let (coarse, _) = dp_exact_dispatch(&inst, 0.1).unwrap();
        let (fine, sched) = dp_exact_dispatch(&inst, 0.05).unwrap();
        prop_assert!(fine <= coarse + dp_error_bound(&inst, 0.1));
        // The grid path meets balance and reserve to N * delta / 2 only.
        let tol = inst.num_units() as f64 * 0.05 / 2.0 + 1e-9;
        let report = evaluate_violations_with_tol(&inst, &sched, tol).unwrap();
        prop_assert!(report.linear_constraints_ok());
        prop_assert!(report.max_violation <= tol);
    }

    #[test]
    fn returned_violations_match_recomputation(seed in any::<u64>()) {
        let inst = common::lossy(&mut common::rng(seed));
        let r = solve_ded_with_loss(&inst, &IaConfig::default()).unwrap();
        prop_assert!(r.iterations.len() <= IaConfig::default().iter_max);
        for (k, w) in r.iterations.iter().enumerate() {
            prop_assert_eq!(w.k, k + 3);
        }
        for (t, row) in r.schedule.p.iter().enumerate() {
            let e = independent_violation(&inst, row, t);
            prop_assert!((r.violations[t] - e).abs() <= 1e-9 * e.max(1.0));
        }
        prop_assert!(r.feasibility.linear_constraints_ok());
    }
}
