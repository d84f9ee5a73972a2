mod common;

use common::{arb_strict_dd, arb_weak};
use mpls::bounds::{
    enumerate_simple_loops, estimate_asymptotic_rate, lambda_star_at_perron, rho_bound,
    theorem1_bound, DEFAULT_MAX_LOOPS,
};
use mpls::dominance::{spectral_certificate, varrho};
use mpls::generate::{example2, generate, GeneratorSpec};
use mpls::solver::run;
use mpls::system::{build_induced_graph, direct_solve};
use proptest::prelude::*;

const K: usize = 40;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theorem1_bounds_every_node((sys, d) in arb_weak(16, true)) {
        let g = build_induced_graph(&sys);
        let bound = theorem1_bound(&sys, &g, &d, K).unwrap();
        let oracle = direct_solve(&sys).unwrap();
        let traj = run(&sys, &g, K, 0.0, None).unwrap();
        for k in 1..=traj.rounds_executed {
            for i in 0..sys.n() {
                let err = (traj.estimates[k][i] - oracle.x[i]).abs();
                let b = bound.bound(i, k);
                prop_assert!(err <= b * (1.0 + 1e-9) + 1e-12, "node {i} round {k}: {err} > {b}");
            }
        }
    }

    #[test]
    fn lambda_floor((sys, d) in arb_weak(16, true)) {
        let g = build_induced_graph(&sys);
        let bound = theorem1_bound(&sys, &g, &d, 20).unwrap();
        let rho = varrho(&sys, &d).unwrap();
        for level in &bound.levels {
            for e in 0..g.directed_edge_count() {
                let (i, j) = (g.source(e), g.target(e));
                let floor = sys.coeff(j, i).abs() * d.get(i) * (1.0 - rho[j] * rho[i]);
                prop_assert!(level.lambda_edge[e] >= floor - 1e-12);
            }
        }
    }

    #[test]
    fn weak_dominance_keeps_loop_gains_below_one((sys, d) in arb_weak(12, false)) {
        let g = build_induced_graph(&sys);
        let rho = varrho(&sys, &d).unwrap();
        let report = enumerate_simple_loops(&g, &rho, DEFAULT_MAX_LOOPS);
        prop_assert!(!report.truncated);
        prop_assert!(report.lambda_star < 1.0);
    }

    #[test]
    fn spectral_bound_holds(sys in arb_strict_dd(16)) {
        let g = build_induced_graph(&sys);
        let bound = rho_bound(&sys, K).unwrap();
        let oracle = direct_solve(&sys).unwrap();
        let traj = run(&sys, &g, K, 0.0, None).unwrap();
        for k in 0..=traj.rounds_executed {
            for i in 0..sys.n() {
                let err = (traj.estimates[k][i] - oracle.x[i]).abs();
                prop_assert!(err <= bound.table[k][i] * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn perron_loop_gain_below_rho(sys in arb_strict_dd(10)) {
        let cert = spectral_certificate(&sys).unwrap();
        let g = build_induced_graph(&sys);
        let ls = lambda_star_at_perron(&sys).unwrap();
        if g.is_acyclic() {
            prop_assert_eq!(ls, 0.0);
        } else {
            prop_assert!(ls <= cert.rho + 1e-8);
        }
    }
}

#[test]
fn example2_rate_within_loop_gain() {
    let sys = example2();
    let g = build_induced_graph(&sys);
    let oracle = direct_solve(&sys).unwrap();
    let traj = run(&sys, &g, 200, 0.0, Some(&oracle)).unwrap();
    let rate = estimate_asymptotic_rate(&traj, None).unwrap();
    let ls = lambda_star_at_perron(&sys).unwrap();
    assert!(rate.rate <= ls + 0.02, "{} vs {ls}", rate.rate);
}

#[test]
fn example3_style_rate_within_loop_gain() {
    for seed in 0..5 {
        let sys = generate(&GeneratorSpec::example3_style(13), seed).unwrap();
        let g = build_induced_graph(&sys);
        let oracle = direct_solve(&sys).unwrap();
        let traj = run(&sys, &g, 150, 0.0, Some(&oracle)).unwrap();
        let Ok(rate) = estimate_asymptotic_rate(&traj, None) else {
            continue;
        };
        let ls = lambda_star_at_perron(&sys).unwrap();
        assert!(rate.rate <= ls + 0.02, "seed {seed}: {} vs {ls}", rate.rate);
    }
}

#[test]
fn example2_perron_loop_gain_equals_rho() {
    let sys = example2();
    let rho = spectral_certificate(&sys).unwrap().rho;
    assert!((lambda_star_at_perron(&sys).unwrap() - rho).abs() <= 1e-8);
}
