mod common;

use common::{arb_strict_dd, arb_system, arb_weak};
use mpls::dominance::{
    classify, construct_diagonalizer, spectral_certificate, varrho, Classification,
};
use mpls::system::Scaling;
use proptest::prelude::*;

proptest! {
    #[test]
    fn strict_dominance_implies_scaled(sys in arb_strict_dd(20)) {
        let r = classify(&sys, &Scaling::identity(sys.n())).unwrap();
        prop_assert!(r.classification.at_least(Classification::DScaledDD));
        prop_assert!(r.scaled_dd && r.weakly_scaled_dd);
    }

    #[test]
    fn scaled_implies_weak((sys, d) in arb_weak(20, false)) {
        let r = classify(&sys, &d).unwrap();
        if r.scaled_dd {
            prop_assert!(r.weakly_scaled_dd);
        }
        prop_assert!(r.classification.at_least(Classification::WeaklyDScaledDD));
    }

    #[test]
    fn weak_implies_spectral_certificate((sys, _) in arb_weak(25, true)) {
        let cert = spectral_certificate(&sys).unwrap();
        prop_assert!(cert.rho < 1.0, "rho = {}", cert.rho);
        prop_assert!(cert.u.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn perron_scaling_equalises_varrho((sys, _) in arb_weak(25, false)) {
        let cert = spectral_certificate(&sys).unwrap();
        prop_assume!(cert.rho < 1.0 && !cert.reducible);
        let r = varrho(&sys, &cert.scaling()).unwrap();
        for v in r {
            prop_assert!((v - cert.rho).abs() <= 1e-8);
            prop_assert!(v <= cert.rho);
        }
    }

    #[test]
    fn diagonalizer_is_sound((sys, d) in arb_weak(30, true)) {
        let trace = construct_diagonalizer(&sys, &d).unwrap();
        prop_assert!(!trace.u_set.is_empty());
        prop_assert!(trace.transformed_varrho.iter().all(|&r| r < 1.0));
        for (p, a) in trace.rho_tilde.iter().zip(&trace.transformed_varrho) {
            prop_assert!(a <= &(p + 1e-12));
        }
    }

    #[test]
    fn classification_is_scale_invariant(sys in arb_system(12), c in 0.01..100.0f64) {
        let n = sys.n();
        let d = Scaling::identity(n);
        let a = classify(&sys, &d).unwrap();
        let b = classify(&sys, &d.scaled(c).unwrap()).unwrap();
        prop_assert_eq!(a.classification, b.classification);
        for (x, y) in a.varrho.iter().zip(&b.varrho) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn scale_invariance_random_d((sys, d) in arb_weak(15, false), c in 0.01..100.0f64) {
        let a = varrho(&sys, &d).unwrap();
        let b = varrho(&sys, &d.scaled(c).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn varrho_matches_definition(sys in arb_system(10), seed in any::<u64>()) {
        let n = sys.n();
        let d: Vec<f64> = (0..n).map(|i| 0.5 + ((seed >> (i % 60)) & 7) as f64 / 4.0).collect();
        let r = varrho(&sys, &Scaling::new(d.clone()).unwrap()).unwrap();
        let dense = sys.to_dense();
        for i in 0..n {
            let mass: f64 = (0..n).filter(|&j| j != i).map(|j| dense[i][j].abs() * d[j]).sum();
            prop_assert!((r[i] - mass / (dense[i][i] * d[i])).abs() <= 1e-12 * (1.0 + r[i]));
        }
    }
}
