#![allow(dead_code)]

use mpls::generate::seeded_weakly_dominant;
use mpls::system::{Scaling, SparseSystem};
use proptest::prelude::*;

/// `(n, off-diagonal triplets, diagonal, rhs)`.
type Parts = (usize, Vec<(usize, usize, f64)>, Vec<f64>, Vec<f64>);

fn arb_parts(max_n: usize) -> impl Strategy<Value = Parts> {
    (2..=max_n).prop_flat_map(|n| {
        let off = prop::collection::vec((0..n, 0..n, -1.0..1.0f64), 0..3 * n);
        let diag = prop::collection::vec(0.5..3.0f64, n);
        let rhs = prop::collection::vec(-5.0..5.0f64, n);
        (Just(n), off, diag, rhs)
    })
}

fn assemble(n: usize, off: &[(usize, usize, f64)], diag: &[f64], rhs: Vec<f64>) -> SparseSystem {
    let mut seen = std::collections::BTreeSet::new();
    let mut t: Vec<_> = off
        .iter()
        .copied()
        .filter(|&(i, j, _)| i != j && seen.insert((i, j)))
        .collect();
    t.extend((0..n).map(|i| (i, i, diag[i])));
    SparseSystem::new(n, t, rhs).unwrap()
}

/// Sparse system with positive diagonal and no dominance guarantee.
pub fn arb_system(max_n: usize) -> impl Strategy<Value = SparseSystem> {
    arb_parts(max_n).prop_map(|(n, off, diag, rhs)| assemble(n, &off, &diag, rhs))
}

/// Strictly diagonally dominant: row `i` gets `ϱ_i = ratio[i]`.
pub fn arb_strict_dd(max_n: usize) -> impl Strategy<Value = SparseSystem> {
    arb_parts(max_n).prop_flat_map(|(n, off, _, rhs)| {
        prop::collection::vec(0.05..0.95f64, n).prop_map(move |ratio| {
            let mut mass = vec![0.0; n];
            let mut seen = std::collections::BTreeSet::new();
            for &(i, j, v) in &off {
                if i != j && seen.insert((i, j)) {
                    mass[i] += v.abs();
                }
            }
            let diag: Vec<f64> = (0..n)
                .map(|i| {
                    if mass[i] > 0.0 {
                        mass[i] / ratio[i]
                    } else {
                        1.0
                    }
                })
                .collect();
            assemble(n, &off, &diag, rhs.clone())
        })
    })
}

/// Connected system that is weakly dominant under the returned scaling.
pub fn arb_weak(max_n: usize, nonempty_u: bool) -> impl Strategy<Value = (SparseSystem, Scaling)> {
    (any::<u64>(), 3..=max_n)
        .prop_map(move |(seed, n)| seeded_weakly_dominant(seed, n, nonempty_u).unwrap())
}

pub fn arb_scaling(n: usize) -> impl Strategy<Value = Scaling> {
    prop::collection::vec(0.2..5.0f64, n).prop_map(|d| Scaling::new(d).unwrap())
}
