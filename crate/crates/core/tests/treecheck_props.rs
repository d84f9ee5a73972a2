mod common;

use common::{arb_strict_dd, arb_weak};
use mpls::system::build_induced_graph;
use mpls::treecheck::{build_unwrapped_tree, verify_root_equivalence, verify_tree_dominance};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layer_sizes_follow_degrees(sys in arb_strict_dd(8), root in any::<prop::sample::Index>(), depth in 0usize..6) {
        let g = build_induced_graph(&sys);
        let root = root.index(sys.n());
        let tree = build_unwrapped_tree(&sys, &g, root, depth).unwrap();
        prop_assert_eq!(tree.layers.len(), depth + 1);
        prop_assert_eq!(tree.layers.iter().sum::<usize>(), tree.len());
        let mut expected = vec![1];
        if depth >= 1 {
            expected.push(g.degree(root));
        }
        for level in 2..=depth {
            let next: usize = tree
                .nodes
                .iter()
                .filter(|t| t.depth == level - 1)
                .map(|t| g.degree(t.sigma) - 1)
                .sum();
            expected.push(next);
        }
        prop_assert_eq!(&tree.layers, &expected);
        prop_assert!(build_induced_graph(&tree.tree_system).is_acyclic());
    }

    #[test]
    fn weights_are_copied(sys in arb_strict_dd(8), depth in 0usize..5) {
        let g = build_induced_graph(&sys);
        let tree = build_unwrapped_tree(&sys, &g, 0, depth).unwrap();
        let ts = &tree.tree_system;
        for t in &tree.nodes {
            prop_assert_eq!(ts.diag(t.tree_id), sys.diag(t.sigma));
            prop_assert_eq!(ts.rhs()[t.tree_id], sys.rhs()[t.sigma]);
            if let Some(p) = t.parent {
                let sp = tree.nodes[p].sigma;
                prop_assert_eq!(ts.coeff(t.tree_id, p), sys.coeff(t.sigma, sp));
                prop_assert_eq!(ts.coeff(p, t.tree_id), sys.coeff(sp, t.sigma));
            }
        }
    }

    #[test]
    fn root_matches_loopy_run(sys in arb_strict_dd(7), root in any::<prop::sample::Index>(), k in 0usize..7) {
        let g = build_induced_graph(&sys);
        let r = verify_root_equivalence(&sys, &g, root.index(sys.n()), k).unwrap();
        prop_assert!(r.holds, "{:?}", r);
    }

    #[test]
    fn tree_inherits_weak_dominance((sys, d) in arb_weak(7, false), k in 0usize..6) {
        let g = build_induced_graph(&sys);
        let r = verify_tree_dominance(&sys, &g, &d, 0, k).unwrap();
        prop_assert!(r.holds);
    }
}
