//! Depth-k unwrapped (computation) trees and the checks that Algorithm 1 on
//! the tree reproduces the loopy run at the root.

use serde::Serialize;

use crate::dominance::{classify, Classification};
use crate::error::{Error, Result};
use crate::solver::{init_messages, run, Termination};
use crate::system::{build_induced_graph, InducedGraph, Scaling, SparseSystem};

pub const MAX_TREE_NODES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeNode {
    pub tree_id: usize,
    /// Original node this copy stands for.
    pub sigma: usize,
    pub parent: Option<usize>,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnwrappedTree {
    /// Breadth-first order; `nodes[0]` is the root.
    pub nodes: Vec<TreeNode>,
    pub tree_system: SparseSystem,
    pub root: usize,
    /// Number of nodes at each depth `0..=k`.
    pub layers: Vec<usize>,
}

impl UnwrappedTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sigma(&self) -> Vec<usize> {
        self.nodes.iter().map(|t| t.sigma).collect()
    }

    /// `d̆_t = d_σ(t)`.
    pub fn lift_scaling(&self, d: &Scaling) -> Result<Scaling> {
        Scaling::new(self.nodes.iter().map(|t| d.get(t.sigma)).collect())
    }
}

fn check_node(node: usize, n: usize) -> Result<()> {
    if node >= n {
        return Err(Error::NodeOutOfRange { node, n });
    }
    Ok(())
}

/// Grows the depth-`depth` tree from `root`: each leaf receives a child for
/// every neighbour of its original node except its parent's, in ascending
/// order.
pub fn build_unwrapped_tree(
    sys: &SparseSystem,
    g: &InducedGraph,
    root: usize,
    depth: usize,
) -> Result<UnwrappedTree> {
    check_node(root, sys.n())?;
    let mut nodes = vec![TreeNode {
        tree_id: 0,
        sigma: root,
        parent: None,
        depth: 0,
    }];
    let mut layers = vec![1];
    let mut frontier = 0..1;
    for level in 1..=depth {
        let start = nodes.len();
        for t in frontier.clone() {
            let here = nodes[t];
            let skip = here.parent.map(|p| nodes[p].sigma);
            for &v in g.neighbors(here.sigma) {
                if Some(v) == skip {
                    continue;
                }
                if nodes.len() == MAX_TREE_NODES {
                    return Err(Error::TreeTooLarge {
                        limit: MAX_TREE_NODES,
                    });
                }
                nodes.push(TreeNode {
                    tree_id: nodes.len(),
                    sigma: v,
                    parent: Some(t),
                    depth: level,
                });
            }
        }
        layers.push(nodes.len() - start);
        frontier = start..nodes.len();
    }

    let mut triplets = Vec::with_capacity(3 * nodes.len());
    for t in &nodes {
        triplets.push((t.tree_id, t.tree_id, sys.diag(t.sigma)));
        if let Some(p) = t.parent {
            let sp = nodes[p].sigma;
            triplets.push((t.tree_id, p, sys.coeff(t.sigma, sp)));
            triplets.push((p, t.tree_id, sys.coeff(sp, t.sigma)));
        }
    }
    let b = nodes.iter().map(|t| sys.rhs()[t.sigma]).collect();
    let tree_system = SparseSystem::new(nodes.len(), triplets, b)?;
    Ok(UnwrappedTree {
        nodes,
        tree_system,
        root: 0,
        layers,
    })
}

fn estimate_after(sys: &SparseSystem, g: &InducedGraph, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Ok(init_messages(sys, g)?.x_est);
    }
    let traj = run(sys, g, k, 0.0, None)?;
    if let Termination::NumericalFailure(f) = traj.termination {
        return Err(f.into());
    }
    Ok(traj.final_estimate().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootEquivalenceReport {
    pub root: usize,
    pub rounds: usize,
    pub tree_nodes: usize,
    pub loopy: f64,
    pub tree: f64,
    pub difference: f64,
    /// `1e-10 · (1 + |loopy|)`.
    pub tolerance: f64,
    pub holds: bool,
}

/// Runs `k` rounds on the graph and on its depth-`k` unwrapped tree and
/// compares the root estimates.
pub fn verify_root_equivalence(
    sys: &SparseSystem,
    g: &InducedGraph,
    root: usize,
    k: usize,
) -> Result<RootEquivalenceReport> {
    let tree = build_unwrapped_tree(sys, g, root, k)?;
    let loopy = estimate_after(sys, g, k)?[root];
    let tg = build_induced_graph(&tree.tree_system);
    let on_tree = estimate_after(&tree.tree_system, &tg, k)?[tree.root];
    let difference = (loopy - on_tree).abs();
    let tolerance = 1e-10 * (1.0 + loopy.abs());
    Ok(RootEquivalenceReport {
        root,
        rounds: k,
        tree_nodes: tree.len(),
        loopy,
        tree: on_tree,
        difference,
        tolerance,
        holds: difference <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeDominanceReport {
    pub original: Classification,
    pub tree: Classification,
    /// `ϱ` of the tree rows under the lifted scaling.
    pub tree_varrho: Vec<f64>,
    /// Tree is at least weakly dominant under the lifted scaling.
    pub holds: bool,
}

/// Classifies the depth-`k` tree under `d̆_t = d_σ(t)`.
pub fn verify_tree_dominance(
    sys: &SparseSystem,
    g: &InducedGraph,
    d: &Scaling,
    root: usize,
    k: usize,
) -> Result<TreeDominanceReport> {
    let original = classify(sys, d)?;
    if !original.weakly_scaled_dd {
        return Err(Error::NotWeaklyDominant);
    }
    let tree = build_unwrapped_tree(sys, g, root, k)?;
    let lifted = tree.lift_scaling(d)?;
    let report = classify(&tree.tree_system, &lifted)?;
    Ok(TreeDominanceReport {
        original: original.classification,
        tree: report.classification,
        holds: report.weakly_scaled_dd,
        tree_varrho: report.varrho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{example1, example2, figure2_graph};

    fn system_on(g: &InducedGraph) -> SparseSystem {
        let n = g.n();
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 4.0)).collect();
        for (i, j) in g.edges() {
            t.push((i, j, -1.0));
            t.push((j, i, 0.5));
        }
        SparseSystem::new(n, t, (1..=n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn figure2_layers() {
        let g = figure2_graph();
        let sys = system_on(&g);
        let tree = build_unwrapped_tree(&sys, &g, 0, 4).unwrap();
        assert_eq!(tree.layers, vec![1, 3, 3, 6, 6]);
        assert_eq!(tree.len(), 19);
        assert!(build_induced_graph(&tree.tree_system).is_acyclic());
    }

    #[test]
    fn depth_zero_is_root_only() {
        let sys = example2();
        let g = build_induced_graph(&sys);
        let tree = build_unwrapped_tree(&sys, &g, 3, 0).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.nodes[0].sigma, 3);
        assert_eq!(tree.tree_system.rhs(), &[4.0]);
    }

    #[test]
    fn triangle_expansion() {
        let sys = example1();
        let g = build_induced_graph(&sys);
        let tree = build_unwrapped_tree(&sys, &g, 0, 2).unwrap();
        assert_eq!(tree.layers, vec![1, 2, 2]);
        assert_eq!(tree.sigma(), vec![0, 1, 2, 2, 1]);
        assert_eq!(tree.nodes[3].parent, Some(1));
        assert_eq!(tree.nodes[4].parent, Some(2));
        // weights copied in both orientations
        let ts = &tree.tree_system;
        assert_eq!(ts.coeff(3, 1), sys.coeff(2, 1));
        assert_eq!(ts.coeff(1, 3), sys.coeff(1, 2));
        assert_eq!(ts.diag(4), sys.diag(1));
    }

    #[test]
    fn root_out_of_range() {
        let sys = example1();
        let g = build_induced_graph(&sys);
        assert!(matches!(
            build_unwrapped_tree(&sys, &g, 3, 1),
            Err(Error::NodeOutOfRange { node: 3, n: 3 })
        ));
    }

    #[test]
    fn example1_root_equivalence() {
        let sys = example1();
        let g = build_induced_graph(&sys);
        for k in 0..=10 {
            let r = verify_root_equivalence(&sys, &g, 0, k).unwrap();
            assert!(r.holds, "k = {k}: {r:?}");
        }
    }

    #[test]
    fn example2_root_equivalence() {
        let sys = example2();
        let g = build_induced_graph(&sys);
        let r = verify_root_equivalence(&sys, &g, 2, 6).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn example2_tree_dominance() {
        let sys = example2();
        let g = build_induced_graph(&sys);
        let r = verify_tree_dominance(&sys, &g, &Scaling::identity(5), 0, 4).unwrap();
        assert!(r.holds);
        assert!(r.tree.at_least(Classification::WeaklyDScaledDD));
    }

    #[test]
    fn weak_three_node_tree_dominance() {
        let sys = SparseSystem::from_dense(
            &[
                vec![1.0, 0.6, 0.6],
                vec![0.4, 1.0, 0.4],
                vec![0.4, 0.4, 1.0],
            ],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let g = build_induced_graph(&sys);
        let r = verify_tree_dominance(&sys, &g, &Scaling::identity(3), 0, 5).unwrap();
        assert_eq!(r.original, Classification::WeaklyDScaledDD);
        assert!(r.holds);
    }

    #[test]
    fn tree_dominance_requires_weak_original() {
        let sys =
            SparseSystem::from_dense(&[vec![1.0, 2.0], vec![0.6, 1.0]], vec![1.0; 2]).unwrap();
        let g = build_induced_graph(&sys);
        assert!(matches!(
            verify_tree_dominance(&sys, &g, &Scaling::identity(2), 0, 2),
            Err(Error::NotWeaklyDominant)
        ));
    }

    #[test]
    fn oversized_tree_is_rejected() {
        // K6: each level multiplies the frontier by 4
        let adj: Vec<Vec<usize>> = (0..6)
            .map(|i| (0..6).filter(|&j| j != i).collect())
            .collect();
        let g = InducedGraph::from_adjacency(adj);
        let sys = system_on(&g);
        assert!(matches!(
            build_unwrapped_tree(&sys, &g, 0, 12),
            Err(Error::TreeTooLarge { .. })
        ));
    }
}
