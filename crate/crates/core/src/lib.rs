//! Distributed message-passing solver for sparse linear systems `Ax = b`,
//! with diagonal-dominance diagnostics and convergence-rate bounds.
//!
//! ```
//! use mpls::{build_induced_graph, direct_solve, generate::example1, run};
//!
//! let sys = example1();
//! let g = build_induced_graph(&sys);
//! let oracle = direct_solve(&sys).unwrap();
//! let traj = run(&sys, &g, 200, 1e-13, Some(&oracle)).unwrap();
//! let x = traj.final_estimate();
//! assert!((x[0] - oracle.x[0]).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dominance;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod mm;
pub mod solver;
pub mod system;
pub mod treecheck;

pub use bounds::{
    enumerate_simple_loops, estimate_asymptotic_rate, lambda_star_at_perron, rho_bound,
    theorem1_bound, LoopGainReport, RateEstimate,
};
pub use dominance::{
    classify, construct_diagonalizer, spectral_certificate, varrho, Classification, DominanceReport,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig};
pub use generate::{generate, GeneratorSpec};
pub use mm::{load_matrix_market, save_matrix_market};
pub use solver::{jacobi_run, run, step, transform_system, MessageState, Termination, Trajectory};
pub use system::{
    build_induced_graph, direct_solve, scaled_max_norm, InducedGraph, Scaling, Solution,
    SparseSystem,
};
pub use treecheck::{build_unwrapped_tree, verify_root_equivalence, verify_tree_dominance};
