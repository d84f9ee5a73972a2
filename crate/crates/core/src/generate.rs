//! Fixed worked examples and seeded random instance generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dominance::{is_weakly_dominant, spectral_certificate, varrho};
use crate::error::{Error, Result};
use crate::system::{build_induced_graph, InducedGraph, Scaling, SparseSystem};

pub const MAX_ATTEMPTS: usize = 100;

/// `b_i = i` (one-based).
pub fn index_rhs(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64).collect()
}

/// The 3-node single-loop system.
pub fn example1() -> SparseSystem {
    SparseSystem::from_dense(
        &[
            vec![1.0, -0.72, -0.6],
            vec![-0.1, 1.0, -0.375],
            vec![-0.7, -0.5, 1.0],
        ],
        index_rhs(3),
    )
    .expect("valid fixed instance")
}

/// The 5-node double-loop system.
pub fn example2() -> SparseSystem {
    SparseSystem::from_dense(
        &[
            vec![1.0, 0.29, 0.0, 0.32, 0.35],
            vec![0.51, 1.0, 0.48, 0.0, 0.0],
            vec![0.0, 0.3, 1.0, 0.32, 0.35],
            vec![0.52, 0.0, 0.46, 1.0, 0.0],
            vec![0.44, 0.0, 0.53, 0.0, 1.0],
        ],
        index_rhs(5),
    )
    .expect("valid fixed instance")
}

/// Five nodes: node 0 joined to 1, 2, 3, which all meet again at node 4.
pub fn figure2_graph() -> InducedGraph {
    InducedGraph::from_adjacency(vec![
        vec![1, 2, 3],
        vec![0, 4],
        vec![0, 4],
        vec![0, 4],
        vec![1, 2, 3],
    ])
}

fn default_example3_n() -> usize {
    13
}
fn default_example3_range() -> (f64, f64) {
    (-1.2, -0.2)
}
fn default_example4_n() -> usize {
    1000
}
fn default_example4_degree() -> f64 {
    7.772
}
fn default_positive_probability() -> f64 {
    0.8
}
fn default_row_sum() -> f64 {
    0.4
}

/// Instance recipe for [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Random tree with strictly dominant rows.
    Tree {
        n: usize,
    },
    /// Single cycle through all `n` nodes.
    SingleLoop {
        n: usize,
    },
    Example1,
    Example2,
    /// `a_ii = |N_i|`, off-diagonals uniform in `off_range` on the fixed
    /// [`loopy_ring_edges`] topology.
    Example3Style {
        #[serde(default = "default_example3_n")]
        n: usize,
        #[serde(default = "default_example3_range")]
        off_range: (f64, f64),
    },
    /// `a_ii = 1`, signed off-diagonals, rescaled to a target mean absolute
    /// off-diagonal row sum.
    Example4Style {
        #[serde(default = "default_example4_n")]
        n: usize,
        #[serde(default = "default_example4_degree")]
        mean_degree: f64,
        #[serde(default = "default_positive_probability")]
        positive_probability: f64,
        #[serde(default = "default_row_sum")]
        mean_row_sum: f64,
    },
    /// Weakly dominant under a random scaling with at least one `ϱ_i ≥ 1`.
    WeaklyDominant {
        n: usize,
    },
}

impl GeneratorSpec {
    pub fn example3_style(n: usize) -> Self {
        GeneratorSpec::Example3Style {
            n,
            off_range: default_example3_range(),
        }
    }

    pub fn example4_style(n: usize) -> Self {
        GeneratorSpec::Example4Style {
            n,
            mean_degree: default_example4_degree(),
            positive_probability: default_positive_probability(),
            mean_row_sum: default_row_sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match *self {
            GeneratorSpec::Tree { n: 0 } => bad("tree needs n ≥ 1"),
            GeneratorSpec::SingleLoop { n } if n < 3 => bad("single loop needs n ≥ 3"),
            GeneratorSpec::WeaklyDominant { n } if n < 2 => bad("weakly_dominant needs n ≥ 2"),
            GeneratorSpec::Example3Style {
                n,
                off_range: (lo, hi),
            } => {
                if n < 3 {
                    bad("example3_style needs n ≥ 3")
                } else if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    bad("example3_style off_range must be a finite interval (lo < hi)")
                } else {
                    Ok(())
                }
            }
            GeneratorSpec::Example4Style {
                n,
                mean_degree,
                positive_probability,
                mean_row_sum,
            } => {
                if n < 2 || !(mean_degree > 0.0) {
                    bad("example4_style needs n ≥ 2 and a positive mean degree")
                } else if !(0.0..=1.0).contains(&positive_probability) {
                    bad("positive_probability must lie in [0, 1]")
                } else if !(mean_row_sum > 0.0) {
                    bad("mean_row_sum must be positive")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Builds an instance from `spec`, deterministic in `seed`.
///
/// Random kinds are redrawn until the instance is weakly dominant under the
/// identity scaling or certified generalised dominant (`ρ < 1`), for at most
/// [`MAX_ATTEMPTS`] draws.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<SparseSystem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<SparseSystem> {
        match *spec {
            GeneratorSpec::Example1 => Ok(example1()),
            GeneratorSpec::Example2 => Ok(example2()),
            GeneratorSpec::Tree { n } => random_tree_system(rng, n),
            GeneratorSpec::SingleLoop { n } => single_loop_system(rng, n),
            GeneratorSpec::Example3Style { n, off_range } => {
                example3_style_system(rng, n, off_range)
            }
            GeneratorSpec::Example4Style {
                n,
                mean_degree,
                positive_probability,
                mean_row_sum,
            } => example4_style_system(rng, n, mean_degree, positive_probability, mean_row_sum),
            GeneratorSpec::WeaklyDominant { n } => {
                random_weakly_dominant(rng, n, true).map(|(sys, _)| sys)
            }
        }
    };
    for _ in 0..MAX_ATTEMPTS {
        let sys = draw(&mut rng)?;
        if acceptable(&sys)? {
            return Ok(sys);
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_ATTEMPTS,
    })
}

fn acceptable(sys: &SparseSystem) -> Result<bool> {
    let g = build_induced_graph(sys);
    let rho = varrho(sys, &Scaling::identity(sys.n()))?;
    if is_weakly_dominant(&g, &rho) {
        return Ok(true);
    }
    Ok(spectral_certificate(sys)?.certifies_generalized_dd())
}

/// Random connected graph: a random spanning tree plus uniformly drawn extra
/// edges up to `round(mean_degree · n / 2)` edges in total.
pub fn random_connected_edges<R: Rng>(
    rng: &mut R,
    n: usize,
    mean_degree: f64,
) -> Vec<(usize, usize)> {
    let max_edges = n * n.saturating_sub(1) / 2;
    let target = ((mean_degree * n as f64 / 2.0).round() as usize)
        .max(n.saturating_sub(1))
        .min(max_edges);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut present = std::collections::HashSet::with_capacity(target);
    let mut edges = Vec::with_capacity(target);
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        let e = (parent.min(order[k]), parent.max(order[k]));
        present.insert(e);
        edges.push(e);
    }
    while edges.len() < target {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let e = (i.min(j), i.max(j));
        if present.insert(e) {
            edges.push(e);
        }
    }
    edges
}

/// Ring `i - (i+1) mod n` plus chords `i - (i+3)` for even `i < n - 3`.
/// For `n = 13` this has 18 edges and six independent loops.
pub fn loopy_ring_edges(n: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            (i.min(j), i.max(j))
        })
        .collect();
    edges.extend((0..n.saturating_sub(3)).step_by(2).map(|i| (i, i + 3)));
    edges.sort_unstable();
    edges.dedup();
    edges
}

fn random_tree_edges<R: Rng>(rng: &mut R, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|k| (rng.gen_range(0..k), k)).collect()
}

fn signed<R: Rng>(rng: &mut R, lo: f64, hi: f64, positive_probability: f64) -> f64 {
    let v = rng.gen_range(lo..hi);
    if rng.gen_bool(positive_probability) {
        v
    } else {
        -v
    }
}

/// Off-diagonals on both orientations of every edge, then diagonals chosen so
/// row `i` has `ϱ_i = target[i]` under `d`.
fn assemble<R: Rng>(
    rng: &mut R,
    n: usize,
    edges: &[(usize, usize)],
    d: &[f64],
    target: &[f64],
) -> Result<SparseSystem> {
    let mut triplets = Vec::with_capacity(2 * edges.len() + n);
    let mut mass = vec![0.0; n];
    for &(i, j) in edges {
        for (r, c) in [(i, j), (j, i)] {
            let v = signed(rng, 0.1, 1.0, 0.5);
            mass[r] += v.abs() * d[c];
            triplets.push((r, c, v));
        }
    }
    for i in 0..n {
        let diag = if mass[i] > 0.0 {
            mass[i] / (target[i] * d[i])
        } else {
            1.0
        };
        triplets.push((i, i, diag));
    }
    SparseSystem::new(n, triplets, index_rhs(n))
}

fn random_tree_system<R: Rng>(rng: &mut R, n: usize) -> Result<SparseSystem> {
    let edges = random_tree_edges(rng, n);
    let target: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..0.95)).collect();
    assemble(rng, n, &edges, &vec![1.0; n], &target)
}

fn single_loop_system<R: Rng>(rng: &mut R, n: usize) -> Result<SparseSystem> {
    let edges: Vec<(usize, usize)> = (0..n)
        .map(|i| (i.min((i + 1) % n), i.max((i + 1) % n)))
        .collect();
    let target: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..0.99)).collect();
    assemble(rng, n, &edges, &vec![1.0; n], &target)
}

fn example3_style_system<R: Rng>(
    rng: &mut R,
    n: usize,
    (lo, hi): (f64, f64),
) -> Result<SparseSystem> {
    let edges = loopy_ring_edges(n);
    let mut degree = vec![0usize; n];
    let mut triplets = Vec::with_capacity(2 * edges.len() + n);
    for &(i, j) in &edges {
        degree[i] += 1;
        degree[j] += 1;
        triplets.push((i, j, rng.gen_range(lo..hi)));
        triplets.push((j, i, rng.gen_range(lo..hi)));
    }
    triplets.extend((0..n).map(|i| (i, i, degree[i] as f64)));
    SparseSystem::new(n, triplets, index_rhs(n))
}

fn example4_style_system<R: Rng>(
    rng: &mut R,
    n: usize,
    mean_degree: f64,
    positive_probability: f64,
    mean_row_sum: f64,
) -> Result<SparseSystem> {
    let edges = random_connected_edges(rng, n, mean_degree);
    let mut off = Vec::with_capacity(2 * edges.len());
    for &(i, j) in &edges {
        off.push((i, j, signed(rng, 0.0, 1.0, positive_probability)));
        off.push((j, i, signed(rng, 0.0, 1.0, positive_probability)));
    }
    let total: f64 = off.iter().map(|t| t.2.abs()).sum();
    let scale = mean_row_sum * n as f64 / total;
    let triplets = off
        .into_iter()
        .map(|(i, j, v)| (i, j, v * scale))
        .chain((0..n).map(|i| (i, i, 1.0)));
    SparseSystem::new(n, triplets, index_rhs(n))
}

/// Random connected system that is weakly dominant under the returned
/// scaling `d`.
///
/// An independent set `U` receives `ϱ_i ∈ [1, 1.6)`; every other node gets
/// `ϱ_i < 0.97 / max_{j ∈ N_i ∩ U} ϱ_j`, so `ϱ_i ϱ_j < 1` on every edge. With
/// `require_nonempty_u` the set `U` is never empty, i.e. the system is not
/// dominant under `d` itself.
pub fn random_weakly_dominant<R: Rng>(
    rng: &mut R,
    n: usize,
    require_nonempty_u: bool,
) -> Result<(SparseSystem, Scaling)> {
    if n < 2 {
        return Err(Error::InvalidConfig(
            "weakly dominant instance needs n ≥ 2".into(),
        ));
    }
    let mean_degree = rng.gen_range(2.0..4.0f64).min((n - 1) as f64);
    let edges = random_connected_edges(rng, n, mean_degree);
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j) in &edges {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }

    let mut in_u = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let share = rng.gen_range(0.1..0.5);
    for (k, &i) in order.iter().enumerate() {
        let wanted = (require_nonempty_u && k == 0) || rng.gen_bool(share);
        if wanted && adjacency[i].iter().all(|&j| !in_u[j]) {
            in_u[i] = true;
        }
    }

    let mut target = vec![0.0; n];
    for i in 0..n {
        if in_u[i] {
            target[i] = rng.gen_range(1.0..1.6);
        }
    }
    for i in 0..n {
        if !in_u[i] {
            let worst = adjacency[i]
                .iter()
                .filter(|&&j| in_u[j])
                .map(|&j| target[j])
                .fold(1.0, f64::max);
            let cap = 0.97 / worst;
            target[i] = rng.gen_range(0.05 * cap..cap);
        }
    }
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let sys = assemble(rng, n, &edges, &d, &target)?;
    Ok((sys, Scaling::new(d)?))
}

/// Seeded convenience wrapper around [`random_weakly_dominant`].
pub fn seeded_weakly_dominant(
    seed: u64,
    n: usize,
    require_nonempty_u: bool,
) -> Result<(SparseSystem, Scaling)> {
    random_weakly_dominant(&mut ChaCha8Rng::seed_from_u64(seed), n, require_nonempty_u)
}
