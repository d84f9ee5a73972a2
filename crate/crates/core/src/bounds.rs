//! Convergence-rate bounds for the message-passing solver.
//!
//! * [`theorem1_bound`]: the per-node bound driven by the `Λ`/`η` edge
//!   recursion over the computation tree.
//! * [`rho_bound`]: the spectral bound `u_i ρ^(k+1) ||x*||_u`.
//! * [`enumerate_simple_loops`]: loop gains and the maximum loop gain per node `λ★`.
//! * [`estimate_asymptotic_rate`]: slope fit of the log mean-squared error.

use std::ops::ControlFlow;
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::dominance::{is_weakly_dominant, spectral_certificate, varrho};
use crate::error::{Error, Result};
use crate::solver::{init_messages, step, Trajectory};
use crate::system::{
    build_induced_graph, direct_solve, scaled_max_norm, InducedGraph, Scaling, SparseSystem,
};

pub const DEFAULT_MAX_LOOPS: usize = 1_000_000;

/// DFS expansions allowed per requested loop before enumeration is cut off.
const EXPANSIONS_PER_LOOP: usize = 64;

/// `Λ` and `η` for every directed edge at one level of the recursion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundState {
    pub level: usize,
    /// `Λ_{i->j}`, indexed by directed edge.
    pub lambda_edge: Vec<f64>,
    /// `η_{i->j}`, indexed by directed edge.
    pub eta_edge: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Bound {
    pub varrho: Vec<f64>,
    pub scaling: Scaling,
    /// `||x*||_d`.
    pub x_star_norm: f64,
    /// `table[k - 1][i]` bounds `|x_i^(k) - x*_i|` for `k = 1..=K`.
    pub table: Vec<Vec<f64>>,
    /// Recursion levels `ℓ = 0..K-1`.
    pub levels: Vec<BoundState>,
}

impl Theorem1Bound {
    /// Bound on `|x_i^(k) - x*_i|`, `k ≥ 1`.
    pub fn bound(&self, i: usize, k: usize) -> f64 {
        self.table[k - 1][i]
    }

    pub fn rounds(&self) -> usize {
        self.table.len()
    }
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-node, per-round error bound from the `Λ`/`η` recursion.
///
/// Requires `ϱ_i ϱ_j < 1` on every edge under `d`. The returned entries are
/// absolute error bounds: `|x_i^(k) - x*_i| ≤ d_i ϱ_i (Σ Λη / Σ Λ) ||x*||_d`.
pub fn theorem1_bound(
    sys: &SparseSystem,
    g: &InducedGraph,
    d: &Scaling,
    rounds: usize,
) -> Result<Theorem1Bound> {
    if rounds == 0 {
        return Err(Error::InvalidConfig(
            "bound horizon must be at least 1".into(),
        ));
    }
    let rho = varrho(sys, d)?;
    if !is_weakly_dominant(g, &rho) {
        return Err(Error::NotWeaklyDominant);
    }
    let oracle = direct_solve(sys)?;
    let x_star_norm = scaled_max_norm(&oracle.x, d);
    let ds = d.as_slice();
    let n = sys.n();
    let m = g.directed_edge_count();

    let mut messages = init_messages(sys, g)?;
    let mut levels: Vec<BoundState> = Vec::with_capacity(rounds);
    let mut table = Vec::with_capacity(rounds);

    for level in 0..rounds {
        let mut lambda_edge = vec![0.0; m];
        for (e, slot) in lambda_edge.iter_mut().enumerate() {
            let (i, j) = (g.source(e), g.target(e));
            let a_ji = sys.coeff(j, i);
            let a_ij = sys.coeff(i, j);
            let value = a_ji.abs() * ds[i] - a_ji * a_ij * ds[j] * rho[j] / messages.a_msg[e];
            if a_ji != 0.0 && !(value > 0.0) {
                return Err(Error::NonPositiveLambda {
                    from: i,
                    to: j,
                    level,
                    value,
                });
            }
            *slot = value;
        }

        let eta_edge = match levels.last() {
            None => (0..m).map(|e| rho[g.source(e)]).collect(),
            Some(prev) => (0..m)
                .map(|e| {
                    let (i, j) = (g.source(e), g.target(e));
                    let mut weighted = 0.0;
                    let mut mass = 0.0;
                    for out in g.out_edges(i) {
                        if g.target(out) == j {
                            continue;
                        }
                        let incoming = g.reverse(out);
                        weighted += prev.lambda_edge[incoming] * prev.eta_edge[incoming];
                        mass += prev.lambda_edge[incoming];
                    }
                    let slack = sys.coeff(i, j).abs() * ds[j] * (1.0 - rho[i] * rho[j]);
                    rho[i] * ratio_or_zero(weighted, slack + mass)
                })
                .collect(),
        };
        let state = BoundState {
            level,
            lambda_edge,
            eta_edge,
        };

        // bound for round k = level + 1 uses level-ℓ quantities
        let row: Vec<f64> = (0..n)
            .map(|i| {
                let mut weighted = 0.0;
                let mut mass = 0.0;
                for out in g.out_edges(i) {
                    let incoming = g.reverse(out);
                    weighted += state.lambda_edge[incoming] * state.eta_edge[incoming];
                    mass += state.lambda_edge[incoming];
                }
                ds[i] * rho[i] * ratio_or_zero(weighted, mass) * x_star_norm
            })
            .collect();
        table.push(row);
        levels.push(state);

        if level + 1 < rounds {
            messages = step(sys, g, &messages)?;
        }
    }

    Ok(Theorem1Bound {
        varrho: rho,
        scaling: d.clone(),
        x_star_norm,
        table,
        levels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoBound {
    pub rho: f64,
    pub u: Vec<f64>,
    /// `||x*||_u`.
    pub x_star_norm: f64,
    /// `table[k][i] = u_i ρ^(k+1) ||x*||_u` for `k = 0..=K`.
    pub table: Vec<Vec<f64>>,
}

/// Spectral bound `|x_i^(k) - x*_i| ≤ u_i ρ^(k+1) ||x*||_u`.
pub fn rho_bound(sys: &SparseSystem, rounds: usize) -> Result<RhoBound> {
    let cert = spectral_certificate(sys)?;
    if !cert.certifies_generalized_dd() {
        return Err(Error::NotGeneralizedDD { rho: cert.rho });
    }
    let oracle = direct_solve(sys)?;
    let x_star_norm = scaled_max_norm(&oracle.x, &cert.scaling());
    let table = (0..=rounds)
        .map(|k| {
            let factor = cert.rho.powi(k as i32 + 1) * x_star_norm;
            cert.u.iter().map(|u| u * factor).collect()
        })
        .collect();
    Ok(RhoBound {
        rho: cert.rho,
        u: cert.u,
        x_star_norm,
        table,
    })
}

/// Simple loops of the induced graph and their gains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopGainReport {
    /// Node sequences `i_0, …, i_{k-1}`; the loop closes back to `i_0`.
    pub loops: Vec<Vec<usize>>,
    /// `g(p) = Π ϱ` over the loop's nodes.
    pub gains: Vec<f64>,
    /// `λ(p) = g(p)^(1/k)`.
    pub per_node_gains: Vec<f64>,
    /// Largest `λ(p)`; 0 when there are no loops.
    pub lambda_star: f64,
    pub truncated: bool,
    pub acyclic: bool,
}

/// Loop statistics without the loop list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopGainSummary {
    pub loop_count: usize,
    pub lambda_star: f64,
    pub truncated: bool,
    pub acyclic: bool,
}

fn loop_gain(varrho: &[f64], cycle: &[usize]) -> (f64, f64) {
    let gain: f64 = cycle.iter().map(|&i| varrho[i]).product();
    let per_node = if gain > 0.0 {
        (cycle.iter().map(|&i| varrho[i].ln()).sum::<f64>() / cycle.len() as f64).exp()
    } else {
        0.0
    };
    (gain, per_node)
}

/// Visits each simple cycle (length ≥ 3) once, rotated to start at its
/// smallest node and oriented so the second node is smaller than the last.
/// Returns `false` if enumeration stopped early.
pub fn visit_simple_loops<F>(g: &InducedGraph, max_loops: usize, mut visit: F) -> bool
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let n = g.n();
    let budget = max_loops.saturating_mul(EXPANSIONS_PER_LOOP).max(1_000_000);
    let mut expansions = 0usize;
    let mut found = 0usize;
    let mut on_path = vec![false; n];
    let mut path: Vec<usize> = Vec::new();
    // (node, position in its neighbour list)
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for s in 0..n {
        if g.neighbors(s).iter().filter(|&&v| v > s).count() < 2 {
            continue;
        }
        path.push(s);
        on_path[s] = true;
        stack.push((s, 0));
        while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
            let nbrs = g.neighbors(v);
            if *pos == nbrs.len() {
                stack.pop();
                path.pop();
                on_path[v] = false;
                continue;
            }
            let w = nbrs[*pos];
            *pos += 1;
            if w == s {
                if path.len() >= 3 && path[1] < v {
                    if found == max_loops {
                        return false;
                    }
                    found += 1;
                    if visit(&path).is_break() {
                        return false;
                    }
                }
            } else if w > s && !on_path[w] {
                expansions += 1;
                if expansions > budget {
                    return false;
                }
                on_path[w] = true;
                path.push(w);
                stack.push((w, 0));
            }
        }
    }
    true
}

/// Enumerates simple loops with their gains. Stops after `max_loops` loops and
/// sets `truncated`, in which case `lambda_star` is a lower bound.
pub fn enumerate_simple_loops(
    g: &InducedGraph,
    varrho: &[f64],
    max_loops: usize,
) -> LoopGainReport {
    let mut loops = Vec::new();
    let mut gains = Vec::new();
    let mut per_node_gains = Vec::new();
    let complete = visit_simple_loops(g, max_loops, |cycle| {
        let (gain, per_node) = loop_gain(varrho, cycle);
        loops.push(cycle.to_vec());
        gains.push(gain);
        per_node_gains.push(per_node);
        ControlFlow::Continue(())
    });
    let lambda_star = per_node_gains.iter().copied().fold(0.0, f64::max);
    LoopGainReport {
        acyclic: complete && loops.is_empty(),
        loops,
        gains,
        per_node_gains,
        lambda_star,
        truncated: !complete,
    }
}

/// Same as [`enumerate_simple_loops`] but keeps only the running maximum.
pub fn loop_gain_summary(g: &InducedGraph, varrho: &[f64], max_loops: usize) -> LoopGainSummary {
    let mut loop_count = 0;
    let mut lambda_star: f64 = 0.0;
    let complete = visit_simple_loops(g, max_loops, |cycle| {
        loop_count += 1;
        lambda_star = lambda_star.max(loop_gain(varrho, cycle).1);
        ControlFlow::Continue(())
    });
    LoopGainSummary {
        loop_count,
        lambda_star,
        truncated: !complete,
        acyclic: complete && loop_count == 0,
    }
}

/// `λ★` under the Perron scaling `D = diag(u)`, where every `ϱ_i` equals `ρ`.
pub fn lambda_star_at_perron(sys: &SparseSystem) -> Result<f64> {
    let cert = spectral_certificate(sys)?;
    if !cert.certifies_generalized_dd() {
        return Err(Error::NotGeneralizedDD { rho: cert.rho });
    }
    let rho = varrho(sys, &cert.scaling())?;
    let g = build_induced_graph(sys);
    Ok(loop_gain_summary(&g, &rho, DEFAULT_MAX_LOOPS).lambda_star)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    /// Per-round slope of `log10((1/n) ||x^(k) - x*||²)`.
    pub slope: f64,
    /// `10^(slope / 2)`.
    pub rate: f64,
    /// First and last round used in the fit.
    pub fit_window: (usize, usize),
    pub points: usize,
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Fits the slope of `log10(mse[k])` over `window`, or over the last half of
/// the recorded rounds when `window` is `None`. The default window skips
/// rounds whose mean-squared error is below `floor`.
pub fn fit_rate(
    mse: &[f64],
    window: Option<RangeInclusive<usize>>,
    floor: f64,
) -> Result<RateEstimate> {
    if mse.is_empty() {
        return Err(Error::DegenerateFit("no rounds recorded".into()));
    }
    let last = mse.len() - 1;
    let points: Vec<(f64, f64)> = match window {
        Some(w) => {
            if w.start() > w.end() || *w.end() > last {
                return Err(Error::InvalidConfig(format!(
                    "fit window {}..={} outside recorded rounds 0..={last}",
                    w.start(),
                    w.end()
                )));
            }
            if let Some(k) = w.clone().find(|&k| !(mse[k] > 0.0)) {
                return Err(Error::DegenerateFit(format!(
                    "error is exactly zero at round {k} (exact convergence)"
                )));
            }
            w.map(|k| (k as f64, mse[k].log10())).collect()
        }
        None => (last / 2..=last)
            .filter(|&k| mse[k] > floor)
            .map(|k| (k as f64, mse[k].log10()))
            .collect(),
    };
    if points.len() < 2 {
        return Err(Error::DegenerateFit(
            "fewer than two usable rounds (error at the floating-point floor or exact convergence)"
                .into(),
        ));
    }
    let slope = least_squares_slope(&points);
    Ok(RateEstimate {
        slope,
        rate: 10f64.powf(slope / 2.0),
        fit_window: (points[0].0 as usize, points[points.len() - 1].0 as usize),
        points: points.len(),
    })
}

/// Empirical asymptotic rate of a trajectory recorded against an oracle.
pub fn estimate_asymptotic_rate(
    traj: &Trajectory,
    window: Option<RangeInclusive<usize>>,
) -> Result<RateEstimate> {
    let mse = traj
        .mse
        .as_ref()
        .ok_or_else(|| Error::DegenerateFit("trajectory has no oracle errors".into()))?;
    let scale = 1e2 * f64::EPSILON * traj.oracle_norm.unwrap_or(1.0);
    fit_rate(mse, window, scale * scale)
}
