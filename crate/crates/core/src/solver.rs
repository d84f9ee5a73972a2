//! Synchronous message-passing solver and the Jacobi baseline.
//!
//! Every directed edge `i -> j` of the induced graph carries a message pair
//! `(a_{i->j}, b_{i->j})`. A round reads only the previous round's messages,
//! so the per-node updates are order independent.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::system::{max_norm, InducedGraph, Scaling, Solution, SparseSystem};

/// Relative guard on message and node denominators.
pub const DIVISOR_GUARD: f64 = 1e-12;

/// Default successive-difference stopping tolerance.
pub const DEFAULT_STOP_TOL: f64 = 1e-12;

/// Where a denominator collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureSite {
    /// `|a_{from->to}|` fell below the guard.
    Message { from: usize, to: usize, value: f64 },
    /// `|a_node|` fell below the guard.
    Node { node: usize, value: f64 },
}

impl fmt::Display for FailureSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureSite::Message { from, to, value } => {
                write!(f, "message a[{from}->{to}] = {value:e}")
            }
            FailureSite::Node { node, value } => write!(f, "node a[{node}] = {value:e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error, Serialize)]
#[error("numerical failure in round {round}: {site} is below the divisor guard")]
pub struct NumericalFailure {
    pub round: usize,
    pub site: FailureSite,
}

/// All messages and node quantities after one round.
///
/// `a_msg` and `b_msg` are indexed by the directed-edge index of the
/// [`InducedGraph`] the state was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub round: usize,
    pub a_msg: Vec<f64>,
    pub b_msg: Vec<f64>,
    pub a_node: Vec<f64>,
    pub b_node: Vec<f64>,
    pub x_est: Vec<f64>,
    /// Message pairs emitted in this round.
    pub messages_sent: usize,
}

impl MessageState {
    pub fn a_message(&self, g: &InducedGraph, from: usize, to: usize) -> Option<f64> {
        g.edge_index(from, to).map(|e| self.a_msg[e])
    }

    pub fn b_message(&self, g: &InducedGraph, from: usize, to: usize) -> Option<f64> {
        g.edge_index(from, to).map(|e| self.b_msg[e])
    }
}

fn check_positive_diagonal(sys: &SparseSystem) -> Result<()> {
    match sys.diagonal().iter().position(|&v| !(v > 0.0)) {
        Some(node) => Err(Error::NonPositiveDiagonal {
            node,
            value: sys.diag(node),
        }),
        None => Ok(()),
    }
}

/// Round-0 state: `a_{i->j} = a_ii`, `b_{i->j} = b_i`, `x_i = b_i / a_ii`.
pub fn init_messages(sys: &SparseSystem, g: &InducedGraph) -> Result<MessageState> {
    check_positive_diagonal(sys)?;
    let m = g.directed_edge_count();
    let mut a_msg = Vec::with_capacity(m);
    let mut b_msg = Vec::with_capacity(m);
    for e in 0..m {
        let i = g.source(e);
        a_msg.push(sys.diag(i));
        b_msg.push(sys.rhs()[i]);
    }
    Ok(MessageState {
        round: 0,
        a_msg,
        b_msg,
        a_node: sys.diagonal().to_vec(),
        b_node: sys.rhs().to_vec(),
        x_est: sys
            .rhs()
            .iter()
            .zip(sys.diagonal())
            .map(|(b, a)| b / a)
            .collect(),
        messages_sent: m,
    })
}

/// One synchronous round of the message-passing update.
pub fn step(
    sys: &SparseSystem,
    g: &InducedGraph,
    prev: &MessageState,
) -> std::result::Result<MessageState, NumericalFailure> {
    let n = sys.n();
    let round = prev.round + 1;
    let m = g.directed_edge_count();
    let mut next = MessageState {
        round,
        a_msg: vec![0.0; m],
        b_msg: vec![0.0; m],
        a_node: vec![0.0; n],
        b_node: vec![0.0; n],
        x_est: vec![0.0; n],
        messages_sent: 0,
    };

    for i in 0..n {
        let a_ii = sys.diag(i);
        let mut a_i = a_ii;
        let mut b_i = sys.rhs()[i];
        for e in g.out_edges(i) {
            let v = g.target(e);
            let incoming = g.reverse(e);
            let divisor = prev.a_msg[incoming];
            if !(divisor.abs() >= DIVISOR_GUARD * sys.diag(v).abs()) {
                return Err(NumericalFailure {
                    round,
                    site: FailureSite::Message {
                        from: v,
                        to: i,
                        value: divisor,
                    },
                });
            }
            let a_iv = sys.coeff(i, v);
            a_i -= sys.coeff(v, i) * a_iv / divisor;
            b_i -= a_iv * prev.b_msg[incoming] / divisor;
        }
        if !(a_i.abs() >= DIVISOR_GUARD * a_ii.abs()) {
            return Err(NumericalFailure {
                round,
                site: FailureSite::Node {
                    node: i,
                    value: a_i,
                },
            });
        }
        next.a_node[i] = a_i;
        next.b_node[i] = b_i;
        next.x_est[i] = b_i / a_i;

        for e in g.out_edges(i) {
            let j = g.target(e);
            let incoming = g.reverse(e);
            let a_ij = sys.coeff(i, j);
            let divisor = prev.a_msg[incoming];
            next.a_msg[e] = a_i + sys.coeff(j, i) * a_ij / divisor;
            next.b_msg[e] = b_i + a_ij * prev.b_msg[incoming] / divisor;
            next.messages_sent += 1;
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    MaxRounds,
    /// Successive estimates differed by less than the stopping tolerance.
    Converged {
        round: usize,
    },
    NumericalFailure(NumericalFailure),
}

/// Per-round estimates of an iterative run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `estimates[k]` is `x^(k)`, starting at round 0.
    pub estimates: Vec<Vec<f64>>,
    /// `(1/n) Σ_i (x_i^(k) - x*_i)^2` per round, when an oracle was supplied.
    pub mse: Option<Vec<f64>>,
    /// `||x*||_∞` of the oracle, when supplied.
    pub oracle_norm: Option<f64>,
    pub rounds_executed: usize,
    pub termination: Termination,
}

impl Trajectory {
    pub fn final_estimate(&self) -> &[f64] {
        self.estimates.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// `|x_i^(k) - x*_i|` for every recorded round.
    pub fn abs_errors(&self, oracle: &Solution) -> Vec<Vec<f64>> {
        self.estimates
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&oracle.x)
                    .map(|(a, b)| (a - b).abs())
                    .collect()
            })
            .collect()
    }
}

fn mean_squared_error(x: &[f64], oracle: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter()
        .zip(oracle)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64
}

fn successive_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct Recorder<'a> {
    oracle: Option<&'a Solution>,
    estimates: Vec<Vec<f64>>,
    mse: Vec<f64>,
}

impl<'a> Recorder<'a> {
    fn new(n: usize, oracle: Option<&'a Solution>) -> Result<Self> {
        if let Some(o) = oracle {
            if o.x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: o.x.len(),
                });
            }
        }
        Ok(Self {
            oracle,
            estimates: Vec::new(),
            mse: Vec::new(),
        })
    }

    fn push(&mut self, x: Vec<f64>) {
        if let Some(o) = self.oracle {
            self.mse.push(mean_squared_error(&x, &o.x));
        }
        self.estimates.push(x);
    }

    fn finish(self, termination: Termination) -> Trajectory {
        Trajectory {
            rounds_executed: self.estimates.len().saturating_sub(1),
            oracle_norm: self.oracle.map(|o| max_norm(&o.x)),
            mse: self.oracle.map(|_| self.mse),
            estimates: self.estimates,
            termination,
        }
    }
}

fn check_rounds(max_rounds: usize) -> Result<()> {
    if max_rounds == 0 {
        return Err(Error::InvalidConfig("max_rounds must be at least 1".into()));
    }
    Ok(())
}

/// Runs the message-passing solver for up to `max_rounds` rounds.
///
/// Stops early once `max_i |x_i^(k) - x_i^(k-1)| < stop_tol` (a non-positive
/// `stop_tol` disables the check). A collapsed denominator ends the run with
/// [`Termination::NumericalFailure`] and keeps the rounds recorded so far.
pub fn run(
    sys: &SparseSystem,
    g: &InducedGraph,
    max_rounds: usize,
    stop_tol: f64,
    oracle: Option<&Solution>,
) -> Result<Trajectory> {
    check_rounds(max_rounds)?;
    let mut rec = Recorder::new(sys.n(), oracle)?;
    let mut state = init_messages(sys, g)?;
    rec.push(state.x_est.clone());

    for _ in 0..max_rounds {
        let next = match step(sys, g, &state) {
            Ok(next) => next,
            Err(failure) => return Ok(rec.finish(Termination::NumericalFailure(failure))),
        };
        let diff = successive_difference(&next.x_est, &state.x_est);
        rec.push(next.x_est.clone());
        state = next;
        if stop_tol > 0.0 && diff < stop_tol {
            return Ok(rec.finish(Termination::Converged { round: state.round }));
        }
    }
    Ok(rec.finish(Termination::MaxRounds))
}

/// Jacobi iteration `x^(k+1) = A_d^{-1} (b - (A - A_d) x^(k))` from
/// `x^(0) = A_d^{-1} b`.
pub fn jacobi_run(
    sys: &SparseSystem,
    max_rounds: usize,
    stop_tol: f64,
    oracle: Option<&Solution>,
) -> Result<Trajectory> {
    check_rounds(max_rounds)?;
    if let Some(node) = sys.diagonal().iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroDiagonal { node });
    }
    let n = sys.n();
    let mut rec = Recorder::new(n, oracle)?;
    let mut x: Vec<f64> = (0..n).map(|i| sys.rhs()[i] / sys.diag(i)).collect();
    rec.push(x.clone());

    for round in 1..=max_rounds {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let off: f64 = sys.off_diagonal(i).iter().map(|&(j, v)| v * x[j]).sum();
                (sys.rhs()[i] - off) / sys.diag(i)
            })
            .collect();
        let diff = successive_difference(&next, &x);
        rec.push(next.clone());
        x = next;
        if stop_tol > 0.0 && diff < stop_tol {
            return Ok(rec.finish(Termination::Converged { round }));
        }
    }
    Ok(rec.finish(Termination::MaxRounds))
}

/// `Ã = D^{-1} A D`, `b̃ = D^{-1} b`. The diagonal is carried over unchanged.
pub fn transform_system(sys: &SparseSystem, d: &Scaling) -> Result<SparseSystem> {
    d.check_len(sys.n())?;
    let d = d.as_slice();
    let entries = sys.entries().map(|(i, j, v)| {
        if i == j {
            (i, j, v)
        } else {
            (i, j, v * d[j] / d[i])
        }
    });
    let b = sys.rhs().iter().zip(d).map(|(b, s)| b / s).collect();
    SparseSystem::new(sys.n(), entries, b)
}
