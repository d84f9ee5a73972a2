//! Problem representation: the sparse system `Ax = b`, its induced graph,
//! diagonal scalings and a dense direct-solve oracle.

use std::collections::{BTreeMap, VecDeque};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square sparse matrix `A` with an explicitly stored diagonal, plus the
/// right-hand side `b`.
///
/// Off-diagonal entries that are exactly zero are treated as structural
/// absence and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    n: usize,
    diag: Vec<f64>,
    // per-row off-diagonal entries sorted by column
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
}

impl SparseSystem {
    /// Builds a system from zero-based `(row, col, value)` triplets.
    pub fn new<I>(n: usize, entries: I, b: Vec<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: b.len(),
            });
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem(format!("b[{i}] is not finite")));
        }
        let mut diag = vec![None; n];
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::InvalidSystem(format!(
                    "entry ({i}, {j}) out of range for n = {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidSystem(format!(
                    "entry ({i}, {j}) is not finite"
                )));
            }
            if i == j {
                if diag[i].replace(v).is_some() {
                    return Err(Error::InvalidSystem(format!("duplicate entry ({i}, {i})")));
                }
            } else if maps[i].insert(j, v).is_some() {
                return Err(Error::InvalidSystem(format!("duplicate entry ({i}, {j})")));
            }
        }
        let diag = diag
            .into_iter()
            .enumerate()
            .map(|(row, d)| d.ok_or(Error::MissingDiagonal { row }))
            .collect::<Result<Vec<_>>>()?;
        let rows = maps
            .into_iter()
            .map(|m| m.into_iter().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        Ok(Self { n, diag, rows, b })
    }

    /// Builds a system from a dense row-major matrix. Zero off-diagonal
    /// entries become structural zeros.
    pub fn from_dense(a: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        let n = a.len();
        let mut entries = Vec::new();
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if i == j || v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self::new(n, entries, b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal entries of row `i`, sorted by column.
    pub fn off_diagonal(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `a_ij`, zero when structurally absent.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// Same matrix with a different right-hand side.
    pub fn with_rhs(&self, b: Vec<f64>) -> Result<Self> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: b.len(),
            });
        }
        Ok(Self { b, ..self.clone() })
    }

    /// Number of stored entries, diagonal included.
    pub fn nnz(&self) -> usize {
        self.n + self.rows.iter().map(Vec::len).sum::<usize>()
    }

    /// All stored entries in row-major order (diagonal in its column slot).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let row = &self.rows[i];
            let split = row.partition_point(|&(c, _)| c < i);
            row[..split]
                .iter()
                .map(move |&(j, v)| (i, j, v))
                .chain(std::iter::once((i, i, self.diag[i])))
                .chain(row[split..].iter().map(move |&(j, v)| (i, j, v)))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.diag[i] * x[i] + self.rows[i].iter().map(|&(j, v)| v * x[j]).sum::<f64>())
            .collect()
    }

    /// `max_i |(Ax - b)_i|`.
    pub fn residual_max_norm(&self, x: &[f64]) -> f64 {
        let ax = self.mul_vec(x);
        ax.iter()
            .zip(&self.b)
            .map(|(l, r)| (l - r).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.entries() {
            a[i][j] = v;
        }
        a
    }
}

/// Undirected communication graph: `{i, j}` is an edge whenever
/// `a_ij != 0` or `a_ji != 0`.
///
/// Every undirected edge yields two directed edges, indexed contiguously by
/// source node so message arrays can be flat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedGraph {
    neighbors: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    sources: Vec<usize>,
    reverse: Vec<usize>,
}

impl InducedGraph {
    /// Builds a graph from undirected adjacency lists. Lists are sorted and
    /// symmetrised; self-loops are dropped.
    pub fn from_adjacency(mut neighbors: Vec<Vec<usize>>) -> Self {
        let n = neighbors.len();
        for i in 0..n {
            for k in 0..neighbors[i].len() {
                let j = neighbors[i][k];
                if j != i && !neighbors[j].contains(&i) {
                    neighbors[j].push(i);
                }
            }
        }
        for (i, list) in neighbors.iter_mut().enumerate() {
            list.retain(|&j| j != i);
            list.sort_unstable();
            list.dedup();
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut sources = Vec::new();
        offsets.push(0);
        for (i, list) in neighbors.iter().enumerate() {
            targets.extend_from_slice(list);
            sources.extend(std::iter::repeat_n(i, list.len()));
            offsets.push(targets.len());
        }
        let mut reverse = vec![0; targets.len()];
        for e in 0..targets.len() {
            let (i, j) = (sources[e], targets[e]);
            let pos = neighbors[j]
                .binary_search(&i)
                .expect("adjacency is symmetric");
            reverse[e] = offsets[j] + pos;
        }
        Self {
            neighbors,
            offsets,
            targets,
            sources,
            reverse,
        }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted neighbour set `N_i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Undirected edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n())
            .flat_map(|i| {
                self.neighbors[i]
                    .iter()
                    .filter(move |&&j| j > i)
                    .map(move |&j| (i, j))
            })
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn directed_edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Indices of the directed edges `i -> j` for `j` in `N_i`.
    pub fn out_edges(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn source(&self, e: usize) -> usize {
        self.sources[e]
    }

    pub fn target(&self, e: usize) -> usize {
        self.targets[e]
    }

    /// Index of the opposite directed edge.
    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e]
    }

    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.neighbors[from]
            .binary_search(&to)
            .ok()
            .map(|k| self.offsets[from] + k)
    }

    /// Connected components, each sorted ascending, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_acyclic(&self) -> bool {
        self.edge_count() + self.components().len() == self.n()
    }

    /// BFS distances from `s`; unreachable nodes get `None`.
    pub fn distances_from(&self, s: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        dist[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Largest distance between two connected nodes.
    pub fn diameter(&self) -> usize {
        (0..self.n())
            .map(|s| {
                self.distances_from(s)
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }
}

/// Builds the induced graph of `sys`. Neighbour sets are sorted ascending.
pub fn build_induced_graph(sys: &SparseSystem) -> InducedGraph {
    let mut neighbors = vec![Vec::new(); sys.n()];
    for i in 0..sys.n() {
        for &(j, _) in sys.off_diagonal(i) {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
    }
    InducedGraph::from_adjacency(neighbors)
}

/// Positive diagonal scaling `D = diag{d_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Scaling(Vec<f64>);

impl Scaling {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if let Some(i) = d.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidScaling(format!(
                "d[{i}] = {} is not positive and finite",
                d[i]
            )));
        }
        Ok(Self(d))
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// `c * D` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.0.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Scaling {
    type Error = Error;

    fn try_from(d: Vec<f64>) -> Result<Self> {
        Self::new(d)
    }
}

impl From<Scaling> for Vec<f64> {
    fn from(s: Scaling) -> Self {
        s.0
    }
}

/// Reference solution `x* = A^{-1} b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `max_i |(Ax - b)_i|` at construction.
    pub residual_norm: f64,
}

pub fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `||x||_d = max_v |x_v| / d_v`.
pub fn scaled_max_norm(x: &[f64], d: &Scaling) -> f64 {
    assert_eq!(x.len(), d.len(), "vector and scaling lengths differ");
    x.iter()
        .zip(d.as_slice())
        .fold(0.0, |m, (v, s)| m.max(v.abs() / s))
}

const PIVOT_TOL: f64 = 1e-14;

/// Dense Gaussian elimination with partial pivoting, followed by one round
/// of iterative refinement when the residual is above target.
pub fn direct_solve(sys: &SparseSystem) -> Result<Solution> {
    let n = sys.n();
    let mut lu = vec![0.0; n * n];
    for (i, j, v) in sys.entries() {
        lu[i * n + j] = v;
    }
    let row_scale: Vec<f64> = (0..n).map(|i| max_norm(&lu[i * n..(i + 1) * n])).collect();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let (p, pivot_abs) =
            (k..n)
                .map(|r| (r, lu[r * n + k].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot_abs < PIVOT_TOL * row_scale[perm[p]] || pivot_abs == 0.0 {
            return Err(Error::SingularMatrix { column: k });
        }
        if p != k {
            for c in 0..n {
                lu.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }
        let pivot = lu[k * n + k];
        let (upper, lower) = lu.split_at_mut((k + 1) * n);
        let pivot_row = &upper[k * n + k + 1..k * n + n];
        for r in 0..(n - k - 1) {
            let row = &mut lower[r * n..(r + 1) * n];
            let factor = row[k] / pivot;
            row[k] = factor;
            if factor != 0.0 {
                for (dst, &src) in row[k + 1..].iter_mut().zip(pivot_row) {
                    *dst -= factor * src;
                }
            }
        }
    }

    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| lu[i * n + j] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| lu[i * n + j] * y[j]).sum();
            y[i] = (y[i] - s) / lu[i * n + i];
        }
        y
    };

    let mut x = solve(sys.rhs());
    let target = 1e-10 * (1.0 + max_norm(sys.rhs()));
    let mut residual_norm = sys.residual_max_norm(&x);
    if residual_norm > target {
        let ax = sys.mul_vec(&x);
        let r: Vec<f64> = sys.rhs().iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = solve(&r);
        let refined: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let refined_norm = sys.residual_max_norm(&refined);
        if refined_norm < residual_norm {
            x = refined;
            residual_norm = refined_norm;
        }
    }
    Ok(Solution { x, residual_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> SparseSystem {
        SparseSystem::from_dense(&[vec![1.0, 0.5], vec![0.4, 1.0]], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn triangle_graph_for_single_loop_example() {
        let sys = crate::generate::example1();
        let g = build_induced_graph(&sys);
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[0, 1]);
        assert_eq!(g.edge_count(), 3);
        assert!(!g.is_acyclic());
    }

    #[test]
    fn identity_has_no_edges() {
        let sys = SparseSystem::new(4, (0..4).map(|i| (i, i, 1.0)), vec![0.0; 4]).unwrap();
        let g = build_induced_graph(&sys);
        assert_eq!(g.edge_count(), 0);
        assert!((0..4).all(|i| g.neighbors(i).is_empty()));
    }

    #[test]
    fn one_sided_entry_gives_symmetric_edge() {
        let sys =
            SparseSystem::from_dense(&[vec![1.0, 0.3], vec![0.0, 1.0]], vec![1.0, 1.0]).unwrap();
        let g = build_induced_graph(&sys);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        let e = g.edge_index(0, 1).unwrap();
        assert_eq!(g.reverse(e), g.edge_index(1, 0).unwrap());
    }

    #[test]
    fn explicit_zero_off_diagonal_is_dropped() {
        let sys =
            SparseSystem::new(2, [(0, 0, 1.0), (0, 1, 0.0), (1, 1, 2.0)], vec![0.0; 2]).unwrap();
        assert!(sys.off_diagonal(0).is_empty());
        assert_eq!(sys.nnz(), 2);
    }

    #[test]
    fn missing_diagonal_is_rejected() {
        let err = SparseSystem::new(2, [(0, 0, 1.0), (0, 1, 0.5)], vec![0.0; 2]).unwrap_err();
        assert!(matches!(err, Error::MissingDiagonal { row: 1 }));
    }

    #[test]
    fn duplicate_entry_is_rejected() {
        let err = SparseSystem::new(1, [(0, 0, 1.0), (0, 0, 1.0)], vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidSystem(_)));
    }

    #[test]
    fn entries_are_row_major() {
        let sys = crate::generate::example1();
        let cols: Vec<(usize, usize)> = sys.entries().map(|(i, j, _)| (i, j)).collect();
        let expected: Vec<(usize, usize)> =
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        assert_eq!(cols, expected);
    }

    #[test]
    fn direct_solve_identity() {
        let sys = SparseSystem::new(3, (0..3).map(|i| (i, i, 1.0)), vec![1.0, 2.0, 3.0]).unwrap();
        let sol = direct_solve(&sys).unwrap();
        assert_eq!(sol.x, vec![1.0, 2.0, 3.0]);
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn direct_solve_two_by_two_closed_form() {
        // det = 0.8, x = (1 - 0.5, 1 - 0.4) / 0.8
        let sol = direct_solve(&two_node()).unwrap();
        assert!((sol.x[0] - 0.625).abs() < 1e-15);
        assert!((sol.x[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn direct_solve_reports_singular() {
        let sys =
            SparseSystem::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            direct_solve(&sys),
            Err(Error::SingularMatrix { column: 1 })
        ));
    }

    #[test]
    fn direct_solve_example2_residual() {
        let sys = crate::generate::example2();
        let sol = direct_solve(&sys).unwrap();
        assert!(sol.residual_norm <= 1e-10 * (1.0 + 5.0));
    }

    #[test]
    fn scaled_norm_examples() {
        let ones = Scaling::identity(2);
        assert_eq!(scaled_max_norm(&[0.625, 0.75], &ones), 0.75);
        let d = Scaling::new(vec![2.0, 0.5]).unwrap();
        assert_eq!(scaled_max_norm(&[1.0, 1.0], &d), 2.0);
        let d = Scaling::new(vec![1.0, 0.565, 0.98]).unwrap();
        let v = scaled_max_norm(&[0.9948, -0.8274, 1.0], &d);
        assert!((v - 0.8274 / 0.565).abs() < 1e-15);
        assert!((v - 1.4645).abs() < 1e-4);
        assert_eq!(scaled_max_norm(&[0.0, 0.0], &ones), 0.0);
    }

    #[test]
    fn scaling_rejects_non_positive() {
        assert!(Scaling::new(vec![1.0, 0.0]).is_err());
        assert!(Scaling::new(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<Scaling>("[1.0, -2.0]").is_err());
    }

    #[test]
    fn diameter_of_path() {
        let g = InducedGraph::from_adjacency(vec![vec![1], vec![2], vec![3], vec![]]);
        assert_eq!(g.diameter(), 3);
        assert!(g.is_acyclic());
    }
}
