//! Diagonal-dominance classification, Perron certificates for
//! generalised dominance, and the constructive rescaling that turns a weakly
//! dominant system into a strictly dominant one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{build_induced_graph, InducedGraph, Scaling, SparseSystem};

/// Values closer than this to the dominance threshold 1 are flagged.
pub const BORDERLINE_TOL: f64 = 1e-12;

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX: usize = 10_000;

/// Entries of the Perron vector below this are treated as zero.
const PERRON_FLOOR: f64 = 1e-12;

/// Dominance classes, strongest first. Each class implies all the weaker ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    #[serde(rename = "strict_dd")]
    StrictDD,
    #[serde(rename = "d_scaled_dd")]
    DScaledDD,
    #[serde(rename = "weakly_d_scaled_dd")]
    WeaklyDScaledDD,
    #[serde(rename = "not_weakly_dd")]
    NotWeaklyDD,
}

impl Classification {
    /// True when `self` is `other` or a stronger class.
    pub fn at_least(self, other: Classification) -> bool {
        self <= other
    }
}

/// Perron root and vector of `R̄ = |I - A_d^{-1} A|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCertificate {
    pub rho: f64,
    /// Positive, max entry 1 on every connected component.
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Set when the iteration produced (near) zero entries, i.e. `R̄` is
    /// reducible on some component. `rho` is then the Collatz-Wielandt upper
    /// bound for the floored vector.
    pub reducible: bool,
}

impl SpectralCertificate {
    pub fn certifies_generalized_dd(&self) -> bool {
        self.rho < 1.0
    }

    pub fn scaling(&self) -> Scaling {
        Scaling::new(self.u.clone()).expect("Perron vector is positive")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    /// `ϱ_i` under the scaling the report was computed for.
    pub varrho: Vec<f64>,
    pub classification: Classification,
    /// Strict dominance of `A` itself (identity scaling).
    pub strict_dd: bool,
    /// All `ϱ_i < 1` under the given scaling.
    pub scaled_dd: bool,
    /// `ϱ_i ϱ_j < 1` on every edge under the given scaling.
    pub weakly_scaled_dd: bool,
    /// Some tested quantity lies within [`BORDERLINE_TOL`] of 1.
    pub borderline: bool,
    pub diagnostic: Option<String>,
    pub spectral: Option<SpectralCertificate>,
}

impl DominanceReport {
    /// Attaches the Perron certificate of `sys`.
    pub fn with_certificate(mut self, sys: &SparseSystem) -> Result<Self> {
        self.spectral = Some(spectral_certificate(sys)?);
        Ok(self)
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

/// `ϱ_i = Σ_{j≠i} |a_ij| d_j / (a_ii d_i)`.
pub fn varrho(sys: &SparseSystem, d: &Scaling) -> Result<Vec<f64>> {
    d.check_len(sys.n())?;
    check_positive_diagonal(sys)?;
    Ok(varrho_unchecked(sys, d.as_slice()))
}

fn varrho_unchecked(sys: &SparseSystem, d: &[f64]) -> Vec<f64> {
    (0..sys.n())
        .map(|i| {
            let mass: f64 = sys
                .off_diagonal(i)
                .iter()
                .map(|&(j, v)| v.abs() * d[j])
                .sum();
            mass / (sys.diag(i) * d[i])
        })
        .collect()
}

/// True when `ϱ_i ϱ_j < 1` on every edge of `g`.
pub(crate) fn is_weakly_dominant(g: &InducedGraph, varrho: &[f64]) -> bool {
    g.edges().iter().all(|&(i, j)| varrho[i] * varrho[j] < 1.0)
}

/// Classifies `sys` and reports the strongest class it belongs to.
pub fn classify(sys: &SparseSystem, d: &Scaling) -> Result<DominanceReport> {
    d.check_len(sys.n())?;
    let g = build_induced_graph(sys);
    if let Err(Error::NonPositiveDiagonal { node, value }) = check_positive_diagonal(sys) {
        return Ok(DominanceReport {
            varrho: vec![f64::INFINITY; sys.n()],
            classification: Classification::NotWeaklyDD,
            strict_dd: false,
            scaled_dd: false,
            weakly_scaled_dd: false,
            borderline: false,
            diagnostic: Some(format!(
                "diagonal entry a[{node}][{node}] = {value} is not positive"
            )),
            spectral: None,
        });
    }

    let identity = vec![1.0; sys.n()];
    let plain = varrho_unchecked(sys, &identity);
    let rho = varrho_unchecked(sys, d.as_slice());

    let strict_dd = plain.iter().all(|&r| r < 1.0);
    let scaled_dd = rho.iter().all(|&r| r < 1.0);
    let weakly_scaled_dd = is_weakly_dominant(&g, &rho);

    let near_one = |v: f64| (v - 1.0).abs() <= BORDERLINE_TOL;
    let borderline = plain.iter().chain(&rho).any(|&r| near_one(r))
        || g.edges().iter().any(|&(i, j)| near_one(rho[i] * rho[j]));

    let classification = if strict_dd {
        Classification::StrictDD
    } else if scaled_dd {
        Classification::DScaledDD
    } else if weakly_scaled_dd {
        Classification::WeaklyDScaledDD
    } else {
        Classification::NotWeaklyDD
    };
    let diagnostic = borderline.then(|| {
        format!("some dominance quantity is within {BORDERLINE_TOL:e} of 1; classification is borderline")
    });

    Ok(DominanceReport {
        varrho: rho,
        classification,
        strict_dd,
        scaled_dd,
        weakly_scaled_dd,
        borderline,
        diagnostic,
        spectral: None,
    })
}

/// Perron root `ρ` and positive eigenvector `u` of `R̄`, by power iteration on
/// `I + R̄` per connected component. `ρ < 1` certifies generalised diagonal
/// dominance.
pub fn spectral_certificate(sys: &SparseSystem) -> Result<SpectralCertificate> {
    check_positive_diagonal(sys)?;
    let n = sys.n();
    let g = build_induced_graph(sys);
    let mut u = vec![1.0; n];
    let mut iterations = 0;
    let mut reducible = false;

    for comp in g.components() {
        if comp.len() == 1 {
            continue;
        }
        let (its, floored) = perron_on_component(sys, &comp, &mut u);
        iterations = iterations.max(its);
        reducible |= floored || !strongly_connected(sys, &comp);
    }

    // rho is taken from the same ratios `varrho` reports for D = diag(u),
    // so every ϱ_i under the Perron scaling is at most rho.
    let rho = varrho_unchecked(sys, &u).into_iter().fold(0.0, f64::max);
    Ok(SpectralCertificate {
        rho,
        u,
        iterations,
        reducible,
    })
}

/// Whether the directed pattern of `R̄` restricted to `comp` is strongly
/// connected (equivalently, `R̄` is irreducible there).
fn strongly_connected(sys: &SparseSystem, comp: &[usize]) -> bool {
    let n = sys.n();
    let mut transposed: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &i in comp {
        for &(j, _) in sys.off_diagonal(i) {
            transposed[j].push(i);
        }
    }
    let reach_all = |next: &dyn Fn(usize) -> Vec<usize>| {
        let mut seen = vec![false; n];
        let mut stack = vec![comp[0]];
        seen[comp[0]] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for w in next(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == comp.len()
    };
    reach_all(&|v| sys.off_diagonal(v).iter().map(|&(j, _)| j).collect())
        && reach_all(&|v| transposed[v].clone())
}

fn perron_on_component(sys: &SparseSystem, comp: &[usize], u: &mut [f64]) -> (usize, bool) {
    let apply = |u: &[f64], i: usize| -> f64 {
        sys.off_diagonal(i)
            .iter()
            .map(|&(j, v)| v.abs() * u[j])
            .sum::<f64>()
            / sys.diag(i)
    };
    let mut next = vec![0.0; comp.len()];
    let mut iterations = 0;
    while iterations < POWER_ITERATION_MAX {
        iterations += 1;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (slot, &i) in next.iter_mut().zip(comp) {
            let ru = apply(u, i);
            let ratio = ru / u[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            *slot = u[i] + ru;
        }
        let scale = next.iter().fold(0.0, |m: f64, v| m.max(*v));
        for (&v, &i) in next.iter().zip(comp) {
            u[i] = v / scale;
        }
        if hi - lo <= POWER_ITERATION_TOL * hi {
            break;
        }
    }
    let mut floored = false;
    for &i in comp {
        if u[i] < PERRON_FLOOR {
            u[i] = PERRON_FLOOR;
            floored = true;
        }
    }
    (iterations, floored)
}

/// Record of the constructive rescaling `D̃` built from a weakly dominant
/// scaling `D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalizerTrace {
    /// Nodes with `ϱ_i ≥ 1`.
    pub u_set: Vec<usize>,
    /// `None` when `u_set` is empty and no rescaling is needed.
    pub epsilon: Option<f64>,
    /// `(i, ρ̄_i)` for `i` in `u_set`.
    pub rho_bar: Vec<(usize, f64)>,
    /// `(i, ρ̆_i)` for `i` not in `u_set`.
    pub rho_breve: Vec<(usize, f64)>,
    /// Predicted transformed ratios `ρ̃_i`.
    pub rho_tilde: Vec<f64>,
    pub d_tilde: Scaling,
    /// `ϱ_i` recomputed under `d_tilde`.
    pub transformed_varrho: Vec<f64>,
}

/// Builds `D̃` such that `D̃^{-1} A D̃` is strictly diagonally dominant.
///
/// `ε` is half the slack of the tightest constraint over `U`:
/// `ε = ½ min_{i∈U} min(1 - m_i, 1/ϱ_i - m_i)` with `m_i = max_{j∈N_i} ϱ_j`.
pub fn construct_diagonalizer(sys: &SparseSystem, d: &Scaling) -> Result<DiagonalizerTrace> {
    let rho = varrho(sys, d)?;
    let g = build_induced_graph(sys);
    if !is_weakly_dominant(&g, &rho) {
        return Err(Error::NotWeaklyDominant);
    }
    let n = sys.n();
    let in_u: Vec<bool> = rho.iter().map(|&r| r >= 1.0).collect();
    let u_set: Vec<usize> = (0..n).filter(|&i| in_u[i]).collect();

    if u_set.is_empty() {
        return Ok(DiagonalizerTrace {
            u_set,
            epsilon: None,
            rho_bar: Vec::new(),
            rho_breve: (0..n).map(|i| (i, 1.0)).collect(),
            rho_tilde: rho.clone(),
            d_tilde: d.clone(),
            transformed_varrho: rho,
        });
    }

    let neighbor_max = |i: usize| g.neighbors(i).iter().map(|&j| rho[j]).fold(0.0, f64::max);
    let epsilon = 0.5
        * u_set
            .iter()
            .map(|&i| {
                let m = neighbor_max(i);
                (1.0 - m).min(1.0 / rho[i] - m)
            })
            .fold(f64::INFINITY, f64::min);

    let mut bar = vec![f64::NAN; n];
    for &i in &u_set {
        bar[i] = epsilon + neighbor_max(i);
    }
    let mut rho_breve = Vec::new();
    let mut rho_tilde = vec![0.0; n];
    let mut d_tilde = d.as_slice().to_vec();
    for i in 0..n {
        if in_u[i] {
            rho_tilde[i] = rho[i] * bar[i];
            d_tilde[i] /= bar[i];
        } else {
            let breve = g
                .neighbors(i)
                .iter()
                .filter(|&&j| in_u[j])
                .map(|&j| bar[j])
                .fold(1.0, f64::min);
            rho_breve.push((i, breve));
            rho_tilde[i] = rho[i] / breve;
        }
    }
    let d_tilde = Scaling::new(d_tilde)?;
    let transformed_varrho = varrho(sys, &d_tilde)?;
    debug_assert!(transformed_varrho.iter().all(|&r| r < 1.0));

    Ok(DiagonalizerTrace {
        rho_bar: u_set.iter().map(|&i| (i, bar[i])).collect(),
        u_set,
        epsilon: Some(epsilon),
        rho_breve,
        rho_tilde,
        d_tilde,
        transformed_varrho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{example1, example2};

    fn weak_three_node() -> SparseSystem {
        SparseSystem::from_dense(
            &[
                vec![1.0, 1.2, 0.0],
                vec![0.4, 1.0, 0.4],
                vec![0.0, 1.2, 1.0],
            ],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap()
    }

    fn identity(n: usize) -> SparseSystem {
        SparseSystem::new(n, (0..n).map(|i| (i, i, 1.0)), vec![1.0; n]).unwrap()
    }

    #[test]
    fn varrho_example2_matches_reported_values() {
        let r = varrho(&example2(), &Scaling::identity(5)).unwrap();
        let expected = [0.96, 0.99, 0.97, 0.98, 0.97];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn varrho_identity_is_zero() {
        let d = Scaling::new(vec![0.3, 2.0, 7.0]).unwrap();
        assert_eq!(varrho(&identity(3), &d).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn varrho_example1_with_rounded_scaling() {
        let d = Scaling::new(vec![1.0, 0.565, 0.98]).unwrap();
        let r = varrho(&example1(), &d).unwrap();
        assert!((r[0] - (0.72 * 0.565 + 0.6 * 0.98)).abs() < 1e-15);
        assert!((r[0] - 0.9948).abs() < 1e-12);
        assert!((r[1] - (0.1 + 0.375 * 0.98) / 0.565).abs() < 1e-15);
        assert!((r[2] - (0.7 + 0.5 * 0.565) / 0.98).abs() < 1e-15);
    }

    #[test]
    fn varrho_rejects_non_positive_diagonal() {
        let sys =
            SparseSystem::from_dense(&[vec![-1.0, 0.1], vec![0.1, 1.0]], vec![0.0; 2]).unwrap();
        assert!(matches!(
            varrho(&sys, &Scaling::identity(2)),
            Err(Error::NonPositiveDiagonal { node: 0, .. })
        ));
        let report = classify(&sys, &Scaling::identity(2)).unwrap();
        assert_eq!(report.classification, Classification::NotWeaklyDD);
        assert!(report.diagnostic.is_some());
    }

    #[test]
    fn classify_examples() {
        let r = classify(&example2(), &Scaling::identity(5)).unwrap();
        // every ϱ_i < 1 at D = I, so strict dominance is the tightest class
        assert_eq!(r.classification, Classification::StrictDD);
        assert!(r.classification.at_least(Classification::DScaledDD));
        assert!(r.scaled_dd && r.weakly_scaled_dd);

        let r = classify(&weak_three_node(), &Scaling::identity(3)).unwrap();
        assert_eq!(r.classification, Classification::WeaklyDScaledDD);
        assert!((r.varrho[0] - 1.2).abs() < 1e-15);
        assert!((r.varrho[1] - 0.8).abs() < 1e-15);

        let r = classify(&identity(4), &Scaling::identity(4)).unwrap();
        assert_eq!(r.classification, Classification::StrictDD);
        assert!(r.classification.at_least(Classification::WeaklyDScaledDD));
    }

    #[test]
    fn classify_flags_borderline() {
        let sys =
            SparseSystem::from_dense(&[vec![1.0, 1.0], vec![0.5, 1.0]], vec![0.0; 2]).unwrap();
        let r = classify(&sys, &Scaling::identity(2)).unwrap();
        assert!(r.borderline);
        assert_eq!(r.classification, Classification::WeaklyDScaledDD);
    }

    #[test]
    fn classify_not_weakly() {
        let sys =
            SparseSystem::from_dense(&[vec![1.0, 2.0], vec![0.6, 1.0]], vec![0.0; 2]).unwrap();
        let r = classify(&sys, &Scaling::identity(2)).unwrap();
        assert_eq!(r.classification, Classification::NotWeaklyDD);
    }

    #[test]
    fn spectral_radius_of_examples() {
        // Example 1: root of λ³ - 0.6795λ - 0.219 near 0.9535.
        let c = spectral_certificate(&example1()).unwrap();
        assert!((c.rho - 0.9535).abs() < 1e-3);
        let poly = c.rho.powi(3) - 0.6795 * c.rho - 0.219;
        assert!(poly.abs() < 1e-8, "characteristic residual {poly}");
        let c = spectral_certificate(&example2()).unwrap();
        assert!((c.rho - 0.9722).abs() < 1e-3);
        assert!(!c.reducible);
    }

    #[test]
    fn spectral_identity_is_zero() {
        let c = spectral_certificate(&identity(3)).unwrap();
        assert_eq!(c.rho, 0.0);
        assert_eq!(c.u, vec![1.0; 3]);
    }

    #[test]
    fn spectral_two_node_closed_form() {
        // R̄ = [[0, .5], [.4, 0]]: ρ = √0.2, u = (1, √0.8).
        let sys =
            SparseSystem::from_dense(&[vec![1.0, 0.5], vec![0.4, 1.0]], vec![1.0, 1.0]).unwrap();
        let c = spectral_certificate(&sys).unwrap();
        assert!((c.rho - 0.2f64.sqrt()).abs() < 1e-9);
        assert!((c.u[0] - 1.0).abs() < 1e-9);
        assert!((c.u[1] - 0.8f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn spectral_handles_disconnected_graph() {
        let sys = SparseSystem::from_dense(
            &[
                vec![1.0, 0.5, 0.0, 0.0],
                vec![0.5, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.1],
                vec![0.0, 0.0, 0.1, 1.0],
            ],
            vec![1.0; 4],
        )
        .unwrap();
        let c = spectral_certificate(&sys).unwrap();
        assert!((c.rho - 0.5).abs() < 1e-9);
        assert!(c.u.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn spectral_flags_reducible_pattern() {
        // Upper triangular coupling: R̄ is nilpotent on its only component.
        let sys = SparseSystem::from_dense(
            &[
                vec![1.0, 0.5, 0.0],
                vec![0.0, 1.0, 0.5],
                vec![0.0, 0.0, 1.0],
            ],
            vec![1.0; 3],
        )
        .unwrap();
        let c = spectral_certificate(&sys).unwrap();
        assert!(c.reducible);
        assert!(c.rho < 1.0);
        assert!(c.u.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn diagonalizer_three_node_trace() {
        let t = construct_diagonalizer(&weak_three_node(), &Scaling::identity(3)).unwrap();
        assert_eq!(t.u_set, vec![0, 2]);
        let eps = t.epsilon.unwrap();
        assert!((eps - 0.5 * (1.0 / 1.2 - 0.8)).abs() < 1e-15);
        assert!((eps - 0.01667).abs() < 1e-5);
        for &(_, bar) in &t.rho_bar {
            assert!((bar - 0.81667).abs() < 1e-5);
        }
        let d = t.d_tilde.as_slice();
        assert!((d[0] - 1.2245).abs() < 1e-4);
        assert_eq!(d[1], 1.0);
        assert!((d[2] - 1.2245).abs() < 1e-4);
        let r = &t.transformed_varrho;
        assert!((r[0] - 0.98).abs() < 1e-4);
        assert!((r[1] - 0.9796).abs() < 1e-4);
        assert!((r[2] - 0.98).abs() < 1e-4);
        assert!(r.iter().all(|&v| v < 1.0));
        for (&actual, &predicted) in r.iter().zip(&t.rho_tilde) {
            assert!(actual <= predicted + 1e-15);
        }
    }

    #[test]
    fn diagonalizer_keeps_scaling_when_already_dominant() {
        let d = Scaling::identity(5);
        let t = construct_diagonalizer(&example2(), &d).unwrap();
        assert!(t.u_set.is_empty());
        assert_eq!(t.d_tilde, d);
        let t = construct_diagonalizer(&identity(3), &Scaling::identity(3)).unwrap();
        assert_eq!(t.d_tilde.as_slice(), &[1.0; 3]);
    }

    #[test]
    fn diagonalizer_rejects_non_weak() {
        let sys =
            SparseSystem::from_dense(&[vec![1.0, 2.0], vec![0.6, 1.0]], vec![0.0; 2]).unwrap();
        assert!(matches!(
            construct_diagonalizer(&sys, &Scaling::identity(2)),
            Err(Error::NotWeaklyDominant)
        ));
    }
}
