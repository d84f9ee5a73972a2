//! End-to-end experiment runner: oracle solve, solver and Jacobi runs,
//! requested bounds, a per-round CSV curve and a JSON summary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{
    estimate_asymptotic_rate, loop_gain_summary, rho_bound, theorem1_bound, RateEstimate,
    DEFAULT_MAX_LOOPS,
};
use crate::dominance::{classify, spectral_certificate, Classification};
use crate::error::{Error, Result};
use crate::generate::{generate, GeneratorSpec};
use crate::mm::{load_matrix_market_with_rhs, load_rhs};
use crate::solver::{jacobi_run, run, Termination};
use crate::system::{build_induced_graph, direct_solve, max_norm, Scaling, SparseSystem};

pub const CURVE_FILE: &str = "curve.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ERROR_FILE: &str = "error.json";

pub const CURVE_HEADER: [&str; 5] = [
    "round",
    "log10_mse",
    "theorem1_bound_log10",
    "rho_bound_log10",
    "jacobi_log10_mse",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Generate(GeneratorSpec),
    File {
        path: PathBuf,
        #[serde(default)]
        rhs: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScalingChoice {
    #[default]
    Identity,
    Perron,
    Explicit(Vec<f64>),
    /// JSON array file.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Theorem1,
    Rho,
    LambdaStar,
}

fn default_rounds() -> usize {
    100
}
fn default_bounds() -> BTreeSet<BoundKind> {
    [BoundKind::Theorem1, BoundKind::Rho, BoundKind::LambdaStar]
        .into_iter()
        .collect()
}
fn default_true() -> bool {
    true
}
fn default_max_loops() -> usize {
    DEFAULT_MAX_LOOPS
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputSource,
    #[serde(default)]
    pub scaling: ScalingChoice,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Successive-difference stopping tolerance; `0` runs every round.
    #[serde(default)]
    pub stop_tol: f64,
    #[serde(default = "default_bounds")]
    pub bounds: BTreeSet<BoundKind>,
    #[serde(default = "default_true")]
    pub jacobi: bool,
    #[serde(default)]
    pub seed: u64,
    /// Inclusive round interval for the rate fit; defaults to the last half.
    #[serde(default)]
    pub fit_window: Option<(usize, usize)>,
    #[serde(default = "default_max_loops")]
    pub max_loops: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn new(input: InputSource, output: impl Into<PathBuf>) -> Self {
        Self {
            input,
            scaling: ScalingChoice::default(),
            rounds: default_rounds(),
            stop_tol: 0.0,
            bounds: default_bounds(),
            jacobi: true,
            seed: 0,
            fit_window: None,
            max_loops: default_max_loops(),
            output: output.into(),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if !self.stop_tol.is_finite() {
            return Err(Error::InvalidConfig("stop_tol must be finite".into()));
        }
        if let Some((a, b)) = self.fit_window {
            if a > b || b > self.rounds {
                return Err(Error::InvalidConfig(format!(
                    "fit window {a}..={b} must lie within 0..={}",
                    self.rounds
                )));
            }
        }
        Ok(())
    }
}

pub fn load_system(input: &InputSource, seed: u64) -> Result<SparseSystem> {
    match input {
        InputSource::Generate(spec) => generate(spec, seed),
        InputSource::File { path, rhs } => load_matrix_market_with_rhs(path, rhs.as_deref()),
    }
}

pub fn resolve_scaling(sys: &SparseSystem, choice: &ScalingChoice) -> Result<Scaling> {
    let d = match choice {
        ScalingChoice::Identity => Scaling::identity(sys.n()),
        ScalingChoice::Perron => {
            let cert = spectral_certificate(sys)?;
            if !cert.certifies_generalized_dd() {
                return Err(Error::NotGeneralizedDD { rho: cert.rho });
            }
            cert.scaling()
        }
        ScalingChoice::Explicit(v) => Scaling::new(v.clone())?,
        ScalingChoice::File(path) => Scaling::new(load_rhs(path)?)?,
    };
    if d.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            actual: d.len(),
        });
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub n: usize,
    pub edges: usize,
    pub seed: u64,
    pub acyclic: bool,
    pub diameter: usize,
    pub classification: Classification,
    pub varrho: Vec<f64>,
    pub scaling: Vec<f64>,
    pub rho: f64,
    pub perron_reducible: bool,
    pub lambda_star: Option<f64>,
    pub loop_count: Option<usize>,
    pub loops_truncated: Option<bool>,
    /// Requested bounds whose precondition fails on this instance.
    pub skipped_bounds: Vec<String>,
    pub rounds_requested: usize,
    pub rounds_executed: usize,
    pub termination: String,
    pub oracle_residual: f64,
    pub final_mse: f64,
    pub jacobi_final_mse: Option<f64>,
    /// First round whose max error is within `1e-10 (1 + ||x*||)`.
    pub exact_convergence_round: Option<usize>,
    pub fit: Option<RateEstimate>,
    pub slope: Option<f64>,
    pub rate: Option<f64>,
    pub fit_error: Option<String>,
}

/// Per-round values written to the curve file.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub log10_mse: Vec<f64>,
    pub theorem1_log10: Option<Vec<Option<f64>>>,
    pub rho_log10: Option<Vec<f64>>,
    pub jacobi_log10_mse: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub curve: Curve,
}

/// `log10((1/n) Σ_i v_i²)`.
pub fn log10_mean_square(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).log10()
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::MaxRounds => "max_rounds".into(),
        Termination::Converged { round } => format!("converged at round {round}"),
        Termination::NumericalFailure(f) => f.to_string(),
    }
}

/// Runs the experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let sys = load_system(&cfg.input, cfg.seed)?;
    let g = build_induced_graph(&sys);
    let d = resolve_scaling(&sys, &cfg.scaling)?;
    let report = classify(&sys, &d)?;
    let cert = spectral_certificate(&sys)?;
    let oracle = direct_solve(&sys)?;
    let n = sys.n();

    let traj = run(&sys, &g, cfg.rounds, cfg.stop_tol, Some(&oracle))?;
    if let Termination::NumericalFailure(f) = traj.termination {
        return Err(f.into());
    }
    let mse = traj.mse.clone().unwrap_or_default();
    let executed = traj.rounds_executed;

    let mut skipped_bounds = Vec::new();
    let mut precondition = |kind: &str, e: Error| -> Result<()> {
        match e {
            Error::NotWeaklyDominant | Error::NotGeneralizedDD { .. } => {
                skipped_bounds.push(format!("{kind}: {e}"));
                Ok(())
            }
            other => Err(other),
        }
    };
    let theorem1_log10 = if cfg.bounds.contains(&BoundKind::Theorem1) && executed > 0 {
        match theorem1_bound(&sys, &g, &d, executed) {
            Ok(b) => {
                let mut col = vec![None];
                col.extend(b.table.iter().map(|row| Some(log10_mean_square(row))));
                Some(col)
            }
            Err(e) => {
                precondition("theorem1", e)?;
                None
            }
        }
    } else {
        None
    };
    let rho_log10 = if cfg.bounds.contains(&BoundKind::Rho) {
        match rho_bound(&sys, executed) {
            Ok(b) => Some(b.table.iter().map(|row| log10_mean_square(row)).collect()),
            Err(e) => {
                precondition("rho", e)?;
                None
            }
        }
    } else {
        None
    };
    let loops = cfg
        .bounds
        .contains(&BoundKind::LambdaStar)
        .then(|| loop_gain_summary(&g, &report.varrho, cfg.max_loops));

    let jacobi = if cfg.jacobi {
        Some(jacobi_run(&sys, cfg.rounds, cfg.stop_tol, Some(&oracle))?)
    } else {
        None
    };
    let jacobi_mse = jacobi.as_ref().and_then(|t| t.mse.clone());

    let x_norm = max_norm(&oracle.x);
    let exact_convergence_round = traj
        .abs_errors(&oracle)
        .iter()
        .position(|e| max_norm(e) <= 1e-10 * (1.0 + x_norm));

    let acyclic = g.is_acyclic();
    let window = cfg.fit_window.map(|(a, b)| a..=b.min(executed));
    let (fit, fit_error) = if acyclic {
        let e = Error::DegenerateFit(format!(
            "induced graph is acyclic; convergence is exact after {} rounds",
            g.diameter()
        ));
        (None, Some(e.to_string()))
    } else {
        match estimate_asymptotic_rate(&traj, window) {
            Ok(f) => (Some(f), None),
            Err(e @ Error::DegenerateFit(_)) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        }
    };

    let summary = ExperimentSummary {
        n,
        edges: g.edge_count(),
        seed: cfg.seed,
        acyclic,
        diameter: g.diameter(),
        classification: report.classification,
        varrho: report.varrho.clone(),
        scaling: d.as_slice().to_vec(),
        rho: cert.rho,
        perron_reducible: cert.reducible,
        lambda_star: loops.map(|l| l.lambda_star),
        loop_count: loops.map(|l| l.loop_count),
        loops_truncated: loops.map(|l| l.truncated),
        skipped_bounds,
        rounds_requested: cfg.rounds,
        rounds_executed: executed,
        termination: termination_label(&traj.termination),
        oracle_residual: oracle.residual_norm,
        final_mse: mse.last().copied().unwrap_or(0.0),
        jacobi_final_mse: jacobi_mse.as_ref().and_then(|m| m.last().copied()),
        exact_convergence_round,
        slope: fit.as_ref().map(|f| f.slope),
        rate: fit.as_ref().map(|f| f.rate),
        fit,
        fit_error,
    };
    let curve = Curve {
        log10_mse: mse.iter().map(|m| m.log10()).collect(),
        theorem1_log10,
        rho_log10,
        jacobi_log10_mse: jacobi_mse.map(|m| m.iter().map(|v| v.log10()).collect()),
    };
    Ok(ExperimentOutput { summary, curve })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_curve(curve: &Curve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CURVE_HEADER)?;
    for (k, &e) in curve.log10_mse.iter().enumerate() {
        let t1 = curve
            .theorem1_log10
            .as_ref()
            .and_then(|c| c.get(k).copied().flatten());
        let rho = curve.rho_log10.as_ref().and_then(|c| c.get(k).copied());
        let jac = curve
            .jacobi_log10_mse
            .as_ref()
            .and_then(|c| c.get(k).copied());
        w.write_record([k.to_string(), e.to_string(), cell(t1), cell(rho), cell(jac)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        Self {
            error: e.kind(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }
    }
}

pub fn write_error(err: &Error, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&ErrorReport::from(err))?;
    fs::write(dir.join(ERROR_FILE), json + "\n")?;
    Ok(())
}

/// Runs the experiment and writes `curve.csv` and `summary.json` into
/// `cfg.output`. On failure an `error.json` is written there instead.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    let result = execute(cfg).and_then(|out| {
        fs::create_dir_all(&cfg.output)?;
        write_curve(&out.curve, &cfg.output.join(CURVE_FILE))?;
        let json = serde_json::to_string_pretty(&out.summary)?;
        fs::write(cfg.output.join(SUMMARY_FILE), json + "\n")?;
        Ok(out.summary)
    });
    if let Err(e) = &result {
        // the original error is more useful than a failure to report it
        let _ = write_error(e, &cfg.output);
    }
    result
}
