use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use mpls::bounds::{enumerate_simple_loops, loop_gain_summary, rho_bound, theorem1_bound};
use mpls::dominance::{classify, construct_diagonalizer};
use mpls::experiment::{
    load_system, resolve_scaling, run_experiment, write_error, BoundKind, ErrorReport,
    ExperimentConfig, InputSource, ScalingChoice,
};
use mpls::generate::GeneratorSpec;
use mpls::system::{build_induced_graph, Scaling, SparseSystem};
use mpls::treecheck::{verify_root_equivalence, verify_tree_dominance};
use mpls::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mpls",
    version,
    about = "Message-passing linear solver experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dominance classification, Perron certificate and diagonalizer.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scaling: ScalingArgs,
    },
    /// Run a full experiment and write curve.csv and summary.json.
    Solve(SolveArgs),
    /// Per-node error bounds for each round.
    Bounds {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scaling: ScalingArgs,
        #[arg(long, default_value_t = 20)]
        rounds: usize,
    },
    /// Simple loops and their gains.
    Loops {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scaling: ScalingArgs,
        #[arg(long, default_value_t = mpls::bounds::DEFAULT_MAX_LOOPS)]
        max_loops: usize,
        /// Print every loop instead of a summary.
        #[arg(long)]
        list: bool,
    },
    /// Compare the loopy run with its unwrapped tree at one root.
    Treecheck {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        scaling: ScalingArgs,
        #[arg(long, default_value_t = 0)]
        root: usize,
        #[arg(long, default_value_t = 5)]
        depth: usize,
    },
    /// Run a generator over many seeds in parallel.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Matrix Market coordinate file.
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,
    /// Right-hand side: Matrix Market array or JSON vector.
    #[arg(long, requires = "input")]
    rhs: Option<PathBuf>,
    /// Generator kind, e.g. example1, tree, example4_style.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingKind {
    Identity,
    Perron,
    File,
}

#[derive(Args, Clone)]
struct ScalingArgs {
    #[arg(long, value_enum, default_value = "identity")]
    scaling: ScalingKind,
    /// JSON or Matrix Market array holding d.
    #[arg(long)]
    scaling_file: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// JSON experiment config; other input flags are then ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    stop_tol: Option<f64>,
    /// Comma-separated subset of theorem1, rho, lambda_star.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<String>>,
    #[arg(long)]
    no_jacobi: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    generate: String,
    #[arg(long)]
    n: Option<usize>,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 8)]
    seeds: u64,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[command(flatten)]
    scaling: ScalingArgs,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

fn generator_spec(kind: &str, n: Option<usize>) -> Result<GeneratorSpec> {
    let mut obj = json!({ "kind": kind });
    if let Some(n) = n {
        obj["n"] = json!(n);
    }
    serde_json::from_value(obj).map_err(|e| Error::InvalidConfig(format!("generator: {e}")))
}

impl InputArgs {
    fn source(&self) -> Result<InputSource> {
        match (&self.input, &self.generate) {
            (Some(path), _) => Ok(InputSource::File {
                path: path.clone(),
                rhs: self.rhs.clone(),
            }),
            (None, Some(kind)) => Ok(InputSource::Generate(generator_spec(kind, self.n)?)),
            (None, None) => Err(Error::InvalidConfig(
                "need --input, --generate or --config".into(),
            )),
        }
    }

    fn load(&self) -> Result<SparseSystem> {
        load_system(&self.source()?, self.seed)
    }
}

impl ScalingArgs {
    fn choice(&self) -> Result<ScalingChoice> {
        match (self.scaling, &self.scaling_file) {
            (ScalingKind::Identity, _) => Ok(ScalingChoice::Identity),
            (ScalingKind::Perron, _) => Ok(ScalingChoice::Perron),
            (ScalingKind::File, Some(p)) => Ok(ScalingChoice::File(p.clone())),
            (ScalingKind::File, None) => Err(Error::InvalidConfig(
                "--scaling file needs --scaling-file".into(),
            )),
        }
    }

    fn resolve(&self, sys: &SparseSystem) -> Result<Scaling> {
        resolve_scaling(sys, &self.choice()?)
    }
}

fn outcome(r: Result<Value>) -> Value {
    match r {
        Ok(v) => json!({ "ok": v }),
        Err(e) => json!({ "error": ErrorReport::from(&e) }),
    }
}

fn analyze(input: &InputArgs, scaling: &ScalingArgs) -> Result<Value> {
    let sys = input.load()?;
    let d = scaling.resolve(&sys)?;
    let g = build_induced_graph(&sys);
    let report = classify(&sys, &d)?.with_certificate(&sys)?;
    let diagonalizer = report
        .weakly_scaled_dd
        .then(|| construct_diagonalizer(&sys, &d))
        .transpose()?;
    Ok(json!({
        "n": sys.n(),
        "edges": g.edge_count(),
        "acyclic": g.is_acyclic(),
        "diameter": g.diameter(),
        "scaling": d,
        "dominance": report,
        "diagonalizer": diagonalizer,
    }))
}

fn bounds(input: &InputArgs, scaling: &ScalingArgs, rounds: usize) -> Result<Value> {
    let sys = input.load()?;
    let d = scaling.resolve(&sys)?;
    let g = build_induced_graph(&sys);
    let t1 = theorem1_bound(&sys, &g, &d, rounds)
        .map(|b| json!({ "varrho": b.varrho, "x_star_norm": b.x_star_norm, "table": b.table }));
    Ok(json!({
        "rounds": rounds,
        "theorem1": outcome(t1),
        "rho": outcome(rho_bound(&sys, rounds).and_then(|b| Ok(serde_json::to_value(b)?))),
    }))
}

fn loops(input: &InputArgs, scaling: &ScalingArgs, max_loops: usize, list: bool) -> Result<Value> {
    let sys = input.load()?;
    let d = scaling.resolve(&sys)?;
    let g = build_induced_graph(&sys);
    let varrho = mpls::varrho(&sys, &d)?;
    Ok(if list {
        serde_json::to_value(enumerate_simple_loops(&g, &varrho, max_loops))?
    } else {
        serde_json::to_value(loop_gain_summary(&g, &varrho, max_loops))?
    })
}

fn treecheck(input: &InputArgs, scaling: &ScalingArgs, root: usize, depth: usize) -> Result<Value> {
    let sys = input.load()?;
    let d = scaling.resolve(&sys)?;
    let g = build_induced_graph(&sys);
    let eq = verify_root_equivalence(&sys, &g, root, depth)?;
    let dom = verify_tree_dominance(&sys, &g, &d, root, depth);
    Ok(json!({
        "root_equivalence": eq,
        "tree_dominance": outcome(dom.and_then(|r| Ok(serde_json::to_value(r)?))),
    }))
}

fn parse_bounds(names: &[String]) -> Result<std::collections::BTreeSet<BoundKind>> {
    names
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            serde_json::from_value(json!(s))
                .map_err(|_| Error::InvalidConfig(format!("unknown bound {s:?}")))
        })
        .collect()
}

fn solve_config(args: &SolveArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => {
            let mut cfg = ExperimentConfig::new(args.input.source()?, "out");
            cfg.seed = args.input.seed;
            cfg.scaling = args.scaling.choice()?;
            cfg
        }
    };
    if let Some(r) = args.rounds {
        cfg.rounds = r;
    }
    if let Some(t) = args.stop_tol {
        cfg.stop_tol = t;
    }
    if let Some(b) = &args.bounds {
        cfg.bounds = parse_bounds(b)?;
    }
    if args.no_jacobi {
        cfg.jacobi = false;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn solve(args: &SolveArgs) -> Result<Value> {
    let cfg = match solve_config(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            if let Some(out) = &args.out {
                let _ = write_error(&e, out);
            }
            return Err(e);
        }
    };
    Ok(serde_json::to_value(run_experiment(&cfg)?)?)
}

fn bench(args: &BenchArgs) -> (Value, i32) {
    let prepared = generator_spec(&args.generate, args.n).and_then(|spec| {
        let choice = args.scaling.choice()?;
        Ok((spec, choice))
    });
    let (spec, choice) = match prepared {
        Ok(p) => p,
        Err(e) => return (json!({ "error": ErrorReport::from(&e) }), e.exit_code()),
    };
    let runs: Vec<(u64, Result<_>)> = (args.seed..args.seed + args.seeds)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = ExperimentConfig::new(
                InputSource::Generate(spec.clone()),
                args.out.join(format!("seed-{seed}")),
            );
            cfg.seed = seed;
            cfg.rounds = args.rounds;
            cfg.scaling = choice.clone();
            (seed, run_experiment(&cfg))
        })
        .collect();
    let code = runs
        .iter()
        .find_map(|(_, r)| r.as_ref().err().map(Error::exit_code))
        .unwrap_or(0);
    let rows: Vec<Value> = runs
        .into_iter()
        .map(|(seed, r)| match r {
            Ok(s) => json!({
                "seed": seed,
                "classification": s.classification,
                "rho": s.rho,
                "lambda_star": s.lambda_star,
                "rate": s.rate,
                "final_mse": s.final_mse,
            }),
            Err(e) => json!({ "seed": seed, "error": ErrorReport::from(&e) }),
        })
        .collect();
    let report = json!({ "generator": spec, "runs": rows });
    if let Err(e) = std::fs::create_dir_all(&args.out).and_then(|_| {
        std::fs::write(
            args.out.join("bench.json"),
            serde_json::to_string_pretty(&report).unwrap_or_default() + "\n",
        )
    }) {
        let e = Error::from(e);
        return (json!({ "error": ErrorReport::from(&e) }), e.exit_code());
    }
    (report, code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, code) = match &cli.command {
        Command::Bench(args) => bench(args),
        cmd => {
            let r = match cmd {
                Command::Analyze { input, scaling } => analyze(input, scaling),
                Command::Solve(args) => solve(args),
                Command::Bounds {
                    input,
                    scaling,
                    rounds,
                } => bounds(input, scaling, *rounds),
                Command::Loops {
                    input,
                    scaling,
                    max_loops,
                    list,
                } => loops(input, scaling, *max_loops, *list),
                Command::Treecheck {
                    input,
                    scaling,
                    root,
                    depth,
                } => treecheck(input, scaling, *root, *depth),
                Command::Bench(_) => unreachable!(),
            };
            match r {
                Ok(v) => (v, 0),
                Err(e) => {
                    let report = ErrorReport::from(&e);
                    eprintln!("{}", serde_json::to_string(&report).unwrap_or_default());
                    return ExitCode::from(e.exit_code() as u8);
                }
            }
        }
    };
    match serde_json::to_string_pretty(&result) {
        Ok(s) => {
            let _ = writeln!(std::io::stdout().lock(), "{s}");
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(3);
        }
    }
    ExitCode::from(code as u8)
}
