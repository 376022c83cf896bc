//! `maxnorm`: command-line driver for the maxnorm-core library.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, Ix2};

use maxnorm_core::altproj::{binary_search_eps, svd_baseline, AltProjConfig, Projection, RankSpec, TestFunction, TrialProblem};
use maxnorm_core::bounds::{compare_bounds, ut_tighter_crossing};
use maxnorm_core::generators::KernelSpec;
use maxnorm_core::harness::experiment::format_summary;
use maxnorm_core::harness::plot::{aggregate, render_svg, write_plot_csv};
use maxnorm_core::harness::{read_records, run_to_writer, ExperimentConfig, ExperimentKind};
use maxnorm_core::jl::jl_compress;
use maxnorm_core::lowrank::{max_norm, Factorization};
use maxnorm_core::matrix_io::{read_matrix, write_matrix};
use maxnorm_core::rff::rff_then_compress;
use maxnorm_core::sampling::{PointDomain, PointSet, SamplingScheme};
use maxnorm_core::taylor::{approx_inner_product, approx_sq_distance, approx_sq_distance_local, default_order};
use maxnorm_core::tensor::{cp_from_points, taylor_tt_approx};
use maxnorm_core::Caps;

#[derive(Parser)]
#[command(name = "maxnorm", version, about = "Entrywise low-rank approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a function-generated matrix and write it in the binary matrix format.
    Generate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run one constructive approximation and print its report.
    Approx(ApproxArgs),
    /// Alternating projections with a bisection on eps.
    Altproj(AltprojArgs),
    /// Print the closed-form rank bounds as a CSV table.
    Bounds(BoundsArgs),
    /// Run an experiment config and write the per-trial CSV.
    Experiment(ExperimentArgs),
    /// Aggregate an experiment CSV into plot data and an optional SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, default_value = "f1")]
    function: String,
    #[arg(long, default_value = "symmetric")]
    scheme: String,
    #[arg(long, default_value = "ball")]
    domain: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
}

impl ProblemArgs {
    fn problem(&self) -> Result<TrialProblem> {
        let function: TestFunction = self.function.parse()?;
        let scheme: SamplingScheme = self.scheme.parse()?;
        let mut p = TrialProblem::new(function, scheme, self.n, self.m);
        p.domain = self.domain.parse()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproxAlgorithm {
    /// `h(x^T y)`: the Gaussian on the sphere written as `exp(2 x^T y - 2)`.
    TaylorIp,
    TaylorDist,
    TaylorDistLocal,
    Rff,
    /// Gaussian sketch of the exact factorization `X Y^T`.
    Jl,
    /// TT approximation of `sinh(<x, y, z>)`.
    TtTaylor,
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long, value_enum)]
    algorithm: ApproxAlgorithm,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Taylor order; `ceil(ln(1/eps))` when omitted.
    #[arg(long)]
    order: Option<usize>,
    /// Number of random features; grown adaptively when omitted.
    #[arg(long)]
    rho: Option<usize>,
    /// Sketch rank used inside each TT Hadamard power.
    #[arg(long, default_value_t = 30)]
    rank: usize,
    #[arg(long, default_value_t = 10)]
    max_attempts: usize,
    /// Write the dense approximant (matrices only).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long, default_value_t = 10)]
    bisection_steps: usize,
    /// Random starts tried after the deterministic start fails.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    #[arg(long, default_value = "subspace:10:1")]
    projection: String,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> Result<AltProjConfig> {
        let projection: Projection = self.projection.parse()?;
        let cfg = AltProjConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            bisection_steps: self.bisection_steps,
            restarts: self.restarts,
            projection,
            seed,
            ..AltProjConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct AltprojArgs {
    /// Matrix in the binary format; sampled from the problem flags otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "f1")]
    function: String,
    #[arg(long, default_value = "symmetric")]
    scheme: String,
    #[arg(long, default_value = "ball")]
    domain: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Comma-separated sizes (`n1 = n2 = n`).
    #[arg(long, default_value = "1000,10000,100000,10000000,1000000000")]
    n: String,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Supplies default growth constants.
    #[arg(long, default_value = "gauss")]
    function: String,
    #[arg(long)]
    growth_c: Option<f64>,
    #[arg(long)]
    growth_m: Option<f64>,
    #[arg(long)]
    cu: Option<f64>,
    #[arg(long)]
    cv: Option<f64>,
    #[arg(long)]
    beta2: Option<u64>,
    /// Print the bound comparison predicates at this M instead of the table.
    #[arg(long)]
    compare_at: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    jobs: Option<usize>,
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn save_matrix(path: &Path, a: &Array2<f64>) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_matrix(BufWriter::new(f), a)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "n/a".into())
}

fn generate(problem: &ProblemArgs, output: &Path) -> Result<()> {
    let p = problem.problem()?;
    if p.function.is_tensor() {
        bail!("generate writes matrices; {} is an order-3 tensor", p.function);
    }
    let f = p.generate(problem.seed, &Caps::from_env())?.into_dimensionality::<Ix2>()?;
    save_matrix(output, &f)?;
    println!("wrote {}x{} matrix to {}", f.nrows(), f.ncols(), output.display());
    Ok(())
}

fn approx(a: &ApproxArgs) -> Result<()> {
    let p = a.problem.problem()?;
    let seed = a.problem.seed;
    let ps = p.points(seed)?;
    let x: &PointSet = &ps[0];
    let y = ps.get(1).unwrap_or(x);
    let spec = p.function.spec();
    let fac: Factorization = match a.algorithm {
        ApproxAlgorithm::TaylorIp => {
            if p.function != TestFunction::Gauss || p.domain != PointDomain::Sphere {
                bail!("taylor-ip handles the Gaussian on the sphere: use --function gauss --domain sphere");
            }
            let (fac, rep) = approx_inner_product(&KernelSpec::gaussian_on_sphere(), x, None, y, a.order, a.eps, seed)?;
            print_taylor(&rep);
            fac
        }
        ApproxAlgorithm::TaylorDist | ApproxAlgorithm::TaylorDistLocal => {
            let run = if matches!(a.algorithm, ApproxAlgorithm::TaylorDist) { approx_sq_distance } else { approx_sq_distance_local };
            let (fac, rep) = run(&spec, x, None, y, a.order, a.eps, seed)?;
            print_taylor(&rep);
            fac
        }
        ApproxAlgorithm::Rff => {
            let (fac, rep) = rff_then_compress(&spec, x, y, a.rho, a.eps, seed)?;
            println!("spectral_law = {}", rep.law.as_str());
            println!("rho = {}", rep.rho);
            println!("feature_error = {:.6e} (target {:.6e}, {} probe pairs)", rep.feature_error, rep.feature_target, rep.probe_pairs);
            println!("sketch_attempts = {}", rep.compression.attempts);
            println!("certified = {}", rep.certified);
            println!("measured_max_error = {}", opt(rep.measured_max_error));
            println!("measured_relative_error = {}", opt(rep.measured_relative_error));
            fac
        }
        ApproxAlgorithm::Jl => {
            let base = Factorization::new(x.points().clone(), y.points().clone())?;
            let (fac, rep) = jl_compress(&base, a.eps, seed, a.max_attempts)?;
            println!("requested_rank = {}", rep.requested_rank);
            println!("method = {:?}", rep.method);
            println!("attempts = {}", rep.attempts);
            println!("target_bound = {:.6e}", rep.target_bound);
            println!("achieved_max_error = {:.6e}", rep.achieved_max_error);
            println!("certified = {}", rep.certified);
            fac
        }
        ApproxAlgorithm::TtTaylor => {
            if !p.function.is_tensor() {
                bail!("tt-taylor approximates the order-3 tensor f3");
            }
            let t = a.order.unwrap_or_else(|| default_order(a.eps));
            let (tt, rep) = taylor_tt_approx(&spec, &cp_from_points(&ps)?, t, a.rank, a.eps, seed)?;
            println!("order = {}", rep.order);
            println!("rank_budget = {}", rep.rank_budget);
            println!("tt_ranks = {:?}", tt.ranks());
            println!("skipped_powers = {:?}", rep.skipped_powers);
            println!("remainder_bound = {:.6e}", rep.remainder_bound);
            println!("measured_max_error = {}", opt(rep.measured_max_error));
            println!("measured_relative_error = {}", opt(rep.measured_relative_error));
            println!("target_met = {}", rep.target_met.map_or("n/a".to_string(), |b| b.to_string()));
            if a.output.is_some() {
                bail!("--output writes matrices only");
            }
            return Ok(());
        }
    };
    println!("rank = {}", fac.width());
    if let Some(path) = &a.output {
        save_matrix(path, &fac.to_dense())?;
    }
    Ok(())
}

fn print_taylor(rep: &maxnorm_core::taylor::TaylorReport) {
    println!("center = {:.6e}", rep.center);
    println!("order = {}", rep.order);
    println!("sketch_rank = {}", rep.sketch_rank);
    println!("rank_budget = {}", rep.rank_budget);
    println!("argument_range = [{:.6e}, {:.6e}]", rep.argument_range.0, rep.argument_range.1);
    println!("remainder_bound = {:.6e}{}", rep.remainder_bound, if rep.remainder_estimated { " (estimated)" } else { "" });
    println!("bound = {:.6e}", rep.bound);
    println!("closed_form_bound = {}", opt(rep.closed_form_bound));
    println!("in_validity_regime = {}", rep.in_validity_regime);
    println!("certified = {}", rep.certified);
    println!("measured_max_error = {}", opt(rep.measured_max_error));
    println!("measured_relative_error = {}", opt(rep.measured_relative_error));
}

fn altproj(a: &AltprojArgs) -> Result<()> {
    let f: Array2<f64> = match &a.input {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_matrix(BufReader::new(file))?
        }
        None => {
            let (Some(n), Some(m)) = (a.n, a.m) else {
                bail!("give --input or both --n and --m");
            };
            let mut p = TrialProblem::new(a.function.parse()?, a.scheme.parse()?, n, m);
            p.domain = a.domain.parse()?;
            if p.function.is_tensor() {
                bail!("the altproj command works on matrices");
            }
            p.generate(a.seed, &Caps::from_env())?.into_dimensionality::<Ix2>()?
        }
    };
    let cfg = a.solver.config(a.seed)?;
    let out = binary_search_eps(&f.clone().into_dyn(), &RankSpec::Matrix(a.rank), &cfg)?;
    let (_, base_err) = svd_baseline(f.view(), a.rank)?;
    let fmax = max_norm(f.view());
    println!("eps_star = {:.6e}", out.eps_star);
    println!("relative_eps_star = {:.6e}", out.relative_eps_star);
    println!("certified_error = {:.6e}", out.certified_error);
    println!("relative_certified_error = {:.6e}", out.relative_certified_error);
    println!("revalidated = {}", out.revalidated);
    println!("tsvd_relative_error = {:.6e}", if fmax > 0.0 { base_err / fmax } else { 0.0 });
    for s in &out.history {
        println!("step eps={:.6e} converged={} iters={}", s.eps, s.converged, s.iters);
    }
    if let Some(path) = &a.output {
        save_matrix(path, &out.approximant.into_dimensionality::<Ix2>()?)?;
    }
    Ok(())
}

fn bounds(a: &BoundsArgs) -> Result<()> {
    if let Some(big_m) = a.compare_at {
        let c = compare_bounds(a.m, big_m)?;
        println!("m = {}, M = {big_m}", a.m);
        println!("ut_always_looser = {}", c.ut_always_looser);
        println!("ut_tighter_always_looser = {}", c.ut_tighter_always_looser);
        println!("ut_tighter_crossing = {:.6}", ut_tighter_crossing(1e-9));
        return Ok(());
    }
    let mut cfg = ExperimentConfig { experiment: ExperimentKind::Bounds, seed: Some(0), ..Default::default() };
    cfg.set("function", &a.function)?;
    cfg.set("n", &a.n)?;
    cfg.m = vec![a.m];
    cfg.eps = a.eps;
    cfg.growth_c = a.growth_c;
    cfg.growth_m = a.growth_m;
    cfg.cu = a.cu;
    cfg.cv = a.cv;
    cfg.beta2 = a.beta2;
    let mut w = writer(a.output.as_deref())?;
    run_to_writer(&cfg, &Caps::from_env(), &mut w)?;
    w.flush()?;
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    for o in &a.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("override {o:?} is not key=value"))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if let Some(p) = &a.output {
        cfg.output = Some(p.clone());
    }
    if a.timing {
        cfg.timing = true;
    }
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    if cfg.seed.is_none() {
        bail!("experiments are stochastic: set `seed` in the config or pass --seed");
    }
    let mut w = writer(cfg.output.as_deref())?;
    let out = run_to_writer(&cfg, &Caps::from_env(), &mut w)?;
    w.flush()?;
    for s in out.iter().flat_map(|o| &o.summaries) {
        eprintln!("{}", format_summary(s));
    }
    Ok(())
}

fn plot(input: &Path, output: Option<&Path>, svg: Option<&Path>) -> Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let records = read_records(BufReader::new(file))?;
    let (kind, rows) = aggregate(&records)?;
    let mut w = writer(output)?;
    write_plot_csv(&mut w, kind, &rows)?;
    w.flush()?;
    if let Some(path) = svg {
        std::fs::write(path, render_svg(kind, &rows)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { problem, output } => generate(&problem, &output),
        Command::Approx(a) => approx(&a),
        Command::Altproj(a) => altproj(&a),
        Command::Bounds(a) => bounds(&a),
        Command::Experiment(a) => experiment(&a),
        Command::Plot { input, output, svg } => plot(&input, output.as_deref(), svg.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
