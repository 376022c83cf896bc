//! Alternating projections between a rank set and the max-norm ball
//! `B_eps(F) = { T : ||F - T||_max <= eps }`, with bisection over `eps`.
//!
//! Every returned `eps` is an upper bound on the best max-norm error at the
//! requested rank: the approximant is rank-feasible by construction and its
//! distance to `F` is measured exactly, whatever projection was used.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{s, Array2, Array3, ArrayD, ArrayView2, Ix2};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::generators::{eval_kernel_matrix_with, eval_kernel_tensor_with, KernelSpec};
use crate::linalg;
use crate::lowrank::{project_rank, truncated_svd};
use crate::rng::{self, split_seed};
use crate::sampling::{PointDomain, PointSet, SamplingScheme};
use crate::stats::median;
use crate::tensor::tt::{tt_svd, TTTensor};

/// Target rank: a matrix rank or a TT rank tuple `(r_1, ..., r_{d-1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankSpec {
    Matrix(usize),
    Tensor(Vec<usize>),
}

impl RankSpec {
    fn check(&self, shape: &[usize]) -> Result<()> {
        match self {
            RankSpec::Matrix(r) => {
                if shape.len() != 2 {
                    return Err(Error::shape(format!("matrix rank given for an order-{} array", shape.len())));
                }
                if *r == 0 || *r > shape[0].min(shape[1]) {
                    return Err(Error::invalid(format!("rank {r} outside 1..={}", shape[0].min(shape[1]))));
                }
            }
            RankSpec::Tensor(ranks) => {
                if ranks.len() + 1 != shape.len() {
                    return Err(Error::shape(format!(
                        "{} TT ranks given for an order-{} tensor",
                        ranks.len(),
                        shape.len()
                    )));
                }
                if ranks.contains(&0) {
                    return Err(Error::invalid("TT ranks must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// How the rank projection is computed for matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Full thin SVD, truncated.
    Exact,
    /// Subspace iteration on `r + oversample` vectors, warm-started from the
    /// previous right singular subspace. Cheaper per step; still rank `<= r`.
    Subspace { oversample: usize, power_iters: usize },
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Projection::Exact => write!(f, "exact"),
            Projection::Subspace { oversample, power_iters } => write!(f, "subspace:{oversample}:{power_iters}"),
        }
    }
}

impl FromStr for Projection {
    type Err = Error;

    /// `exact` or `subspace[:oversample[:power_iters]]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        match parts.next() {
            Some("exact") if parts.next().is_none() => Ok(Projection::Exact),
            Some("subspace") => {
                let mut num = |default: usize| -> Result<usize> {
                    parts.next().map_or(Ok(default), |p| {
                        p.parse().map_err(|_| Error::Parse(format!("bad projection parameter {p:?}")))
                    })
                };
                let oversample = num(10)?;
                let power_iters = num(1)?;
                Ok(Projection::Subspace { oversample, power_iters })
            }
            _ => Err(Error::Parse(format!("unknown projection {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltProjConfig {
    pub max_iters: usize,
    /// Relative slack in the feasibility test `||F - T||_max <= eps (1 + tol)`.
    pub tol: f64,
    pub bisection_steps: usize,
    /// Random initial points tried per `eps` after the deterministic start
    /// (`P_rank(F)` or the warm start) fails.
    pub restarts: usize,
    /// Bisection bracket; defaults to `[0, ||F||_max]`.
    pub bracket: Option<(f64, f64)>,
    pub seed: u64,
    pub projection: Projection,
}

impl Default for AltProjConfig {
    fn default() -> Self {
        AltProjConfig {
            max_iters: 500,
            tol: 1e-6,
            bisection_steps: 20,
            restarts: 1,
            bracket: None,
            seed: 0,
            projection: Projection::Exact,
        }
    }
}

impl AltProjConfig {
    pub fn with_seed(seed: u64) -> Self {
        AltProjConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.bisection_steps == 0 {
            return Err(Error::invalid("iteration and bisection counts must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid(format!("tolerance must be nonnegative, got {}", self.tol)));
        }
        if let Some((lo, hi)) = self.bracket {
            if !(lo >= 0.0 && lo < hi) {
                return Err(Error::invalid(format!("bracket [{lo}, {hi}] must satisfy 0 <= lo < hi")));
            }
        }
        if let Projection::Subspace { power_iters, .. } = self.projection {
            if power_iters == 0 {
                return Err(Error::invalid("subspace projection needs at least one power iteration"));
            }
        }
        Ok(())
    }
}

/// `E = F + clamp(T - F, -eps, eps)`, the Frobenius projection of `T` onto `B_eps(F)`.
pub fn clip_projection(t: &ArrayD<f64>, f: &ArrayD<f64>, eps: f64) -> Result<ArrayD<f64>> {
    if t.shape() != f.shape() {
        return Err(Error::shape(format!("shapes {:?} and {:?} differ", t.shape(), f.shape())));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("eps must be nonnegative, got {eps}")));
    }
    let mut e = t.clone();
    e.zip_mut_with(f, |v, &fv| *v = clip_entry(*v, fv, eps));
    Ok(e)
}

/// `fv + clamp(v - fv)`, stepped toward `fv` by ulps when rounding would
/// leave the computed distance above `eps`.
fn clip_entry(v: f64, fv: f64, eps: f64) -> f64 {
    let mut e = fv + (v - fv).clamp(-eps, eps);
    while (e - fv).abs() > eps {
        e = if e > fv { e.next_down() } else { e.next_up() };
    }
    e
}

pub(crate) fn max_abs_diff(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &ArrayD<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Rank projection with the warm-start state of the subspace variant.
struct Projector {
    rank: RankSpec,
    projection: Projection,
    basis: Option<Array2<f64>>,
}

impl Projector {
    fn new(rank: &RankSpec, projection: Projection) -> Self {
        Projector { rank: rank.clone(), projection, basis: None }
    }

    fn project(&mut self, e: &ArrayD<f64>) -> Result<ArrayD<f64>> {
        match &self.rank {
            RankSpec::Tensor(ranks) => tt_svd(e, Some(ranks), None)?.to_dense_with(&Caps { dense_entries: u128::MAX, ..Caps::default() }),
            RankSpec::Matrix(r) => {
                let m = e.view().into_dimensionality::<Ix2>().map_err(|e| Error::shape(e.to_string()))?;
                let out = match self.projection {
                    Projection::Exact => project_rank(m, *r)?,
                    Projection::Subspace { oversample, power_iters } => {
                        self.subspace(m, *r, oversample, power_iters)?
                    }
                };
                Ok(out.into_dyn())
            }
        }
    }

    fn subspace(&mut self, a: ArrayView2<'_, f64>, r: usize, oversample: usize, power_iters: usize) -> Result<Array2<f64>> {
        let (n1, n2) = a.dim();
        let k = (r + oversample).min(n1.min(n2));
        if k >= n1.min(n2) {
            return project_rank(a, r);
        }
        let mut v = match self.basis.take() {
            Some(b) if b.dim() == (n2, k) => b,
            _ => {
                let mut g = rng::rng(0x5eed);
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                Array2::from_shape_fn((n2, k), |_| normal.sample(&mut g))
            }
        };
        let mut q = linalg::thin_qr(a.dot(&v).view()).0;
        for _ in 1..power_iters {
            v = linalg::thin_qr(a.t().dot(&q).view()).0;
            q = linalg::thin_qr(a.dot(&v).view()).0;
        }
        // a ~ q b with b = q^T a; the top-r left singular vectors of b come
        // from the small Gram matrix b b^T.
        let b = q.t().dot(&a);
        let (_, vecs) = linalg::symmetric_eigen(b.dot(&b.t()).view())?;
        let top = vecs.slice(s![.., k - r..]);
        let out = q.dot(&top).dot(&top.t().dot(&b));
        self.basis = Some(b.t().to_owned());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltProjOutcome {
    pub approximant: ArrayD<f64>,
    pub converged: bool,
    /// Projection steps taken.
    pub iters: usize,
    pub max_error: f64,
}

/// Gaussian low-rank initial point whose entries have standard deviation
/// about `scale`.
pub fn random_init(shape: &[usize], rank: &RankSpec, scale: f64, seed: u64) -> Result<ArrayD<f64>> {
    rank.check(shape)?;
    let mut g = rng::rng(seed);
    match rank {
        RankSpec::Matrix(r) => {
            let sigma = (scale / (*r as f64).sqrt()).sqrt();
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
            let a = Array2::from_shape_fn((shape[0], *r), |_| normal.sample(&mut g));
            let b = Array2::from_shape_fn((shape[1], *r), |_| normal.sample(&mut g));
            Ok(a.dot(&b.t()).into_dyn())
        }
        RankSpec::Tensor(ranks) => {
            let d = shape.len();
            let mut full = vec![1];
            full.extend_from_slice(ranks);
            full.push(1);
            let per_core = scale.powf(1.0 / d as f64);
            let cores = (0..d)
                .map(|k| {
                    let sigma = per_core / (full[k + 1] as f64).sqrt();
                    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
                    Ok(Array3::from_shape_fn((full[k], shape[k], full[k + 1]), |_| normal.sample(&mut g)))
                })
                .collect::<Result<Vec<_>>>()?;
            TTTensor::new(cores)?.to_dense_with(&Caps { dense_entries: u128::MAX, ..Caps::default() })
        }
    }
}

/// `T <- P_rank(clip(T, F, eps))`, first from `P_rank(F)` and then from
/// `cfg.restarts` random points; returns the first converged run or the best one.
pub fn alternating_projections(f: &ArrayD<f64>, rank: &RankSpec, eps: f64, cfg: &AltProjConfig) -> Result<AltProjOutcome> {
    cfg.validate()?;
    rank.check(f.shape())?;
    let fmax = max_abs(f);
    if fmax <= eps * (1.0 + cfg.tol) {
        return Ok(AltProjOutcome { approximant: ArrayD::zeros(f.raw_dim()), converged: true, iters: 0, max_error: fmax });
    }
    let mut best: Option<AltProjOutcome> = None;
    for attempt in 0..=cfg.restarts {
        let mut proj = Projector::new(rank, cfg.projection);
        let init = if attempt == 0 {
            rank_projection(f, rank)?
        } else {
            random_init(f.shape(), rank, fmax, split_seed(cfg.seed, &[attempt as u64]))?
        };
        let out = run(f, &mut proj, eps, init, cfg)?;
        if out.converged {
            return Ok(out);
        }
        if best.as_ref().is_none_or(|b| out.max_error < b.max_error) {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Same iteration from a caller-supplied initial point. The initial point is
/// tested for feasibility before any projection, so a feasible rank-`r`
/// input is returned unchanged with `iters == 0`.
pub fn alternating_projections_from(
    f: &ArrayD<f64>,
    rank: &RankSpec,
    eps: f64,
    init: ArrayD<f64>,
    cfg: &AltProjConfig,
) -> Result<AltProjOutcome> {
    cfg.validate()?;
    rank.check(f.shape())?;
    if init.shape() != f.shape() {
        return Err(Error::shape("initial point and target differ in shape"));
    }
    let mut proj = Projector::new(rank, cfg.projection);
    run(f, &mut proj, eps, init, cfg)
}

/// Exact best rank projection of `f` (truncated SVD or TT-SVD), the
/// first iterate of the scheme started at `f` itself.
fn rank_projection(f: &ArrayD<f64>, rank: &RankSpec) -> Result<ArrayD<f64>> {
    Projector::new(rank, Projection::Exact).project(f)
}

fn run(f: &ArrayD<f64>, proj: &mut Projector, eps: f64, init: ArrayD<f64>, cfg: &AltProjConfig) -> Result<AltProjOutcome> {
    let bound = eps * (1.0 + cfg.tol);
    let mut t = init;
    let mut err = max_abs_diff(f, &t);
    let mut iters = 0;
    while err > bound && iters < cfg.max_iters {
        t = proj.project(&clip_projection(&t, f, eps)?)?;
        err = max_abs_diff(f, &t);
        iters += 1;
    }
    Ok(AltProjOutcome { approximant: t, converged: err <= bound, iters, max_error: err })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub eps: f64,
    pub converged: bool,
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    /// Smallest `eps` at which the iteration converged.
    pub eps_star: f64,
    /// `eps_star / ||F||_max` (0 when `F = 0`).
    pub relative_eps_star: f64,
    /// Measured `||F - approximant||_max`, at most `eps_star (1 + tol)`.
    pub certified_error: f64,
    /// `certified_error / ||F||_max`.
    pub relative_certified_error: f64,
    pub approximant: ArrayD<f64>,
    /// A direct run at `eps_star` from the approximant converged.
    pub revalidated: bool,
    pub history: Vec<BisectionStep>,
}

/// Bisection on `eps`. The upper end is always feasible: at `||F||_max` the
/// zero tensor is. Each midpoint starts from the best feasible approximant so
/// far (`P_rank(F)` until one run has converged), then from `cfg.restarts`
/// fresh random points.
pub fn binary_search_eps(f: &ArrayD<f64>, rank: &RankSpec, cfg: &AltProjConfig) -> Result<BisectionOutcome> {
    cfg.validate()?;
    rank.check(f.shape())?;
    let fmax = max_abs(f);
    if fmax == 0.0 {
        return Ok(BisectionOutcome {
            eps_star: 0.0,
            relative_eps_star: 0.0,
            certified_error: 0.0,
            relative_certified_error: 0.0,
            approximant: ArrayD::zeros(f.raw_dim()),
            revalidated: true,
            history: Vec::new(),
        });
    }
    let (mut lo, mut hi) = cfg.bracket.unwrap_or((0.0, fmax));
    let mut history = Vec::new();
    let mut proj = Projector::new(rank, cfg.projection);
    let mut best = ArrayD::zeros(f.raw_dim());
    let mut first = true;
    let start = rank_projection(f, rank)?;
    if hi < fmax {
        let out = run(f, &mut proj, hi, start.clone(), cfg)?;
        history.push(BisectionStep { eps: hi, converged: out.converged, iters: out.iters });
        if out.converged {
            best = out.approximant;
            first = false;
        } else {
            hi = fmax;
        }
    }
    for step in 0..cfg.bisection_steps {
        let mid = 0.5 * (lo + hi);
        let mut converged = None;
        for attempt in 0..=cfg.restarts {
            let init = match (attempt, first) {
                (0, true) => start.clone(),
                (0, false) => best.clone(),
                _ => random_init(f.shape(), rank, fmax, split_seed(cfg.seed, &[1, step as u64, attempt as u64]))?,
            };
            let out = run(f, &mut proj, mid, init, cfg)?;
            history.push(BisectionStep { eps: mid, converged: out.converged, iters: out.iters });
            if out.converged {
                converged = Some(out.approximant);
                break;
            }
        }
        match converged {
            Some(t) => {
                hi = mid;
                best = t;
                first = false;
            }
            None => lo = mid,
        }
    }
    let check = alternating_projections_from(f, rank, hi, best.clone(), cfg)?;
    Ok(BisectionOutcome {
        eps_star: hi,
        relative_eps_star: hi / fmax,
        certified_error: check.max_error,
        relative_certified_error: check.max_error / fmax,
        approximant: best,
        revalidated: check.converged,
        history,
    })
}

/// The sampled functions of the experiment protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `exp(-||x - y||)`.
    F1,
    /// `exp(-||x - y||^4)`.
    F2,
    /// `sinh(<x, y, z>)` on order-3 tensors.
    F3,
    /// `exp(-||x - y||^2)`.
    Gauss,
}

impl TestFunction {
    pub fn spec(self) -> KernelSpec {
        match self {
            TestFunction::F1 => KernelSpec::exp_dist(),
            TestFunction::F2 => KernelSpec::quartic_dist(),
            TestFunction::F3 => KernelSpec::sinh_hoip(1.0).expect("positive bound"),
            TestFunction::Gauss => KernelSpec::gauss_sq_dist(),
        }
    }

    pub fn is_tensor(self) -> bool {
        self == TestFunction::F3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestFunction::F1 => "f1",
            TestFunction::F2 => "f2",
            TestFunction::F3 => "f3",
            TestFunction::Gauss => "gauss",
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f1" => Ok(TestFunction::F1),
            "f2" => Ok(TestFunction::F2),
            "f3" => Ok(TestFunction::F3),
            "gauss" => Ok(TestFunction::Gauss),
            "custom" => Err(Error::Unsupported(
                "custom functions are available through the library API, not through configs".into(),
            )),
            other => Err(Error::Parse(format!("unknown test function {other:?}"))),
        }
    }
}

/// One sampled problem: function, sampling scheme, size and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialProblem {
    pub function: TestFunction,
    pub scheme: SamplingScheme,
    pub domain: PointDomain,
    pub n: usize,
    pub m: usize,
}

impl TrialProblem {
    pub fn new(function: TestFunction, scheme: SamplingScheme, n: usize, m: usize) -> Self {
        TrialProblem { function, scheme, domain: PointDomain::Ball, n, m }
    }

    /// The point sets of one trial: three for the tensor, one for a
    /// symmetric matrix, two otherwise. Tensors always sample independently.
    pub fn points(&self, seed: u64) -> Result<Vec<PointSet>> {
        let count = match (self.function.is_tensor(), self.scheme) {
            (true, _) => 3,
            (false, SamplingScheme::Independent) => 2,
            (false, SamplingScheme::Symmetric) => 1,
        };
        (0..count).map(|k| self.domain.sample(split_seed(seed, &[k]), self.n, self.m)).collect()
    }

    pub fn generate(&self, seed: u64, caps: &Caps) -> Result<ArrayD<f64>> {
        self.evaluate(&self.points(seed)?, caps)
    }

    /// Evaluate the function on point sets returned by [`TrialProblem::points`].
    pub fn evaluate(&self, ps: &[PointSet], caps: &Caps) -> Result<ArrayD<f64>> {
        let spec = self.function.spec();
        if self.function.is_tensor() {
            return eval_kernel_tensor_with(&spec, ps, caps);
        }
        Ok(eval_kernel_matrix_with(&spec, self.scheme, &ps[0], ps.get(1), caps)?.into_dyn())
    }

    /// `r` for matrices, `(r, r)` for the order-3 tensor.
    pub fn rank(&self, r: usize) -> RankSpec {
        if self.function.is_tensor() {
            RankSpec::Tensor(vec![r, r])
        } else {
            RankSpec::Matrix(r)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    /// Seed that regenerates this trial's points and initialisation.
    pub seed: u64,
    pub relative_error: f64,
    /// Relative max error of the truncated SVD (matrices only).
    pub baseline_relative_error: Option<f64>,
    pub revalidated: bool,
    pub altproj_seconds: f64,
    pub baseline_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trials: Vec<TrialResult>,
    pub median: f64,
    pub baseline_median: Option<f64>,
}

/// Trial seeds are `split_seed(cfg.seed, [trial])`; points use child seeds
/// `[0]`, `[1]`, `[2]` of that and the solver uses `[3]`.
pub fn run_trials(problem: &TrialProblem, r: usize, cfg: &AltProjConfig, trials: usize, caps: &Caps) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    cfg.validate()?;
    let results = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialResult> {
            let seed = split_seed(cfg.seed, &[trial as u64]);
            let f = problem.generate(seed, caps)?;
            let rank = problem.rank(r);
            let solver = AltProjConfig { seed: split_seed(seed, &[3]), ..*cfg };
            let start = Instant::now();
            let out = binary_search_eps(&f, &rank, &solver)?;
            let altproj_seconds = start.elapsed().as_secs_f64();
            let (baseline_relative_error, baseline_seconds) = match &rank {
                RankSpec::Matrix(r) => {
                    let start = Instant::now();
                    let m = f.view().into_dimensionality::<Ix2>().map_err(|e| Error::shape(e.to_string()))?;
                    let g = truncated_svd(m, *r)?.to_dense();
                    let fmax = max_abs(&f);
                    let err = max_abs_diff(&f, &g.into_dyn());
                    (Some(if fmax > 0.0 { err / fmax } else { 0.0 }), Some(start.elapsed().as_secs_f64()))
                }
                RankSpec::Tensor(_) => (None, None),
            };
            Ok(TrialResult {
                trial,
                seed,
                relative_error: out.relative_certified_error,
                baseline_relative_error,
                revalidated: out.revalidated,
                altproj_seconds,
                baseline_seconds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let median_err = median(&results.iter().map(|t| t.relative_error).collect::<Vec<_>>())?;
    let baseline: Vec<f64> = results.iter().filter_map(|t| t.baseline_relative_error).collect();
    let baseline_median = if baseline.is_empty() { None } else { Some(median(&baseline)?) };
    Ok(TrialSummary { trials: results, median: median_err, baseline_median })
}

/// Frobenius-optimal rank-`r` matrix and its max error, for comparisons.
pub fn svd_baseline(f: ArrayView2<'_, f64>, r: usize) -> Result<(Array2<f64>, f64)> {
    let g = truncated_svd(f, r)?.to_dense();
    let err = f.iter().zip(g.iter()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((g, err))
}
