//! Truncated-Taylor low-rank constructions for `h(x^T W y)` and
//! `h(||x - y||_W^2)`.
//!
//! Every construction expands `h` around a centre `xi`, writes the argument
//! matrix minus `xi` as a factorization `A B^T`, and sums the Hadamard
//! powers `c_s (A B^T)^{*s}`, each compressed to the rank budget of the
//! Gaussian sketch.

use ndarray::{Array1, Array2};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::generators::{distance_view, gram_view, row_quadratic, Interval, KernelSpec, WeightMatrix};
use crate::jet::factorial;
use crate::jl::{self, CompressionMethod, CompressionReport, JlOptions};
use crate::lowrank::{self, max_norm, max_norm_error, Factorization, RankOne};
use crate::rng;
use crate::sampling::PointSet;

/// Grid size used to estimate `sup |h^(t)|` when no growth constants are known.
pub const DERIVATIVE_GRID: usize = 513;

/// Taylor data of `h` at a centre.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPlan {
    pub center: f64,
    pub order: usize,
    /// `h^(s)(center) / s!` for `s < order`.
    pub coefficients: Vec<f64>,
    /// `C M^t radius^t / t!`, present when growth constants and a radius are known.
    pub remainder_bound: Option<f64>,
}

pub fn taylor_coeffs(spec: &KernelSpec, center: f64, t: usize, radius: Option<f64>) -> Result<TaylorPlan> {
    if t == 0 {
        return Err(Error::invalid("Taylor order must be at least 1"));
    }
    let coefficients = spec.jet(center, t)?.into_coeffs();
    let remainder_bound = match (spec.growth(), radius) {
        (Some(g), Some(rho)) => Some(g.c * (g.m * rho.abs()).powi(t as i32) / factorial(t)),
        _ => None,
    };
    Ok(TaylorPlan { center, order: t, coefficients, remainder_bound })
}

/// `ceil(ln(1 / eps))`, at least 1.
pub fn default_order(eps: f64) -> usize {
    ((1.0 / eps).ln().ceil() as usize).max(1)
}

/// How one Hadamard power was represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMethod {
    /// Compressed (or passed through) by the Gaussian sketch machinery.
    Compressed(CompressionMethod),
    /// Khatri-Rao width above the cap: dense power followed by a truncated SVD.
    DenseSvd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub power: usize,
    pub coefficient: f64,
    pub khatri_rao_width: u128,
    pub method: PowerMethod,
    pub rank: usize,
    pub compression: Option<CompressionReport>,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorReport {
    pub center: f64,
    pub order: usize,
    pub rank: usize,
    /// `rank_formula(eps, n1, n2)`.
    pub sketch_rank: usize,
    /// `1 + (t - 1) * sketch_rank`.
    pub rank_budget: usize,
    /// Realized argument range.
    pub argument_range: (f64, f64),
    /// `sup |h^(t)|` over the expansion interval times `rho^t / t!`.
    pub remainder_bound: f64,
    /// True when `sup |h^(t)|` came from a grid rather than growth constants.
    pub remainder_estimated: bool,
    /// `remainder_bound + eps * sum_s |c_s| (||A||_{2,inf} ||B||_{2,inf})^s`.
    pub bound: f64,
    /// `C [e^{-t} + eps (e^kappa - 1)]`, when growth constants are known.
    pub closed_form_bound: Option<f64>,
    /// `kappa`: `M ||W|| R^2` times 1, 4 or 8 for the three constructions.
    pub kappa: Option<f64>,
    /// `t >= e^2 kappa`.
    pub in_validity_regime: bool,
    /// Every power certified and the remainder not estimated.
    pub certified: bool,
    pub measured_max_error: Option<f64>,
    pub measured_relative_error: Option<f64>,
    pub powers: Vec<PowerReport>,
}

#[derive(Debug, Clone, Copy)]
pub struct TaylorOptions {
    /// Taylor order; defaults to [`default_order`].
    pub order: Option<usize>,
    pub max_attempts: usize,
    /// Compare against the dense matrix when it fits under the dense cap.
    pub measure: bool,
    pub jl: JlOptions,
}

impl Default for TaylorOptions {
    fn default() -> Self {
        TaylorOptions { order: None, max_attempts: jl::DEFAULT_MAX_ATTEMPTS, measure: true, jl: JlOptions::default() }
    }
}

impl TaylorOptions {
    pub fn with_order(t: Option<usize>) -> Self {
        TaylorOptions { order: t, ..Default::default() }
    }

    fn caps(&self) -> &Caps {
        &self.jl.caps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Construction {
    InnerProduct,
    Distance,
    LocalDistance,
}

impl Construction {
    fn kappa_factor(self) -> f64 {
        match self {
            Construction::InnerProduct => 1.0,
            Construction::Distance => 4.0,
            Construction::LocalDistance => 8.0,
        }
    }
}

/// `h(X W Y^T)`, with `W = I` when `w` is `None`.
pub fn approx_inner_product(
    spec: &KernelSpec,
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    t: Option<usize>,
    eps: f64,
    seed: u64,
) -> Result<(Factorization, TaylorReport)> {
    approx_inner_product_with(spec, x, w, y, eps, seed, &TaylorOptions::with_order(t))
}

pub fn approx_inner_product_with(
    spec: &KernelSpec,
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    eps: f64,
    seed: u64,
    opts: &TaylorOptions,
) -> Result<(Factorization, TaylorReport)> {
    check_points(x, w, y)?;
    let (l, r) = match w {
        Some(w) => {
            let (l, r) = w.split();
            (x.points().dot(l), y.points().dot(r))
        }
        None => (x.points().clone(), y.points().clone()),
    };
    let base = Factorization::new(l, r)?;
    let args = dense_if_fits(x, y, opts, || gram_view(x.points().view(), w, y.points().view()))?;
    let range = realized_range(args.as_ref(), &base, false);
    assemble(spec, Construction::InnerProduct, x, w, y, base, 0.0, range, eps, seed, opts, args)
}

/// `h(||x - y||_W^2)` expanded at zero.
pub fn approx_sq_distance(
    spec: &KernelSpec,
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    t: Option<usize>,
    eps: f64,
    seed: u64,
) -> Result<(Factorization, TaylorReport)> {
    approx_sq_distance_with(spec, x, w, y, eps, seed, &TaylorOptions::with_order(t))
}

pub fn approx_sq_distance_with(
    spec: &KernelSpec,
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    eps: f64,
    seed: u64,
    opts: &TaylorOptions,
) -> Result<(Factorization, TaylorReport)> {
    check_points(x, w, y)?;
    let base = distance_factorization(x, w, y, 0.0)?;
    let args = dense_distances(x, w, y, opts)?;
    let range = realized_range(args.as_ref(), &base, nonnegative(w));
    assemble(spec, Construction::Distance, x, w, y, base, 0.0, range, eps, seed, opts, args)
}

/// `h(||x - y||_W^2)` expanded at the midpoint of the realized distances.
pub fn approx_sq_distance_local(
    spec: &KernelSpec,
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    t: Option<usize>,
    eps: f64,
    seed: u64,
) -> Result<(Factorization, TaylorReport)> {
    approx_sq_distance_local_with(spec, x, w, y, eps, seed, &TaylorOptions::with_order(t))
}

pub fn approx_sq_distance_local_with(
    spec: &KernelSpec,
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    eps: f64,
    seed: u64,
    opts: &TaylorOptions,
) -> Result<(Factorization, TaylorReport)> {
    check_points(x, w, y)?;
    let unshifted = distance_factorization(x, w, y, 0.0)?;
    let args = dense_distances(x, w, y, opts)?;
    let (lo, hi) = realized_range(args.as_ref(), &unshifted, nonnegative(w));
    let xi = 0.5 * (lo + hi);
    let base = distance_factorization(x, w, y, xi)?;
    assemble(spec, Construction::LocalDistance, x, w, y, base, xi, (lo, hi), eps, seed, opts, args)
}

fn check_points(x: &PointSet, w: Option<&WeightMatrix>, y: &PointSet) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::shape(format!("point dimensions {} and {} differ", x.dim(), y.dim())));
    }
    if let Some(w) = w {
        if w.dim() != x.dim() {
            return Err(Error::shape(format!("weight is {0}x{0} but points live in R^{1}", w.dim(), x.dim())));
        }
    }
    Ok(())
}

/// Dense argument matrix, when it fits under the dense cap.
fn dense_if_fits(
    x: &PointSet,
    y: &PointSet,
    opts: &TaylorOptions,
    f: impl FnOnce() -> Result<Array2<f64>>,
) -> Result<Option<Array2<f64>>> {
    if !opts.measure || (x.len() as u128) * (y.len() as u128) > opts.caps().dense_entries {
        return Ok(None);
    }
    f().map(Some)
}

fn dense_distances(
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    opts: &TaylorOptions,
) -> Result<Option<Array2<f64>>> {
    dense_if_fits(x, y, opts, || Ok(distance_view(x.points().view(), w, y.points().view())?.values))
}

fn nonnegative(w: Option<&WeightMatrix>) -> bool {
    w.is_none_or(WeightMatrix::is_positive_definite)
}

/// Argument range from the dense matrix when available, otherwise from the
/// factorization (clamped at zero for distances under a definite weight).
fn realized_range(args: Option<&Array2<f64>>, f: &Factorization, nonneg: bool) -> (f64, f64) {
    let (lo, hi) = match args {
        Some(a) => a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        None => range_of(f),
    };
    if nonneg {
        (lo.max(0.0), hi.max(0.0))
    } else {
        (lo, hi)
    }
}

/// Values within rounding of the domain are snapped onto it.
fn snap_to_domain(v: f64, domain: Interval) -> Result<f64> {
    let tol = 1e-12 * (1.0 + v.abs());
    if v < domain.lo && v >= domain.lo - tol {
        return Ok(domain.lo);
    }
    if v > domain.hi && v <= domain.hi + tol {
        return Ok(domain.hi);
    }
    domain.check(v)?;
    Ok(v)
}

/// Extreme entries of `A B^T`, evaluated row by row.
fn range_of(f: &Factorization) -> (f64, f64) {
    let (n1, _) = f.shape();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n1 {
        let row = f.left().row(i).dot(&f.right().t());
        for &v in row.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// Factorization of `D - xi 1 1^T` with `D = z1 1^T + 1 z2^T - 2 X W Y^T`.
fn distance_factorization(x: &PointSet, w: Option<&WeightMatrix>, y: &PointSet, xi: f64) -> Result<Factorization> {
    let (n1, n2) = (x.len(), y.len());
    let root2 = std::f64::consts::SQRT_2;
    let (l, r) = match w {
        Some(w) => {
            let (l, r) = w.split();
            (x.points().dot(l), y.points().dot(r))
        }
        None => (x.points().clone(), y.points().clone()),
    };
    let gram = Factorization::new(l * root2, r * -root2)?;
    let z1 = row_quadratic(x.points().view(), w);
    let z2 = row_quadratic(y.points().view(), w);
    let mut terms = vec![RankOne::new(z1, Array1::ones(n2)), RankOne::new(Array1::ones(n1), z2)];
    if xi != 0.0 {
        terms.push(RankOne::new(Array1::from_elem(n1, -xi), Array1::ones(n2)));
    }
    jl::augment_rank_one(&gram, &terms)
}

/// `sup |h^(t)|` on `[lo, hi]`: exact from growth constants, otherwise a grid
/// estimate (flagged).
pub(crate) fn derivative_sup(spec: &KernelSpec, t: usize, lo: f64, hi: f64) -> Result<(f64, bool)> {
    if let Some(g) = spec.growth() {
        return Ok((g.c * g.m.powi(t as i32), false));
    }
    let mut sup = 0.0_f64;
    for k in 0..DERIVATIVE_GRID {
        let u = if hi > lo { lo + (hi - lo) * k as f64 / (DERIVATIVE_GRID - 1) as f64 } else { lo };
        sup = sup.max(spec.derivative(t, u)?.abs());
    }
    Ok((sup, true))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    spec: &KernelSpec,
    construction: Construction,
    x: &PointSet,
    w: Option<&WeightMatrix>,
    y: &PointSet,
    base: Factorization,
    xi: f64,
    range: (f64, f64),
    eps: f64,
    seed: u64,
    opts: &TaylorOptions,
    args: Option<Array2<f64>>,
) -> Result<(Factorization, TaylorReport)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let t = opts.order.unwrap_or_else(|| default_order(eps));
    if t == 0 {
        return Err(Error::invalid("Taylor order must be at least 1"));
    }
    let (n1, n2) = (x.len(), y.len());
    let domain = spec.domain();
    let range = (snap_to_domain(range.0, domain)?, snap_to_domain(range.1, domain)?);
    domain.check(xi)?;

    let r = jl::rank_formula(eps, n1 as u64, n2 as u64)? as usize;
    let sigma = w.map_or(1.0, WeightMatrix::spectral_norm_bound);
    let radius = x.radius_bound().max(y.radius_bound());
    let kappa = spec.growth().map(|g| construction.kappa_factor() * g.m * sigma * radius * radius);
    let closed_form_bound = spec.growth().zip(kappa).map(|(g, k)| g.c * ((-(t as f64)).exp() + eps * k.exp_m1()));
    let in_validity_regime = kappa.is_some_and(|k| t as f64 >= std::f64::consts::E.powi(2) * k);

    // A single distance value: h(xi) 1 1^T is exact.
    if construction == Construction::LocalDistance && range.0 == range.1 {
        let h0 = spec.value(xi)?;
        let g = Factorization::new(Array2::from_elem((n1, 1), h0), Array2::ones((n2, 1)))?;
        let measured = measure(spec, &g, args.as_ref())?;
        let report = TaylorReport {
            center: xi,
            order: t,
            rank: 1,
            sketch_rank: r,
            rank_budget: 1 + (t - 1) * r,
            argument_range: range,
            remainder_bound: 0.0,
            remainder_estimated: false,
            bound: 0.0,
            closed_form_bound,
            kappa,
            in_validity_regime,
            certified: true,
            measured_max_error: measured.map(|m| m.0),
            measured_relative_error: measured.and_then(|m| m.1),
            powers: Vec::new(),
        };
        return Ok((g, report));
    }

    let coeffs = spec.jet(xi, t)?.into_coeffs();
    let rho = (range.0 - xi).abs().max((range.1 - xi).abs());
    let (sup, estimated) = derivative_sup(spec, t, range.0.min(xi), range.1.max(xi))?;
    let remainder_bound = sup * rho.powi(t as i32) / factorial(t);
    let ab = base.left_row_norm() * base.right_row_norm();

    let mut g = Factorization::zero(n1, n2);
    if coeffs[0] != 0.0 {
        let c0 = RankOne::constant(n1, n2, coeffs[0]);
        g = jl::augment_rank_one(&g, &[c0])?;
    }
    let mut powers = Vec::new();
    let mut sketch_sum = 0.0;
    for (s, &c) in coeffs.iter().enumerate().skip(1) {
        if c == 0.0 {
            continue;
        }
        sketch_sum += c.abs() * ab.powi(s as i32);
        let factors = vec![base.clone(); s];
        let width = jl::khatri_rao_width(&factors);
        let jl_opts = JlOptions { max_attempts: opts.max_attempts, rank: None, ..opts.jl };
        let power_seed = rng::split_seed(seed, &[s as u64]);
        // Above the width cap the sketch is unavailable; when the budget
        // covers min(n1, n2) the compressor still reduces exactly.
        let (term, report) = if width <= opts.caps().khatri_rao_width || r >= n1.min(n2) {
            let (f, rep) = jl::hadamard_compress_with(&factors, eps, power_seed, &jl_opts)?;
            let certified = rep.certified;
            (f, (PowerMethod::Compressed(rep.method), Some(rep), certified))
        } else {
            opts.caps().check_dense("dense Hadamard power", n1 as u128 * n2 as u128)?;
            let dense = base.to_dense().mapv(|v| v.powi(s as i32));
            let f = lowrank::truncated_svd(dense.view(), r)?;
            (f, (PowerMethod::DenseSvd, None, false))
        };
        let (method, compression, certified) = report;
        powers.push(PowerReport {
            power: s,
            coefficient: c,
            khatri_rao_width: width,
            method,
            rank: term.width(),
            compression,
            certified,
        });
        g = g.concat(&term.scaled(c))?;
    }

    let bound = remainder_bound + eps * sketch_sum;
    let certified = !estimated && powers.iter().all(|p| p.certified);
    let measured = measure(spec, &g, args.as_ref())?;
    let report = TaylorReport {
        center: xi,
        order: t,
        rank: g.width(),
        sketch_rank: r,
        rank_budget: 1 + (t - 1) * r,
        argument_range: range,
        remainder_bound,
        remainder_estimated: estimated,
        bound,
        closed_form_bound,
        kappa,
        in_validity_regime,
        certified,
        measured_max_error: measured.map(|m| m.0),
        measured_relative_error: measured.and_then(|m| m.1),
        powers,
    };
    Ok((g, report))
}

fn measure(
    spec: &KernelSpec,
    g: &Factorization,
    args: Option<&Array2<f64>>,
) -> Result<Option<(f64, Option<f64>)>> {
    let Some(args) = args else {
        return Ok(None);
    };
    let domain = spec.domain();
    let snapped = args.mapv(|v| v.clamp(domain.lo, domain.hi));
    let f = spec.apply(&snapped)?;
    let err = max_norm_error(&f, g)?;
    let scale = max_norm(f.view());
    Ok(Some((err, (scale > 0.0).then(|| err / scale))))
}
