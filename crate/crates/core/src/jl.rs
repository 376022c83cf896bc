//! Gaussian random-embedding compression of factorizations, Hadamard
//! products via Khatri-Rao factors, and rank-one augmentation.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::linalg;
use crate::lowrank::{Factorization, RankOne};
use crate::rng;

/// Default retry budget of the randomized compressors.
pub const DEFAULT_MAX_ATTEMPTS: usize = 50;

/// `ceil(9 ln(3 n1 n2) / eps^2)`.
pub fn rank_formula(eps: f64, n1: u64, n2: u64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("n1 and n2 must be positive"));
    }
    let log = 3f64.ln() + (n1 as f64).ln() + (n2 as f64).ln();
    Ok((9.0 * log / (eps * eps)).ceil() as u64)
}

/// How a compressor produced its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionMethod {
    /// Width already within the rank budget; factors returned unchanged.
    PassThrough,
    /// The budget is at least `min(n1, n2)`, so an exact factorization of
    /// that width is returned instead of a sketch.
    ExactReduction,
    /// Gaussian sketch `(A R)(B R)^T`.
    Sketch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub requested_rank: usize,
    pub achieved_max_error: f64,
    pub attempts: usize,
    pub target_bound: f64,
    pub certified: bool,
    pub method: CompressionMethod,
}

#[derive(Debug, Clone, Copy)]
pub struct JlOptions {
    pub max_attempts: usize,
    /// Sketch width; defaults to [`rank_formula`].
    pub rank: Option<usize>,
    /// Allow the exact pass-through and reduction paths.
    pub short_circuit: bool,
    pub caps: Caps,
}

impl Default for JlOptions {
    fn default() -> Self {
        JlOptions { max_attempts: DEFAULT_MAX_ATTEMPTS, rank: None, short_circuit: true, caps: Caps::from_env() }
    }
}

impl JlOptions {
    pub fn with_max_attempts(max_attempts: usize) -> Self {
        JlOptions { max_attempts, ..Default::default() }
    }
}

fn budget(eps: f64, n1: usize, n2: usize, opts: &JlOptions) -> Result<usize> {
    if opts.max_attempts == 0 {
        return Err(Error::invalid("max_attempts must be at least 1"));
    }
    let formula = rank_formula(eps, n1 as u64, n2 as u64)?;
    let r = match opts.rank {
        Some(0) => return Err(Error::invalid("sketch rank must be positive")),
        Some(r) => r,
        None => usize::try_from(formula).map_err(|_| Error::Overflow("rank formula".into()))?,
    };
    Ok(r)
}

/// Compress `A B^T` to rank at most `rank_formula(eps, n1, n2)`.
pub fn jl_compress(
    f: &Factorization,
    eps: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<(Factorization, CompressionReport)> {
    jl_compress_with(f, eps, seed, &JlOptions::with_max_attempts(max_attempts))
}

pub fn jl_compress_with(
    f: &Factorization,
    eps: f64,
    seed: u64,
    opts: &JlOptions,
) -> Result<(Factorization, CompressionReport)> {
    hadamard_compress_with(std::slice::from_ref(f), eps, seed, opts)
}

/// Compress `(A_1 B_1^T) * ... * (A_t B_t^T)` to rank at most
/// `rank_formula(eps, n1, n2)`.
pub fn hadamard_compress(
    factors: &[Factorization],
    eps: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<(Factorization, CompressionReport)> {
    hadamard_compress_with(factors, eps, seed, &JlOptions::with_max_attempts(max_attempts))
}

pub fn hadamard_compress_with(
    factors: &[Factorization],
    eps: f64,
    seed: u64,
    opts: &JlOptions,
) -> Result<(Factorization, CompressionReport)> {
    let (n1, n2) = check_factors(factors)?;
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("cannot compress an empty matrix"));
    }
    let r = budget(eps, n1, n2, opts)?;
    let width = khatri_rao_width(factors);
    let target_bound = eps
        * factors.iter().map(|f| f.left_row_norm() * f.right_row_norm()).product::<f64>();
    let report = |method, achieved: f64, attempts| CompressionReport {
        requested_rank: r,
        achieved_max_error: achieved,
        attempts,
        target_bound,
        certified: achieved <= target_bound,
        method,
    };

    if opts.short_circuit && width <= r as u128 {
        let g = khatri_rao_with(factors, &opts.caps)?;
        return Ok((g, report(CompressionMethod::PassThrough, 0.0, 1)));
    }
    if opts.short_circuit && r >= n1.min(n2) {
        let g = exact_reduction(factors, &opts.caps)?;
        let err = hadamard_error(factors, &g);
        return Ok((g, report(CompressionMethod::ExactReduction, err, 1)));
    }
    if width > opts.caps.khatri_rao_width {
        return Err(Error::CapExceeded {
            what: "Khatri-Rao width".into(),
            size: width,
            cap: opts.caps.khatri_rao_width,
        });
    }

    let mut best: Option<(Factorization, f64)> = None;
    let mut attempts = 0;
    for attempt in 0..opts.max_attempts {
        attempts = attempt + 1;
        let mut rand = rng::stream(seed, attempt as u64);
        let g = sketch(factors, r, &mut rand);
        let err = hadamard_error(factors, &g);
        if best.as_ref().is_none_or(|(_, e)| err < *e) {
            best = Some((g, err));
        }
        if err <= target_bound {
            break;
        }
    }
    let (g, err) = best.expect("at least one attempt");
    Ok((g, report(CompressionMethod::Sketch, err, attempts)))
}

fn check_factors(factors: &[Factorization]) -> Result<(usize, usize)> {
    let first = factors.first().ok_or_else(|| Error::invalid("need at least one factorization"))?;
    let shape = first.shape();
    if factors.iter().any(|f| f.shape() != shape) {
        return Err(Error::shape("all factorizations must share the matrix shape"));
    }
    Ok(shape)
}

pub(crate) fn khatri_rao_width(factors: &[Factorization]) -> u128 {
    factors.iter().fold(1u128, |acc, f| acc.saturating_mul(f.width() as u128))
}

/// Row-wise Kronecker product of the rows of `mats`, first factor slowest.
pub fn row_kronecker(mats: &[ArrayView2<'_, f64>]) -> Array2<f64> {
    let n = mats[0].nrows();
    let mut out = Array2::<f64>::ones((n, 1));
    for m in mats {
        let (w, k) = (out.ncols(), m.ncols());
        let mut next = Array2::<f64>::zeros((n, w * k));
        for i in 0..n {
            for a in 0..w {
                let va = out[[i, a]];
                for b in 0..k {
                    next[[i, a * k + b]] = va * m[[i, b]];
                }
            }
        }
        out = next;
    }
    out
}

/// Exact factorization of the Hadamard product of `factors`.
pub fn khatri_rao_factorization(factors: &[Factorization]) -> Result<Factorization> {
    khatri_rao_with(factors, &Caps::from_env())
}

pub(crate) fn khatri_rao_with(factors: &[Factorization], caps: &Caps) -> Result<Factorization> {
    check_factors(factors)?;
    let width = khatri_rao_width(factors);
    if width > caps.khatri_rao_width {
        return Err(Error::CapExceeded { what: "Khatri-Rao width".into(), size: width, cap: caps.khatri_rao_width });
    }
    let (n1, n2) = factors[0].shape();
    caps.check_dense("Khatri-Rao factor", (n1.max(n2) as u128).saturating_mul(width))?;
    let lefts: Vec<_> = factors.iter().map(|f| f.left().view()).collect();
    let rights: Vec<_> = factors.iter().map(|f| f.right().view()).collect();
    Factorization::new(row_kronecker(&lefts), row_kronecker(&rights))
}

/// Dense `(A_1 B_1^T) * ... * (A_t B_t^T)`.
pub fn hadamard_dense(factors: &[Factorization]) -> Result<Array2<f64>> {
    check_factors(factors)?;
    let mut out = factors[0].to_dense();
    for f in &factors[1..] {
        out *= &f.to_dense();
    }
    Ok(out)
}

fn hadamard_row(factors: &[Factorization], i: usize) -> Array1<f64> {
    let mut row = factors[0].left().row(i).dot(&factors[0].right().t());
    for f in &factors[1..] {
        row *= &f.left().row(i).dot(&f.right().t());
    }
    row
}

/// `max |prod_s A_s B_s^T - G|`, evaluated row by row.
fn hadamard_error(factors: &[Factorization], g: &Factorization) -> f64 {
    let (n1, _) = g.shape();
    (0..n1)
        .into_par_iter()
        .map(|i| {
            let target = hadamard_row(factors, i);
            let approx = g.left().row(i).dot(&g.right().t());
            target.iter().zip(approx.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
        })
        .reduce(|| 0.0, f64::max)
}

fn exact_reduction(factors: &[Factorization], caps: &Caps) -> Result<Factorization> {
    let (n1, n2) = check_factors(factors)?;
    caps.check_dense("dense Hadamard product", n1 as u128 * n2 as u128)?;
    let dense = hadamard_dense(factors)?;
    // Keep the orthonormal factor on the shorter side.
    if n1 <= n2 {
        let (q, r) = linalg::thin_qr(dense.t());
        Factorization::new(r.t().to_owned(), q)
    } else {
        let (q, r) = linalg::thin_qr(dense.view());
        Factorization::new(q, r.t().to_owned())
    }
}

/// Rows of `R` are generated in Khatri-Rao column order, so `A~ R` and
/// `B~ R` never need the full `A~` in memory.
fn sketch(factors: &[Factorization], r: usize, rand: &mut rng::Rng) -> Factorization {
    let (n1, n2) = factors[0].shape();
    let scale = (r as f64).sqrt().recip();
    let widths: Vec<usize> = factors.iter().map(Factorization::width).collect();
    let total: usize = widths.iter().product();
    let last = *widths.last().unwrap();
    // Chunks cover whole runs of the fastest index.
    let runs_per_chunk = (4096 / last.max(1)).max(1);
    let mut left = Array2::<f64>::zeros((n1, r));
    let mut right = Array2::<f64>::zeros((n2, r));
    let prefix = &factors[..factors.len() - 1];
    let runs = total / last.max(1);
    let mut run = 0;
    while run < runs {
        let take = runs_per_chunk.min(runs - run);
        let cols = take * last;
        let rmat = Array2::from_shape_fn((cols, r), |_| {
            let z: f64 = StandardNormal.sample(rand);
            z * scale
        });
        let a_chunk = kr_chunk(prefix, factors.last().unwrap(), run, take, true);
        let b_chunk = kr_chunk(prefix, factors.last().unwrap(), run, take, false);
        left += &a_chunk.dot(&rmat);
        right += &b_chunk.dot(&rmat);
        run += take;
    }
    Factorization::new(left, right).expect("equal widths")
}

/// Columns `[run * k_last, (run + take) * k_last)` of the Khatri-Rao factor.
fn kr_chunk(prefix: &[Factorization], last: &Factorization, run: usize, take: usize, left: bool) -> Array2<f64> {
    fn pick(f: &Factorization, left: bool) -> ArrayView2<'_, f64> {
        if left { f.left().view() } else { f.right().view() }
    }
    let lastm = pick(last, left);
    let (n, k) = lastm.dim();
    let widths: Vec<usize> = prefix.iter().map(Factorization::width).collect();
    let mut out = Array2::<f64>::zeros((n, take * k));
    for t in 0..take {
        // Decode the prefix multi-index of this run, first factor slowest.
        let mut idx = run + t;
        let mut coeff = Array1::<f64>::ones(n);
        let mut digits = vec![0usize; widths.len()];
        for (d, &w) in widths.iter().enumerate().rev() {
            digits[d] = idx % w;
            idx /= w;
        }
        for (f, &c) in prefix.iter().zip(&digits) {
            coeff *= &pick(f, left).column(c);
        }
        let mut block = out.slice_mut(s![.., t * k..(t + 1) * k]);
        block.assign(&lastm);
        block *= &coeff.view().insert_axis(Axis(1));
    }
    out
}

/// `A B^T + sum_i u_i v_i^T` with each appended pair rescaled so that
/// `||u_i||_inf = ||v_i||_inf = sqrt(||u_i v_i^T||_max)`.
pub fn augment_rank_one(f: &Factorization, terms: &[RankOne]) -> Result<Factorization> {
    let (n1, n2) = f.shape();
    let p = terms.len();
    if terms.iter().any(|z| z.u.len() != n1 || z.v.len() != n2) {
        return Err(Error::shape(format!("rank-one terms must be {n1} x {n2}")));
    }
    let k = f.width();
    let mut left = Array2::<f64>::zeros((n1, k + p));
    let mut right = Array2::<f64>::zeros((n2, k + p));
    left.slice_mut(s![.., ..k]).assign(f.left());
    right.slice_mut(s![.., ..k]).assign(f.right());
    for (i, z) in terms.iter().enumerate() {
        let su = z.u.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let sv = z.v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        if su == 0.0 || sv == 0.0 {
            continue;
        }
        let root = (su * sv).sqrt();
        left.column_mut(k + i).assign(&(&z.u * (root / su)));
        right.column_mut(k + i).assign(&(&z.v * (root / sv)));
    }
    Factorization::new(left, right)
}

/// `||A~||_{2,inf}` of the Khatri-Rao factor, without forming it.
pub fn khatri_rao_row_norms(factors: &[Factorization]) -> (f64, f64) {
    let n1 = factors[0].shape().0;
    let n2 = factors[0].shape().1;
    let per_row = |i: usize, left: bool| {
        factors
            .iter()
            .map(|f| {
                let row = if left { f.left().row(i) } else { f.right().row(i) };
                row.dot(&row)
            })
            .product::<f64>()
    };
    let a = (0..n1).map(|i| per_row(i, true)).fold(0.0, f64::max).sqrt();
    let b = (0..n2).map(|i| per_row(i, false)).fold(0.0, f64::max).sqrt();
    (a, b)
}
