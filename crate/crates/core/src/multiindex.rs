//! Multi-index Taylor factorization `f(x, y) = sum_gamma d^gamma_y f(x, 0) y^gamma / gamma!`.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::jet::factorial;
use crate::lowrank::{row_norm_inf, Factorization};
use crate::sampling::PointSet;

/// `binom(m + rho - 1, m)`, the number of `gamma` in `N^m` with `|gamma| < rho`.
pub fn count_multiindices(m: usize, rho: usize) -> Result<u64> {
    let big = count_multiindices_big(m, rho)?;
    big.to_u64().ok_or_else(|| Error::Overflow(format!("binom({}, {m}) exceeds u64", m + rho - 1)))
}

/// Exact `binom(m + rho - 1, m)` without overflow.
pub fn count_multiindices_big(m: usize, rho: usize) -> Result<BigUint> {
    if m == 0 || rho == 0 {
        return Err(Error::invalid(format!("need m >= 1 and rho >= 1, got m={m}, rho={rho}")));
    }
    Ok(binomial((m + rho - 1) as u64, m as u64))
}

pub(crate) fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k.min(n));
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// All `gamma` with `|gamma| < rho`, ordered by degree and, within a degree,
/// by decreasing first coordinate (then second, and so on).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexBasis {
    m: usize,
    rho: usize,
    indices: Vec<Vec<usize>>,
}

impl MultiIndexBasis {
    pub fn new(m: usize, rho: usize, caps: &Caps) -> Result<Self> {
        let count = count_multiindices_big(m, rho)?;
        if count > BigUint::from(caps.multiindex_terms) {
            return Err(Error::CapExceeded {
                what: "multi-index basis".into(),
                size: count.to_u128().unwrap_or(u128::MAX),
                cap: caps.multiindex_terms,
            });
        }
        let mut indices = Vec::with_capacity(count.to_usize().unwrap_or(0));
        let mut cur = vec![0usize; m];
        for degree in 0..rho {
            fill(&mut cur, 0, degree, &mut indices);
        }
        Ok(MultiIndexBasis { m, rho, indices })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }
}

fn fill(cur: &mut Vec<usize>, pos: usize, remaining: usize, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        fill(cur, pos + 1, remaining - v, out);
    }
    cur[pos] = 0;
}

/// Source of `d^gamma_y f(x, 0)`.
#[derive(Clone)]
pub enum DerivativeHook {
    /// Exact derivatives `(x, gamma) -> d^gamma_y f(x, 0)`.
    Exact(Arc<dyn Fn(ArrayView1<'_, f64>, &[usize]) -> f64 + Send + Sync>),
    /// Central finite differences of `f(x, y)` in `y` around zero.
    FiniteDifference(Arc<dyn Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for DerivativeHook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DerivativeHook::Exact(_) => f.write_str("DerivativeHook::Exact"),
            DerivativeHook::FiniteDifference(_) => f.write_str("DerivativeHook::FiniteDifference"),
        }
    }
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = 2.0 * x * b - 2.0 * k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Exact hook for `exp(-||x - y||^2)`:
/// `d^gamma_y f(x, 0) = exp(-||x||^2) prod_k H_{gamma_k}(x_k)`.
pub fn gaussian_hook() -> DerivativeHook {
    DerivativeHook::Exact(Arc::new(|x: ArrayView1<'_, f64>, gamma: &[usize]| {
        let e = (-x.dot(&x)).exp();
        e * x.iter().zip(gamma).map(|(&xk, &g)| hermite(g, xk)).product::<f64>()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexReport {
    pub terms: usize,
    /// `||A||_{2,inf}`.
    pub left_row_norm: f64,
    /// `||B||_{2,inf}`.
    pub right_row_norm: f64,
    /// Largest change of a finite-difference derivative when the step doubles.
    pub finite_difference_error: Option<f64>,
}

/// `A(i, gamma) = d^gamma_y f(x_i, 0) / sqrt(gamma!)`, `B(j, gamma) = y_j^gamma / sqrt(gamma!)`.
pub fn multiindex_taylor_factorization(
    hook: &DerivativeHook,
    x: &PointSet,
    y: &PointSet,
    rho: usize,
) -> Result<(Factorization, MultiIndexReport)> {
    multiindex_taylor_factorization_with(hook, x, y, rho, &Caps::from_env())
}

pub fn multiindex_taylor_factorization_with(
    hook: &DerivativeHook,
    x: &PointSet,
    y: &PointSet,
    rho: usize,
    caps: &Caps,
) -> Result<(Factorization, MultiIndexReport)> {
    if x.dim() != y.dim() {
        return Err(Error::shape(format!("point dimensions {} and {} differ", x.dim(), y.dim())));
    }
    let basis = MultiIndexBasis::new(x.dim(), rho, caps)?;
    let k = basis.len();
    let norms: Vec<f64> = basis
        .indices()
        .iter()
        .map(|g| g.iter().map(|&v| factorial(v)).product::<f64>().sqrt())
        .collect();
    let mut a = Array2::<f64>::zeros((x.len(), k));
    let mut fd_err: Option<f64> = None;
    let step = f64::EPSILON.cbrt() * y.radius_bound().max(1.0);
    for i in 0..x.len() {
        let xi = x.row(i);
        for (c, gamma) in basis.indices().iter().enumerate() {
            let d = match hook {
                DerivativeHook::Exact(f) => f(xi, gamma),
                DerivativeHook::FiniteDifference(f) => {
                    let fine = central_difference(f.as_ref(), xi, gamma, step);
                    let coarse = central_difference(f.as_ref(), xi, gamma, 2.0 * step);
                    let e = (fine - coarse).abs();
                    fd_err = Some(fd_err.map_or(e, |v| v.max(e)));
                    fine
                }
            };
            a[[i, c]] = d / norms[c];
        }
    }
    let mut b = Array2::<f64>::zeros((y.len(), k));
    for j in 0..y.len() {
        let yj = y.row(j);
        for (c, gamma) in basis.indices().iter().enumerate() {
            let mono: f64 = yj.iter().zip(gamma).map(|(&v, &g)| v.powi(g as i32)).product();
            b[[j, c]] = mono / norms[c];
        }
    }
    let report = MultiIndexReport {
        terms: k,
        left_row_norm: row_norm_inf(a.view()),
        right_row_norm: row_norm_inf(b.view()),
        finite_difference_error: fd_err,
    };
    Ok((Factorization::new(a, b)?, report))
}

/// Tensor-product central difference `prod_k delta_{h,k}^{gamma_k} f(x, .) / h^|gamma|` at zero.
fn central_difference(
    f: &(dyn Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64 + Send + Sync),
    x: ArrayView1<'_, f64>,
    gamma: &[usize],
    h: f64,
) -> f64 {
    let m = gamma.len();
    let order: usize = gamma.iter().sum();
    // Enumerate every stencil point as a tuple j_k in 0..=gamma_k.
    let mut j = vec![0usize; m];
    let mut y = Array1::<f64>::zeros(m);
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..m {
            let n = gamma[k];
            w *= binomial(n as u64, j[k] as u64).to_f64().unwrap_or(f64::INFINITY);
            if j[k] % 2 == 1 {
                w = -w;
            }
            y[k] = (n as f64 / 2.0 - j[k] as f64) * h;
        }
        total += w * f(x, y.view());
        let mut k = 0;
        loop {
            if k == m {
                return total / h.powi(order as i32);
            }
            j[k] += 1;
            if j[k] <= gamma[k] {
                break;
            }
            j[k] = 0;
            k += 1;
        }
    }
}
