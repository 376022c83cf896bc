//! Generating functions and the dense matrices/tensors they produce.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayD, ArrayView1, ArrayView2, Axis, IxDyn};
use rayon::prelude::*;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::jet::{factorial, Jet};
use crate::linalg;
use crate::sampling::{PointSet, SamplingScheme};

/// Which scalar the univariate `h` is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Argument {
    /// `h(x^T W y)`, or the higher-order inner product for tensors.
    InnerProduct,
    /// `h(||x - y||_W^2)`.
    SquaredDistance,
    /// A kernel of `x - y` with no scalar reduction.
    Difference,
}

/// User-supplied `h` given through its derivatives `(s, xi) -> h^(s)(xi)`.
#[derive(Clone)]
pub struct CustomSeries {
    pub name: String,
    pub argument: Argument,
    derivative: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
}

impl CustomSeries {
    pub fn new(
        name: impl Into<String>,
        argument: Argument,
        derivative: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CustomSeries { name: name.into(), argument, derivative: Arc::new(derivative) }
    }

    pub fn derivative(&self, s: usize, xi: f64) -> f64 {
        (self.derivative)(s, xi)
    }
}

impl fmt::Debug for CustomSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSeries").field("name", &self.name).field("argument", &self.argument).finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    /// `h(u) = exp(a u + b)` on inner products.
    ExpAffine { a: f64, b: f64 },
    /// `h(u) = exp(-u)` on squared distances.
    GaussSqDist,
    /// `f(x, y) = exp(-||x - y||)`, i.e. `h(u) = exp(-sqrt(u))`.
    ExpDist,
    /// `f(x, y) = exp(-||x - y||^4)`, i.e. `h(u) = exp(-u^2)`.
    QuarticDist,
    /// `h(u) = sinh(u)` on (higher-order) inner products.
    SinhHoip,
    /// `prod_k 1 / (1 + (x_k - y_k)^2)`.
    Cauchy,
    Custom(CustomSeries),
}

/// Derivative growth constants: `|h^(s)(u)| <= C M^s` on the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub c: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn all() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub(crate) fn check(&self, v: f64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::DomainViolation { value: v, lo: self.lo, hi: self.hi })
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    growth: Option<Growth>,
    domain: Interval,
}

impl KernelSpec {
    /// `exp(-||x-y||^2)` on the unit sphere written as `exp(2 x^T y - 2)`.
    pub fn gaussian_on_sphere() -> Self {
        KernelSpec {
            family: KernelFamily::ExpAffine { a: 2.0, b: -2.0 },
            growth: Some(Growth { c: 1.0, m: 2.0 }),
            domain: Interval { lo: -1.0, hi: 1.0 },
        }
    }

    /// `exp(a u + b)` on `domain`, with `C = sup exp(a u + b)` and `M = |a|`.
    pub fn exp_affine(a: f64, b: f64, domain: Interval) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("exp_affine parameters must be finite"));
        }
        let growth = if domain.lo.is_finite() && domain.hi.is_finite() {
            let c = (a * domain.lo + b).max(a * domain.hi + b).exp();
            Some(Growth { c, m: if a == 0.0 { 1.0 } else { a.abs() } })
        } else {
            None
        };
        Ok(KernelSpec { family: KernelFamily::ExpAffine { a, b }, growth, domain })
    }

    pub fn gauss_sq_dist() -> Self {
        KernelSpec {
            family: KernelFamily::GaussSqDist,
            growth: Some(Growth { c: 1.0, m: 1.0 }),
            domain: Interval { lo: 0.0, hi: f64::INFINITY },
        }
    }

    pub fn exp_dist() -> Self {
        KernelSpec {
            family: KernelFamily::ExpDist,
            growth: None,
            domain: Interval { lo: 0.0, hi: f64::INFINITY },
        }
    }

    pub fn quartic_dist() -> Self {
        KernelSpec {
            family: KernelFamily::QuarticDist,
            growth: None,
            domain: Interval { lo: 0.0, hi: f64::INFINITY },
        }
    }

    /// `sinh` on `[-bound, bound]`, where `C = cosh(bound)` and `M = 1`.
    pub fn sinh_hoip(bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::invalid(format!("sinh bound must be positive, got {bound}")));
        }
        Ok(KernelSpec {
            family: KernelFamily::SinhHoip,
            growth: Some(Growth { c: bound.cosh(), m: 1.0 }),
            domain: Interval { lo: -bound, hi: bound },
        })
    }

    pub fn cauchy() -> Self {
        KernelSpec { family: KernelFamily::Cauchy, growth: None, domain: Interval::all() }
    }

    pub fn custom(series: CustomSeries, domain: Interval, growth: Option<Growth>) -> Self {
        KernelSpec { family: KernelFamily::Custom(series), growth, domain }
    }

    pub fn with_domain(mut self, domain: Interval) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_growth(mut self, growth: Option<Growth>) -> Self {
        self.growth = growth;
        self
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn growth(&self) -> Option<Growth> {
        self.growth
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn name(&self) -> String {
        match &self.family {
            KernelFamily::ExpAffine { .. } => "exp_affine".into(),
            KernelFamily::GaussSqDist => "gauss_sq_dist".into(),
            KernelFamily::ExpDist => "exp_dist".into(),
            KernelFamily::QuarticDist => "quartic_dist".into(),
            KernelFamily::SinhHoip => "sinh_hoip".into(),
            KernelFamily::Cauchy => "cauchy".into(),
            KernelFamily::Custom(c) => c.name.clone(),
        }
    }

    pub fn argument(&self) -> Argument {
        match &self.family {
            KernelFamily::ExpAffine { .. } | KernelFamily::SinhHoip => Argument::InnerProduct,
            KernelFamily::GaussSqDist | KernelFamily::ExpDist | KernelFamily::QuarticDist => {
                Argument::SquaredDistance
            }
            KernelFamily::Cauchy => Argument::Difference,
            KernelFamily::Custom(c) => c.argument,
        }
    }

    /// `h(u)`. Custom functions are checked against the domain.
    pub fn value(&self, u: f64) -> Result<f64> {
        Ok(match &self.family {
            KernelFamily::ExpAffine { a, b } => (a * u + b).exp(),
            KernelFamily::GaussSqDist => (-u).exp(),
            KernelFamily::ExpDist => (-u.max(0.0).sqrt()).exp(),
            KernelFamily::QuarticDist => (-u * u).exp(),
            KernelFamily::SinhHoip => u.sinh(),
            KernelFamily::Cauchy => {
                return Err(Error::Unsupported("the Cauchy kernel has no scalar profile h".into()))
            }
            KernelFamily::Custom(c) => {
                self.domain.check(u)?;
                c.derivative(0, u)
            }
        })
    }

    /// Taylor coefficients `h^(s)(xi) / s!` for `s < len`.
    pub fn jet(&self, xi: f64, len: usize) -> Result<Jet> {
        let coeffs = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..len).map(|s| f(s) / factorial(s)).collect() };
        Ok(match &self.family {
            KernelFamily::ExpAffine { a, b } => {
                let e = (a * xi + b).exp();
                Jet::from_coeffs(coeffs(&|s| e * a.powi(s as i32)))
            }
            KernelFamily::GaussSqDist => {
                let e = (-xi).exp();
                Jet::from_coeffs(coeffs(&|s| if s % 2 == 0 { e } else { -e }))
            }
            KernelFamily::ExpDist => {
                if len > 1 && !(xi > 0.0) {
                    return Err(Error::Unsupported(format!(
                        "exp(-sqrt(u)) is not differentiable at u = {xi}"
                    )));
                }
                Jet::variable(xi, len).sqrt().scale(-1.0).exp()
            }
            KernelFamily::QuarticDist => {
                let v = Jet::variable(xi, len);
                v.mul(&v).scale(-1.0).exp()
            }
            KernelFamily::SinhHoip => {
                let (sh, ch) = (xi.sinh(), xi.cosh());
                Jet::from_coeffs(coeffs(&|s| if s % 2 == 0 { sh } else { ch }))
            }
            KernelFamily::Cauchy => {
                return Err(Error::Unsupported("the Cauchy kernel has no scalar profile h".into()))
            }
            KernelFamily::Custom(c) => {
                self.domain.check(xi)?;
                Jet::from_coeffs(coeffs(&|s| c.derivative(s, xi)))
            }
        })
    }

    pub fn derivative(&self, s: usize, xi: f64) -> Result<f64> {
        Ok(self.jet(xi, s + 1)?.derivative(s))
    }

    /// `f(x, y)` with the identity weight.
    pub fn eval_pair(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
        match self.argument() {
            Argument::InnerProduct => self.value(x.dot(&y)),
            Argument::SquaredDistance => {
                let d: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                self.value(d)
            }
            Argument::Difference => match &self.family {
                KernelFamily::Cauchy => {
                    Ok(x.iter().zip(y.iter()).map(|(a, b)| 1.0 / (1.0 + (a - b) * (a - b))).product())
                }
                _ => Err(Error::Unsupported(format!("{} has no pairwise evaluation", self.name()))),
            },
        }
    }

    /// Apply `h` entrywise.
    pub fn apply(&self, args: &Array2<f64>) -> Result<Array2<f64>> {
        if let KernelFamily::Custom(_) = self.family {
            for &v in args.iter() {
                self.domain.check(v)?;
            }
        }
        let mut out = args.clone();
        for v in out.iter_mut() {
            *v = self.value(*v)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WeightKind {
    Identity,
    PositiveDefinite,
    Symmetric,
}

/// Symmetric `m x m` weight together with a split `W = L R^T`.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    entries: Array2<f64>,
    kind: WeightKind,
    spectral_norm: f64,
    spectral_norm_bound: f64,
    left: Array2<f64>,
    right: Array2<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl WeightMatrix {
    pub fn identity(m: usize) -> Self {
        let eye = Array2::eye(m);
        WeightMatrix {
            entries: eye.clone(),
            kind: WeightKind::Identity,
            spectral_norm: 1.0,
            spectral_norm_bound: 1.0,
            left: eye.clone(),
            right: eye,
        }
    }

    fn decompose(entries: Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
        let (m, k) = entries.dim();
        if m != k || m == 0 {
            return Err(Error::shape(format!("weight matrix must be square and non-empty, got {m}x{k}")));
        }
        for i in 0..m {
            for j in 0..i {
                if (entries[[i, j]] - entries[[j, i]]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!("weight matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let (vals, vecs) = linalg::symmetric_eigen(entries.view())?;
        Ok((entries, vals, vecs))
    }

    /// Symmetric positive-definite weight.
    pub fn spd(entries: Array2<f64>) -> Result<Self> {
        let (entries, vals, vecs) = Self::decompose(entries)?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(min));
        }
        let half = vals.mapv(f64::sqrt);
        let left = &vecs * &half;
        let norm = vals.iter().cloned().fold(0.0, f64::max);
        Ok(WeightMatrix {
            entries,
            kind: WeightKind::PositiveDefinite,
            spectral_norm: norm,
            spectral_norm_bound: norm,
            right: left.clone(),
            left,
        })
    }

    /// Symmetric, possibly indefinite weight (bilinear forms only).
    pub fn symmetric(entries: Array2<f64>) -> Result<Self> {
        let (entries, vals, vecs) = Self::decompose(entries)?;
        let half = vals.mapv(|v| v.abs().sqrt());
        let signed = Array1::from_iter(vals.iter().zip(half.iter()).map(|(v, h)| h * v.signum()));
        let norm = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Ok(WeightMatrix {
            entries,
            kind: WeightKind::Symmetric,
            spectral_norm: norm,
            spectral_norm_bound: norm,
            left: &vecs * &half,
            right: &vecs * &signed,
        })
    }

    /// Replace the spectral-norm bound by a user value `sigma >= ||W||_2`.
    pub fn with_norm_bound(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= self.spectral_norm * (1.0 - 1e-12)) {
            return Err(Error::invalid(format!(
                "bound {sigma} is below the spectral norm {}",
                self.spectral_norm
            )));
        }
        self.spectral_norm_bound = sigma;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.kind == WeightKind::Identity
    }

    pub fn is_positive_definite(&self) -> bool {
        self.kind != WeightKind::Symmetric
    }

    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    pub fn spectral_norm_bound(&self) -> f64 {
        self.spectral_norm_bound
    }

    /// `(L, R)` with `W = L R^T`.
    pub fn split(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.left, &self.right)
    }
}

fn check_weight(m: usize, w: Option<&WeightMatrix>) -> Result<()> {
    if let Some(w) = w {
        if w.dim() != m {
            return Err(Error::shape(format!("weight is {0}x{0} but points live in R^{m}", w.dim())));
        }
    }
    Ok(())
}

pub(crate) fn gram_view(
    x: ArrayView2<'_, f64>,
    w: Option<&WeightMatrix>,
    y: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if x.ncols() != y.ncols() {
        return Err(Error::shape(format!("point dimensions {} and {} differ", x.ncols(), y.ncols())));
    }
    check_weight(x.ncols(), w)?;
    Ok(match w {
        Some(w) if !w.is_identity() => x.dot(w.entries()).dot(&y.t()),
        _ => x.dot(&y.t()),
    })
}

/// `X W Y^T`; `None` is the identity weight.
pub fn gram(x: &PointSet, w: Option<&WeightMatrix>, y: &PointSet) -> Result<Array2<f64>> {
    gram_view(x.points().view(), w, y.points().view())
}

/// Squared weighted distances together with their extreme values.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub min: f64,
    pub max: f64,
}

/// `x^T W x` for each row.
pub(crate) fn row_quadratic(x: ArrayView2<'_, f64>, w: Option<&WeightMatrix>) -> Array1<f64> {
    match w {
        Some(w) if !w.is_identity() => {
            let xw = x.dot(w.entries());
            (&xw * &x).sum_axis(Axis(1))
        }
        _ => x.map_axis(Axis(1), |r| r.dot(&r)),
    }
}

pub(crate) fn distance_view(
    x: ArrayView2<'_, f64>,
    w: Option<&WeightMatrix>,
    y: ArrayView2<'_, f64>,
) -> Result<DistanceMatrix> {
    if x.ncols() != y.ncols() {
        return Err(Error::shape(format!("point dimensions {} and {} differ", x.ncols(), y.ncols())));
    }
    check_weight(x.ncols(), w)?;
    let mut values = Array2::<f64>::zeros((x.nrows(), y.nrows()));
    match w {
        Some(w) if !w.is_identity() => {
            let z1 = row_quadratic(x, Some(w));
            let z2 = row_quadratic(y, Some(w));
            let cross = x.dot(w.entries()).dot(&y.t());
            let clamp = w.is_positive_definite();
            values.indexed_iter_mut().for_each(|((i, j), v)| {
                let d = z1[i] + z2[j] - 2.0 * cross[[i, j]];
                *v = if clamp { d.max(0.0) } else { d };
            });
        }
        _ => {
            values.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut row)| {
                let xi = x.row(i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = xi.iter().zip(y.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                }
            });
        }
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(DistanceMatrix { values, min, max })
}

/// `(x_i - y_j)^T W (x_i - y_j)`; `None` is the identity weight.
pub fn distance_matrix(x: &PointSet, w: Option<&WeightMatrix>, y: &PointSet) -> Result<DistanceMatrix> {
    distance_view(x.points().view(), w, y.points().view())
}

/// Resolve the second point set of a sampling scheme.
pub fn resolve_pair<'a>(
    scheme: SamplingScheme,
    x: &'a PointSet,
    y: Option<&'a PointSet>,
) -> Result<&'a PointSet> {
    match (scheme, y) {
        (SamplingScheme::Symmetric, Some(y)) if y.len() != x.len() => Err(Error::invalid(format!(
            "symmetric scheme needs equal point counts, got {} and {}",
            x.len(),
            y.len()
        ))),
        (SamplingScheme::Symmetric, _) => Ok(x),
        (SamplingScheme::Independent, Some(y)) => Ok(y),
        (SamplingScheme::Independent, None) => {
            Err(Error::invalid("independent scheme needs a second point set"))
        }
    }
}

/// Dense `F(i, j) = f(x_i, y_j)`; the symmetric scheme uses `y := x`.
pub fn eval_kernel_matrix(
    spec: &KernelSpec,
    scheme: SamplingScheme,
    x: &PointSet,
    y: Option<&PointSet>,
) -> Result<Array2<f64>> {
    eval_kernel_matrix_with(spec, scheme, x, y, &Caps::from_env())
}

pub fn eval_kernel_matrix_with(
    spec: &KernelSpec,
    scheme: SamplingScheme,
    x: &PointSet,
    y: Option<&PointSet>,
    caps: &Caps,
) -> Result<Array2<f64>> {
    let y = resolve_pair(scheme, x, y)?;
    if x.dim() != y.dim() {
        return Err(Error::shape(format!("point dimensions {} and {} differ", x.dim(), y.dim())));
    }
    caps.check_dense("dense kernel matrix", x.len() as u128 * y.len() as u128)?;
    let symmetric = scheme == SamplingScheme::Symmetric;
    let mut out = Array2::<f64>::zeros((x.len(), y.len()));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .try_for_each(|(i, mut row)| -> Result<()> {
            let start = if symmetric { i } else { 0 };
            for j in start..row.len() {
                row[j] = spec.eval_pair(x.row(i), y.row(j))?;
            }
            Ok(())
        })?;
    if symmetric {
        for i in 0..x.len() {
            for j in 0..i {
                out[[i, j]] = out[[j, i]];
            }
        }
    }
    Ok(out)
}

/// Dense tensor `h(<x^(1), ..., x^(d)>)` of the higher-order inner product.
pub fn eval_kernel_tensor(spec: &KernelSpec, pointsets: &[PointSet]) -> Result<ArrayD<f64>> {
    eval_kernel_tensor_with(spec, pointsets, &Caps::from_env())
}

pub fn eval_kernel_tensor_with(spec: &KernelSpec, pointsets: &[PointSet], caps: &Caps) -> Result<ArrayD<f64>> {
    if pointsets.len() < 2 {
        return Err(Error::invalid("a tensor needs at least two point sets"));
    }
    if spec.argument() != Argument::InnerProduct {
        return Err(Error::Unsupported(format!(
            "{} is not a function of the inner product",
            spec.name()
        )));
    }
    let m = pointsets[0].dim();
    if pointsets.iter().any(|p| p.dim() != m) {
        return Err(Error::shape("all point sets must share the ambient dimension"));
    }
    let shape: Vec<usize> = pointsets.iter().map(PointSet::len).collect();
    let total = shape.iter().fold(1u128, |acc, &n| acc.saturating_mul(n as u128));
    caps.check_dense("dense tensor (use the CP/TT path instead)", total)?;
    let args = hoip_dense(pointsets, &shape);
    let mut out = ArrayD::<f64>::zeros(IxDyn(&shape));
    for (o, &a) in out.iter_mut().zip(args.iter()) {
        if let KernelFamily::Custom(_) = spec.family {
            spec.domain.check(a)?;
        }
        *o = spec.value(a)?;
    }
    Ok(out)
}

/// Row-major dense higher-order inner products.
fn hoip_dense(pointsets: &[PointSet], shape: &[usize]) -> Vec<f64> {
    let m = pointsets[0].dim();
    let mut out = Vec::with_capacity(shape.iter().product());
    let mut stack: Vec<Vec<f64>> = vec![vec![1.0; m]];
    fn recurse(pointsets: &[PointSet], level: usize, stack: &mut Vec<Vec<f64>>, out: &mut Vec<f64>) {
        let ps = &pointsets[level];
        let last = level + 1 == pointsets.len();
        for i in 0..ps.len() {
            let row = ps.row(i);
            let prev = &stack[level];
            if last {
                out.push(prev.iter().zip(row.iter()).map(|(a, b)| a * b).sum());
            } else {
                let next: Vec<f64> = prev.iter().zip(row.iter()).map(|(a, b)| a * b).collect();
                stack.push(next);
                recurse(pointsets, level + 1, stack, out);
                stack.pop();
            }
        }
    }
    recurse(pointsets, 0, &mut stack, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_ball, sample_sphere};
    use ndarray::array;

    fn ps(a: Array2<f64>) -> PointSet {
        PointSet::from_points(a).unwrap()
    }

    #[test]
    fn gram_examples() {
        let e1 = ps(array![[1.0, 0.0]]);
        let e2 = ps(array![[0.0, 1.0]]);
        assert_eq!(gram(&e1, None, &e1).unwrap(), array![[1.0]]);
        assert_eq!(gram(&e1, None, &e2).unwrap(), array![[0.0]]);
        let w = WeightMatrix::spd(array![[1.0, 2.0], [2.0, 5.0]]).unwrap();
        assert!((gram(&e1, Some(&w), &e2).unwrap()[[0, 0]] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gram_rejects_mismatch() {
        let a = ps(array![[1.0, 0.0]]);
        let b = ps(array![[1.0, 0.0, 0.0]]);
        assert!(matches!(gram(&a, None, &b), Err(Error::DimensionMismatch(_))));
        let w = WeightMatrix::identity(3);
        assert!(matches!(gram(&a, Some(&w), &a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn distance_examples() {
        let x = sample_ball(3, 6, 3, 1.0).unwrap();
        let d = distance_matrix(&x, None, &x).unwrap();
        assert!((0..6).all(|i| d.values[[i, i]] == 0.0));
        let w = WeightMatrix::spd(array![[2.0]]).unwrap();
        let d = distance_matrix(&ps(array![[0.0]]), Some(&w), &ps(array![[3.0]])).unwrap();
        assert!((d.values[[0, 0]] - 18.0).abs() < 1e-12);
        assert_eq!((d.min, d.max), (d.values[[0, 0]], d.values[[0, 0]]));
    }

    #[test]
    fn weighted_distance_is_nonnegative() {
        let x = sample_ball(4, 20, 3, 1.0).unwrap();
        let w = WeightMatrix::spd(array![[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]]).unwrap();
        let d = distance_matrix(&x, Some(&w), &x).unwrap();
        assert!(d.min >= 0.0);
    }

    #[test]
    fn distance_equals_rank_one_plus_gram() {
        let x = sample_ball(5, 7, 4, 1.0).unwrap();
        let y = sample_ball(6, 9, 4, 1.0).unwrap();
        let d = distance_matrix(&x, None, &y).unwrap();
        let g = gram(&x, None, &y).unwrap();
        let zx = row_quadratic(x.points().view(), None);
        let zy = row_quadratic(y.points().view(), None);
        for ((i, j), v) in d.values.indexed_iter() {
            assert!((v - (zx[i] + zy[j] - 2.0 * g[[i, j]])).abs() <= 1e-10);
        }
    }

    #[test]
    fn weight_validation() {
        assert!(matches!(WeightMatrix::spd(array![[1.0, 0.0], [0.0, -1.0]]), Err(Error::NotPositiveDefinite(_))));
        assert!(WeightMatrix::spd(array![[1.0, 0.5], [0.0, 1.0]]).is_err());
        let w = WeightMatrix::symmetric(array![[1.0, 0.0], [0.0, -3.0]]).unwrap();
        assert!((w.spectral_norm() - 3.0).abs() < 1e-12);
        let (l, r) = w.split();
        let rec = l.dot(&r.t());
        assert!((&rec - w.entries()).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn kernel_matrix_examples() {
        let x = ps(array![[0.1, 0.2]]);
        let f = eval_kernel_matrix(&KernelSpec::exp_dist(), SamplingScheme::Symmetric, &x, None).unwrap();
        assert_eq!(f[[0, 0]], 1.0);

        let a = ps(array![[0.0, 0.0]]);
        let b = ps(array![[0.6, 0.8]]);
        let f = eval_kernel_matrix(&KernelSpec::quartic_dist(), SamplingScheme::Independent, &a, Some(&b)).unwrap();
        assert!((f[[0, 0]] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_on_sphere_matches_distance_form() {
        let x = sample_sphere(11, 15, 3).unwrap();
        let y = sample_sphere(12, 13, 3).unwrap();
        let a = eval_kernel_matrix(&KernelSpec::gauss_sq_dist(), SamplingScheme::Independent, &x, Some(&y)).unwrap();
        let b = eval_kernel_matrix(&KernelSpec::gaussian_on_sphere(), SamplingScheme::Independent, &x, Some(&y))
            .unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() <= 1e-12));
    }

    #[test]
    fn symmetric_scheme_is_exactly_symmetric() {
        let x = sample_ball(8, 12, 3, 1.0).unwrap();
        let f = eval_kernel_matrix(&KernelSpec::exp_dist(), SamplingScheme::Symmetric, &x, None).unwrap();
        assert_eq!(f, f.t());
    }

    #[test]
    fn custom_outside_domain_is_rejected() {
        let series = CustomSeries::new("log", Argument::InnerProduct, |s, x| match s {
            0 => x.ln(),
            _ => 0.0,
        });
        let spec = KernelSpec::custom(series, Interval::new(0.5, 2.0).unwrap(), None);
        let x = ps(array![[1.0, 0.0]]);
        let y = ps(array![[0.0, 1.0]]);
        let err = eval_kernel_matrix(&spec, SamplingScheme::Independent, &x, Some(&y)).unwrap_err();
        assert!(matches!(err, Error::DomainViolation { .. }));
    }

    #[test]
    fn dense_cap_is_enforced() {
        let caps = Caps { dense_entries: 10, ..Caps::default() };
        let x = sample_ball(1, 4, 2, 1.0).unwrap();
        let r = eval_kernel_matrix_with(&KernelSpec::exp_dist(), SamplingScheme::Symmetric, &x, None, &caps);
        assert!(matches!(r, Err(Error::CapExceeded { .. })));
        let t = eval_kernel_tensor_with(&KernelSpec::sinh_hoip(1.0).unwrap(), &[x.clone(), x.clone(), x], &caps);
        assert!(matches!(t, Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn tensor_examples() {
        let e1 = ps(array![[1.0, 0.0]]);
        let spec = KernelSpec::sinh_hoip(1.0).unwrap();
        let t = eval_kernel_tensor(&spec, &[e1.clone(), e1.clone(), e1.clone()]).unwrap();
        assert!((t[[0, 0, 0]] - 1f64.sinh()).abs() < 1e-15);

        let z = ps(array![[0.0, 0.0], [0.3, 0.4]]);
        let y = sample_ball(2, 3, 2, 1.0).unwrap();
        let t = eval_kernel_tensor(&spec, &[z, y.clone(), y]).unwrap();
        assert!(t.index_axis(Axis(0), 0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jets_match_closed_forms() {
        let g = KernelSpec::gaussian_on_sphere();
        assert!((g.derivative(3, 0.5).unwrap() - 8.0 * (-1.0f64).exp()).abs() < 1e-14);
        let q = KernelSpec::quartic_dist();
        // d/du exp(-u^2) = -2u exp(-u^2).
        assert!((q.derivative(1, 0.7).unwrap() + 1.4 * (-0.49f64).exp()).abs() < 1e-14);
        assert!(KernelSpec::exp_dist().jet(0.0, 3).is_err());
        assert!(KernelSpec::cauchy().value(0.0).is_err());
    }
}
