//! Factorizations `A B^T`, truncated SVD and the norms used to measure them.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

/// `A B^T` with `A` of shape `n1 x k` and `B` of shape `n2 x k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    left: Array2<f64>,
    right: Array2<f64>,
}

impl Factorization {
    pub fn new(left: Array2<f64>, right: Array2<f64>) -> Result<Self> {
        if left.ncols() != right.ncols() {
            return Err(Error::shape(format!(
                "factor widths differ: {} vs {}",
                left.ncols(),
                right.ncols()
            )));
        }
        Ok(Factorization { left, right })
    }

    /// The width-zero factorization of the `n1 x n2` zero matrix.
    pub fn zero(n1: usize, n2: usize) -> Self {
        Factorization { left: Array2::zeros((n1, 0)), right: Array2::zeros((n2, 0)) }
    }

    pub fn left(&self) -> &Array2<f64> {
        &self.left
    }

    pub fn right(&self) -> &Array2<f64> {
        &self.right
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.left, self.right)
    }

    pub fn width(&self) -> usize {
        self.left.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.left.nrows(), self.right.nrows())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.left.dot(&self.right.t())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.left.row(i).dot(&self.right.row(j))
    }

    /// Sum of the represented matrices; widths add.
    pub fn concat(&self, other: &Factorization) -> Result<Factorization> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!("cannot add {:?} and {:?}", self.shape(), other.shape())));
        }
        Ok(Factorization {
            left: concatenate![Axis(1), self.left, other.left],
            right: concatenate![Axis(1), self.right, other.right],
        })
    }

    pub fn scaled(mut self, c: f64) -> Factorization {
        self.left.mapv_inplace(|v| v * c);
        self
    }

    pub fn left_row_norm(&self) -> f64 {
        row_norm_inf(self.left.view())
    }

    pub fn right_row_norm(&self) -> f64 {
        row_norm_inf(self.right.view())
    }
}

/// `u v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
}

impl RankOne {
    pub fn new(u: Array1<f64>, v: Array1<f64>) -> Self {
        RankOne { u, v }
    }

    /// `c * 1 1^T`.
    pub fn constant(n1: usize, n2: usize, c: f64) -> Self {
        RankOne { u: Array1::from_elem(n1, c), v: Array1::ones(n2) }
    }

    pub fn max_norm(&self) -> f64 {
        sup(&self.u) * sup(&self.v)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let u = self.u.view().insert_axis(Axis(1));
        let v = self.v.view().insert_axis(Axis(0));
        u.dot(&v)
    }
}

fn sup(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `max_i ||A(i, :)||_2`; zero for an empty matrix.
pub fn row_norm_inf(a: ArrayView2<'_, f64>) -> f64 {
    a.axis_iter(Axis(0)).map(|r| r.dot(&r)).fold(0.0_f64, f64::max).sqrt()
}

/// Largest absolute entry.
pub fn max_norm(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Something that approximates a dense matrix.
#[derive(Debug, Clone, Copy)]
pub enum Approximant<'a> {
    Dense(&'a Array2<f64>),
    Factored(&'a Factorization),
}

impl<'a> From<&'a Array2<f64>> for Approximant<'a> {
    fn from(a: &'a Array2<f64>) -> Self {
        Approximant::Dense(a)
    }
}

impl<'a> From<&'a Factorization> for Approximant<'a> {
    fn from(f: &'a Factorization) -> Self {
        Approximant::Factored(f)
    }
}

/// `||F - G||_max`, computed row by row for factored `G`.
pub fn max_norm_error<'a>(f: &Array2<f64>, g: impl Into<Approximant<'a>>) -> Result<f64> {
    match g.into() {
        Approximant::Dense(g) => {
            if f.dim() != g.dim() {
                return Err(Error::shape(format!("shapes {:?} and {:?} differ", f.dim(), g.dim())));
            }
            Ok(f.iter().zip(g.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
        }
        Approximant::Factored(g) => {
            if f.dim() != g.shape() {
                return Err(Error::shape(format!("shapes {:?} and {:?} differ", f.dim(), g.shape())));
            }
            let right_t = g.right().t();
            Ok(f.axis_iter(Axis(0))
                .into_par_iter()
                .enumerate()
                .map(|(i, frow)| {
                    let grow = g.left().row(i).dot(&right_t);
                    frow.iter().zip(grow.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
                })
                .reduce(|| 0.0, f64::max))
        }
    }
}

/// `||F - G||_max / ||F||_max`.
pub fn relative_max_norm_error<'a>(f: &Array2<f64>, g: impl Into<Approximant<'a>>) -> Result<f64> {
    let err = max_norm_error(f, g)?;
    let scale = max_norm(f.view());
    if scale == 0.0 {
        return Err(Error::UndefinedRelative);
    }
    Ok(err / scale)
}

/// Best Frobenius rank-`r` approximation `(U_r S_r) V_r^T`, with the first
/// nonzero entry of every left singular vector made nonnegative.
pub fn truncated_svd(m: ArrayView2<'_, f64>, r: usize) -> Result<Factorization> {
    let (n1, n2) = m.dim();
    if r == 0 || r > n1.min(n2) {
        return Err(Error::invalid(format!("rank {r} outside 1..={}", n1.min(n2))));
    }
    let svd = linalg::thin_svd(m)?;
    let mut left = svd.u.slice(s![.., ..r]).to_owned();
    let mut right = svd.v.slice(s![.., ..r]).to_owned();
    for k in 0..r {
        let flip = left.column(k).iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0);
        let sigma = svd.s[k];
        let sign = if flip { -1.0 } else { 1.0 };
        left.column_mut(k).mapv_inplace(|v| v * sigma * sign);
        right.column_mut(k).mapv_inplace(|v| v * sign);
    }
    Ok(Factorization { left, right })
}

/// Dense rank-`r` projection; returns the input when `r >= min(n1, n2)`.
pub fn project_rank(m: ArrayView2<'_, f64>, r: usize) -> Result<Array2<f64>> {
    if r >= m.nrows().min(m.ncols()) {
        return Ok(m.to_owned());
    }
    Ok(truncated_svd(m, r)?.to_dense())
}
