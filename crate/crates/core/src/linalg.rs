//! Thin bridge between `ndarray` storage and the `faer` dense kernels.

use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

fn to_faer(a: ArrayView2<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `a = U diag(s) V^T`, singular values non-increasing.
pub struct ThinSvd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

pub fn thin_svd(a: ArrayView2<'_, f64>) -> Result<ThinSvd> {
    let (n1, n2) = a.dim();
    let k = n1.min(n2);
    if k == 0 {
        return Ok(ThinSvd {
            u: Array2::zeros((n1, 0)),
            s: Array1::zeros(0),
            v: Array2::zeros((n2, 0)),
        });
    }
    let svd = to_faer(a).thin_svd().map_err(|e| Error::Backend(format!("svd: {e:?}")))?;
    let s_col = svd.S().column_vector();
    let s = Array1::from_shape_fn(k, |i| s_col[i]);
    Ok(ThinSvd { u: from_faer(svd.U()), s, v: from_faer(svd.V()) })
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::shape(format!("eigen-decomposition needs a square matrix, got {:?}", a.dim())));
    }
    let evd = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Backend(format!("eigen: {e:?}")))?;
    let s_col = evd.S().column_vector();
    let vals = Array1::from_shape_fn(a.nrows(), |i| s_col[i]);
    Ok((vals, from_faer(evd.U())))
}

/// Thin QR `a = Q R` with `Q` of orthonormal columns.
pub fn thin_qr(a: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let (n1, n2) = a.dim();
    if n1 == 0 || n2 == 0 {
        return (Array2::zeros((n1, n1.min(n2))), Array2::zeros((n1.min(n2), n2)));
    }
    let qr = to_faer(a).qr();
    (from_faer(qr.compute_thin_Q().as_ref()), from_faer(qr.thin_R()))
}
