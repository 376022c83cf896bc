//! Canonical polyadic tensors `[[X_1, ..., X_d]]`.

use ndarray::{Array1, Array2, ArrayD, ArrayView2, IxDyn};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::jl::row_kronecker;
use crate::lowrank::row_norm_inf;
use crate::sampling::PointSet;

/// `P(i_1, ..., i_d) = sum_a X_1(i_1, a) ... X_d(i_d, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CPTensor {
    factors: Vec<Array2<f64>>,
}

impl CPTensor {
    pub fn new(factors: Vec<Array2<f64>>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::invalid("a CP tensor needs at least two factors"));
        }
        let width = factors[0].ncols();
        if factors.iter().any(|f| f.ncols() != width) {
            return Err(Error::shape("CP factors must share their width"));
        }
        Ok(CPTensor { factors })
    }

    pub fn factors(&self) -> &[Array2<f64>] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn width(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Array2::nrows).collect()
    }

    pub fn len(&self) -> u128 {
        self.shape().iter().fold(1u128, |acc, &n| acc.saturating_mul(n as u128))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entry(&self, idx: &[usize]) -> f64 {
        let mut acc = Array1::<f64>::ones(self.width());
        for (f, &i) in self.factors.iter().zip(idx) {
            acc *= &f.row(i);
        }
        acc.sum()
    }

    /// `||X_j||_{2,inf}` for each factor.
    pub fn factor_row_norms(&self) -> Vec<f64> {
        self.factors.iter().map(|f| row_norm_inf(f.view())).collect()
    }

    pub fn to_dense(&self) -> Result<ArrayD<f64>> {
        self.to_dense_with(&Caps::from_env())
    }

    pub fn to_dense_with(&self, caps: &Caps) -> Result<ArrayD<f64>> {
        caps.check_dense("dense CP tensor", self.len())?;
        let shape = self.shape();
        let width = self.width();
        // Contract mode by mode: (n_1 ... n_k) x L partial products.
        let mut partial = self.factors[0].clone();
        for f in &self.factors[1..] {
            let (rows, n) = (partial.nrows(), f.nrows());
            let mut next = Array2::<f64>::zeros((rows * n, width));
            for a in 0..rows {
                for i in 0..n {
                    let mut row = next.row_mut(a * n + i);
                    row.assign(&partial.row(a));
                    row *= &f.row(i);
                }
            }
            partial = next;
        }
        let flat: Vec<f64> = partial.rows().into_iter().map(|r| r.sum()).collect();
        ArrayD::from_shape_vec(IxDyn(&shape), flat).map_err(|e| Error::shape(e.to_string()))
    }
}

/// The CP tensor whose factors are the point matrices.
pub fn cp_from_points(pointsets: &[PointSet]) -> Result<CPTensor> {
    let m = pointsets.first().map(PointSet::dim).unwrap_or(0);
    if pointsets.iter().any(|p| p.dim() != m) {
        return Err(Error::shape("all point sets must share the ambient dimension"));
    }
    CPTensor::new(pointsets.iter().map(|p| p.points().clone()).collect())
}

/// Entrywise `s`-th power as a CP tensor of width `L^s`.
pub fn cp_hadamard_power(t: &CPTensor, s: usize) -> Result<CPTensor> {
    cp_hadamard_power_with(t, s, &Caps::from_env())
}

pub fn cp_hadamard_power_with(t: &CPTensor, s: usize, caps: &Caps) -> Result<CPTensor> {
    let width = (t.width() as u128).checked_pow(s as u32).unwrap_or(u128::MAX);
    if width > caps.cp_power_width {
        return Err(Error::CapExceeded { what: "CP Hadamard power width".into(), size: width, cap: caps.cp_power_width });
    }
    let factors = t
        .factors
        .iter()
        .map(|f| {
            let copies: Vec<ArrayView2<'_, f64>> = vec![f.view(); s];
            if s == 0 {
                Array2::ones((f.nrows(), 1))
            } else {
                row_kronecker(&copies)
            }
        })
        .collect();
    CPTensor::new(factors)
}
