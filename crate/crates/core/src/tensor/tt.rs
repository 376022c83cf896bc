//! Tensor trains: cores `G_k` of shape `r_{k-1} x n_k x r_k`, `r_0 = r_d = 1`.

use ndarray::{s, Array1, Array2, Array3, ArrayD, ArrayView2, Axis, IxDyn};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::cp::CPTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TTTensor {
    cores: Vec<Array3<f64>>,
}

impl TTTensor {
    pub fn new(cores: Vec<Array3<f64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::invalid("a tensor train needs at least one core"));
        }
        if cores[0].dim().0 != 1 || cores[cores.len() - 1].dim().2 != 1 {
            return Err(Error::shape("boundary TT ranks must be 1"));
        }
        for k in 1..cores.len() {
            if cores[k - 1].dim().2 != cores[k].dim().0 {
                return Err(Error::shape(format!("TT ranks disagree between cores {} and {k}", k - 1)));
            }
        }
        Ok(TTTensor { cores })
    }

    /// Rank-one tensor filled with `value`.
    pub fn constant(shape: &[usize], value: f64) -> Result<Self> {
        let d = shape.len();
        let cores = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| Array3::from_elem((1, n, 1), if k == 0 { value } else { 1.0 }))
            .collect::<Vec<_>>();
        if d == 0 {
            return Err(Error::invalid("empty shape"));
        }
        TTTensor::new(cores)
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }

    /// Internal ranks `(r_1, ..., r_{d-1})`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1].iter().map(|c| c.dim().2).collect()
    }

    pub fn len(&self) -> u128 {
        self.shape().iter().fold(1u128, |acc, &n| acc.saturating_mul(n as u128))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.cores[0].mapv_inplace(|v| v * c);
        self
    }

    pub fn entry(&self, idx: &[usize]) -> f64 {
        let mut v: Array1<f64> = self.cores[0].slice(s![0, idx[0], ..]).to_owned();
        for (core, &i) in self.cores[1..].iter().zip(&idx[1..]) {
            let m: ArrayView2<'_, f64> = core.slice(s![.., i, ..]);
            v = m.t().dot(&v);
        }
        v[0]
    }

    pub fn to_dense(&self) -> Result<ArrayD<f64>> {
        self.to_dense_with(&Caps::from_env())
    }

    pub fn to_dense_with(&self, caps: &Caps) -> Result<ArrayD<f64>> {
        caps.check_dense("dense TT tensor", self.len())?;
        let first = &self.cores[0];
        let mut acc = first.index_axis(Axis(0), 0).to_owned();
        for core in &self.cores[1..] {
            let (r0, n, r1) = core.dim();
            let mat = core.view().into_shape_with_order((r0, n * r1)).expect("contiguous core");
            let next = acc.dot(&mat);
            let rows = acc.nrows() * n;
            acc = next.into_shape_with_order((rows, r1)).expect("contiguous product");
        }
        let flat = acc.into_raw_vec_and_offset().0;
        ArrayD::from_shape_vec(IxDyn(&self.shape()), flat).map_err(|e| Error::shape(e.to_string()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        // <T, T> by contracting the core Gram matrices.
        let mut g = Array2::<f64>::ones((1, 1));
        for core in &self.cores {
            let (r0, n, r1) = core.dim();
            let mut next = Array2::<f64>::zeros((r1, r1));
            for i in 0..n {
                let slice = core.slice(s![.., i, ..]);
                next += &slice.t().dot(&g).dot(&slice);
            }
            debug_assert_eq!(g.nrows(), r0);
            g = next;
        }
        g[[0, 0]].max(0.0).sqrt()
    }
}

fn unfold_left(core: &Array3<f64>) -> Array2<f64> {
    let (r0, n, r1) = core.dim();
    core.as_standard_layout().into_owned().into_shape_with_order((r0 * n, r1)).expect("contiguous")
}

fn unfold_right(core: &Array3<f64>) -> Array2<f64> {
    let (r0, n, r1) = core.dim();
    core.as_standard_layout().into_owned().into_shape_with_order((r0, n * r1)).expect("contiguous")
}

fn fold(mat: Array2<f64>, r0: usize, n: usize, r1: usize) -> Array3<f64> {
    mat.as_standard_layout().into_owned().into_shape_with_order((r0, n, r1)).expect("fold sizes")
}

/// Rank chosen from the singular values under a rank cap and an absolute
/// Frobenius tail budget `delta`.
fn choose_rank(s: &[f64], cap: usize, delta: f64) -> usize {
    let mut r = s.len();
    let mut tail = 0.0;
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next.sqrt() > delta {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.min(cap).max(1)
}

fn rank_caps(max_ranks: Option<&[usize]>, d: usize) -> Result<Vec<usize>> {
    match max_ranks {
        Some(r) if r.len() != d - 1 => Err(Error::shape(format!("need {} ranks, got {}", d - 1, r.len()))),
        Some(r) if r.contains(&0) => Err(Error::invalid("TT ranks must be positive")),
        Some(r) => Ok(r.to_vec()),
        None => Ok(vec![usize::MAX; d - 1]),
    }
}

/// Sequential-unfolding SVD. With `tol`, the Frobenius error is at most
/// `tol * ||T||_F`; with `max_ranks`, ranks are capped componentwise.
pub fn tt_svd(t: &ArrayD<f64>, max_ranks: Option<&[usize]>, tol: Option<f64>) -> Result<TTTensor> {
    if max_ranks.is_none() && tol.is_none() {
        return Err(Error::invalid("tt_svd needs max_ranks, tol, or both"));
    }
    let shape = t.shape().to_vec();
    let d = shape.len();
    if d == 0 {
        return Err(Error::invalid("empty tensor"));
    }
    let caps = rank_caps(max_ranks, d)?;
    let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let delta = match tol {
        Some(tol) if d > 1 => tol * norm / ((d - 1) as f64).sqrt(),
        _ => 0.0,
    };
    let mut rest = t.as_standard_layout().iter().cloned().collect::<Vec<_>>();
    let mut r_prev = 1;
    let mut cores = Vec::with_capacity(d);
    for k in 0..d - 1 {
        let rows = r_prev * shape[k];
        let cols = rest.len() / rows;
        let mat = Array2::from_shape_vec((rows, cols), rest).expect("unfolding");
        let svd = linalg::thin_svd(mat.view())?;
        let r = choose_rank(svd.s.as_slice().expect("contiguous"), caps[k], delta).min(svd.s.len());
        cores.push(fold(svd.u.slice(s![.., ..r]).to_owned(), r_prev, shape[k], r));
        let sv = &svd.v.slice(s![.., ..r]).t() * &svd.s.slice(s![..r]).insert_axis(Axis(1));
        rest = sv.as_standard_layout().iter().cloned().collect();
        r_prev = r;
    }
    cores.push(fold(Array2::from_shape_vec((r_prev, shape[d - 1]), rest).expect("last core"), r_prev, shape[d - 1], 1));
    TTTensor::new(cores)
}

/// Right-to-left orthogonalization followed by a left-to-right truncated SVD sweep.
pub fn tt_round(t: &TTTensor, max_ranks: Option<&[usize]>, tol: Option<f64>) -> Result<TTTensor> {
    let d = t.order();
    let caps = rank_caps(max_ranks, d)?;
    let mut cores = t.cores.clone();
    if d == 1 {
        return TTTensor::new(cores);
    }
    for k in (1..d).rev() {
        let (r0, n, r1) = cores[k].dim();
        let mat = unfold_right(&cores[k]);
        let (q, r) = linalg::thin_qr(mat.t());
        let rk = q.ncols();
        cores[k] = fold(q.t().to_owned(), rk, n, r1);
        let (p0, pn, _) = cores[k - 1].dim();
        let prev = unfold_left(&cores[k - 1]).dot(&r.t());
        cores[k - 1] = fold(prev, p0, pn, rk);
        debug_assert!(r0 >= 1);
    }
    let norm = cores[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    let delta = tol.map_or(0.0, |tol| tol * norm / ((d - 1) as f64).sqrt());
    for k in 0..d - 1 {
        let (r0, n, _) = cores[k].dim();
        let svd = linalg::thin_svd(unfold_left(&cores[k]).view())?;
        let r = choose_rank(svd.s.as_slice().expect("contiguous"), caps[k], delta).min(svd.s.len());
        cores[k] = fold(svd.u.slice(s![.., ..r]).to_owned(), r0, n, r);
        let sv = &svd.v.slice(s![.., ..r]).t() * &svd.s.slice(s![..r]).insert_axis(Axis(1));
        let (_, nn, r2) = cores[k + 1].dim();
        let next = sv.dot(&unfold_right(&cores[k + 1]));
        cores[k + 1] = fold(next, r, nn, r2);
    }
    TTTensor::new(cores)
}

/// Exact conversion with diagonal middle cores; all internal ranks equal `L`.
pub fn cp_to_tt(cp: &CPTensor) -> Result<TTTensor> {
    let f = cp.factors();
    let d = f.len();
    let l = cp.width();
    let mut cores = Vec::with_capacity(d);
    cores.push(fold(f[0].clone(), 1, f[0].nrows(), l));
    for x in &f[1..d - 1] {
        let n = x.nrows();
        let mut core = Array3::<f64>::zeros((l, n, l));
        for a in 0..l {
            for i in 0..n {
                core[[a, i, a]] = x[[i, a]];
            }
        }
        cores.push(core);
    }
    let last = &f[d - 1];
    cores.push(fold(last.t().to_owned(), l, last.nrows(), 1));
    TTTensor::new(cores)
}

/// CP to TT by a sequential SVD sweep that never forms the dense tensor.
/// Each mode is absorbed into a coefficient matrix `M_k` (`r_k x L`) and split
/// off by an SVD; singular values below `1e-14` of the largest are dropped and
/// ranks are capped by `max_ranks`. With caps this is TT-SVD of the full tensor.
pub fn cp_to_tt_svd(cp: &CPTensor, max_ranks: Option<&[usize]>, caps: &Caps) -> Result<TTTensor> {
    let f = cp.factors();
    let d = f.len();
    let l = cp.width();
    let rank_cap = rank_caps(max_ranks, d)?;
    let mut coeff = Array2::<f64>::ones((1, l));
    let mut cores = Vec::with_capacity(d);
    for (k, x) in f[..d - 1].iter().enumerate() {
        let (r0, n) = (coeff.nrows(), x.nrows());
        caps.check_dense("CP to TT unfolding", (r0 * n) as u128 * l as u128)?;
        let mut z = Array2::<f64>::zeros((r0 * n, l));
        for a in 0..r0 {
            for i in 0..n {
                let mut row = z.row_mut(a * n + i);
                row.assign(&coeff.row(a));
                row *= &x.row(i);
            }
        }
        let svd = linalg::thin_svd(z.view())?;
        let top = svd.s.first().copied().unwrap_or(0.0);
        let r = svd.s.iter().filter(|&&v| v > 1e-14 * top).count().clamp(1, rank_cap[k]);
        cores.push(fold(svd.u.slice(s![.., ..r]).to_owned(), r0, n, r));
        coeff = &svd.v.slice(s![.., ..r]).t() * &svd.s.slice(s![..r]).insert_axis(Axis(1));
    }
    let last = &f[d - 1];
    let core = coeff.dot(&last.t());
    cores.push(fold(core, coeff.nrows(), last.nrows(), 1));
    TTTensor::new(cores)
}

/// Block-diagonal cores: the result represents `a + b` and ranks add.
pub fn tt_add(a: &TTTensor, b: &TTTensor) -> Result<TTTensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("cannot add TT tensors of shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    let d = a.order();
    if d == 1 {
        return TTTensor::new(vec![&a.cores[0] + &b.cores[0]]);
    }
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let (ca, cb) = (&a.cores[k], &b.cores[k]);
        let (a0, n, a1) = ca.dim();
        let (b0, _, b1) = cb.dim();
        let core = if k == 0 {
            let mut c = Array3::<f64>::zeros((1, n, a1 + b1));
            c.slice_mut(s![.., .., ..a1]).assign(ca);
            c.slice_mut(s![.., .., a1..]).assign(cb);
            c
        } else if k == d - 1 {
            let mut c = Array3::<f64>::zeros((a0 + b0, n, 1));
            c.slice_mut(s![..a0, .., ..]).assign(ca);
            c.slice_mut(s![a0.., .., ..]).assign(cb);
            c
        } else {
            let mut c = Array3::<f64>::zeros((a0 + b0, n, a1 + b1));
            c.slice_mut(s![..a0, .., ..a1]).assign(ca);
            c.slice_mut(s![a0.., .., a1..]).assign(cb);
            c
        };
        cores.push(core);
    }
    TTTensor::new(cores)
}

/// Entrywise product via core-wise Kronecker products; ranks multiply.
pub fn tt_hadamard(a: &TTTensor, b: &TTTensor) -> Result<TTTensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("cannot multiply TT tensors of shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    let cores = a
        .cores
        .iter()
        .zip(&b.cores)
        .map(|(ca, cb)| {
            let (a0, n, a1) = ca.dim();
            let (b0, _, b1) = cb.dim();
            let mut c = Array3::<f64>::zeros((a0 * b0, n, a1 * b1));
            for i in 0..n {
                let sa: ArrayView2<'_, f64> = ca.slice(s![.., i, ..]);
                let sb: ArrayView2<'_, f64> = cb.slice(s![.., i, ..]);
                for p in 0..a0 {
                    for q in 0..a1 {
                        let v = sa[[p, q]];
                        if v == 0.0 {
                            continue;
                        }
                        let mut block = c.slice_mut(s![p * b0..(p + 1) * b0, i, q * b1..(q + 1) * b1]);
                        block.scaled_add(v, &sb);
                    }
                }
            }
            c
        })
        .collect();
    TTTensor::new(cores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::sampling::sample_ball;
    use crate::tensor::cp::cp_from_points;
    use rand_distr::{Distribution, StandardNormal};

    fn random_tt(seed: u64, shape: &[usize], ranks: &[usize]) -> TTTensor {
        let mut r = rng::rng(seed);
        let mut full = vec![1];
        full.extend_from_slice(ranks);
        full.push(1);
        let cores = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| Array3::from_shape_fn((full[k], n, full[k + 1]), |_| StandardNormal.sample(&mut r)))
            .collect();
        TTTensor::new(cores).unwrap()
    }

    fn random_dense(seed: u64, shape: &[usize]) -> ArrayD<f64> {
        let mut r = rng::rng(seed);
        ArrayD::from_shape_fn(IxDyn(shape), |_| StandardNormal.sample(&mut r))
    }

    fn max_diff(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
        a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
    }

    fn fro(a: &ArrayD<f64>) -> f64 {
        a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn outer_product_recovered_with_unit_ranks() {
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, 3.0];
        let w = [2.0, -1.0, 1.0, 4.0];
        let t = ArrayD::from_shape_fn(IxDyn(&[3, 2, 4]), |i| u[i[0]] * v[i[1]] * w[i[2]]);
        let tt = tt_svd(&t, None, Some(1e-12)).unwrap();
        assert_eq!(tt.ranks(), vec![1, 1]);
        assert!(max_diff(&tt.to_dense().unwrap(), &t) < 1e-12);
    }

    #[test]
    fn full_ranks_reconstruct() {
        let t = random_dense(1, &[3, 4, 5, 2]);
        let tt = tt_svd(&t, Some(&[3, 12, 2]), None).unwrap();
        assert!(max_diff(&tt.to_dense().unwrap(), &t) < 1e-10);
        assert!(tt_svd(&t, None, None).is_err());
    }

    #[test]
    fn tolerance_bounds_frobenius_error() {
        let t = random_dense(2, &[4, 4, 4]);
        for tol in [0.1, 0.3, 0.6] {
            let tt = tt_svd(&t, None, Some(tol)).unwrap();
            let err = fro(&(&tt.to_dense().unwrap() - &t));
            assert!(err <= tol * fro(&t) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cp_width_bounds_tt_rank() {
        let ps: Vec<_> = (0..3).map(|s| sample_ball(s, 5, 2, 1.0).unwrap()).collect();
        let dense = cp_from_points(&ps).unwrap().to_dense().unwrap();
        let tt = tt_svd(&dense, None, Some(1e-12)).unwrap();
        assert!(tt.ranks().iter().all(|&r| r <= 2));
    }

    #[test]
    fn cp_conversions_are_exact() {
        for (seed, width) in [(1u64, 1usize), (2, 3), (3, 5)] {
            let ps: Vec<_> = (0..4).map(|s| sample_ball(seed * 10 + s, 3 + s as usize, width, 1.0).unwrap()).collect();
            let cp = cp_from_points(&ps).unwrap();
            let dense = cp.to_dense().unwrap();
            let a = cp_to_tt(&cp).unwrap();
            assert!(a.ranks().iter().all(|&r| r == width));
            assert!(max_diff(&a.to_dense().unwrap(), &dense) < 1e-10);
            let b = cp_to_tt_svd(&cp, None, &Caps::default()).unwrap();
            assert!(b.ranks().iter().all(|&r| r <= width));
            assert!(max_diff(&b.to_dense().unwrap(), &dense) < 1e-10);
        }
    }

    #[test]
    fn matrix_cp_to_tt_is_the_factorization() {
        let x = sample_ball(5, 4, 2, 1.0).unwrap();
        let y = sample_ball(6, 3, 2, 1.0).unwrap();
        let tt = cp_to_tt(&cp_from_points(&[x.clone(), y.clone()]).unwrap()).unwrap();
        assert_eq!(tt.cores()[0].index_axis(Axis(0), 0), x.points().view());
        assert_eq!(tt.cores()[1].index_axis(Axis(2), 0), y.points().t());
    }

    #[test]
    fn addition_examples() {
        let a = random_tt(3, &[3, 4, 2], &[2, 3]);
        let zero = TTTensor::constant(&[3, 4, 2], 0.0).unwrap();
        let s = tt_add(&a, &zero).unwrap();
        assert_eq!(s.ranks(), vec![3, 4]);
        assert!(max_diff(&s.to_dense().unwrap(), &a.to_dense().unwrap()) < 1e-14);
        let cancel = tt_add(&a, &a.clone().scaled(-1.0)).unwrap();
        assert!(cancel.to_dense().unwrap().iter().all(|v| v.abs() < 1e-12));
        let b = random_tt(4, &[3, 4, 2], &[1, 2]);
        let sum = tt_add(&a, &b).unwrap();
        assert_eq!(sum.ranks(), vec![3, 5]);
        let expect = &a.to_dense().unwrap() + &b.to_dense().unwrap();
        assert!(max_diff(&sum.to_dense().unwrap(), &expect) < 1e-10);
        assert!(tt_add(&a, &random_tt(4, &[3, 4, 3], &[1, 2])).is_err());
    }

    #[test]
    fn hadamard_multiplies_entries() {
        let a = random_tt(5, &[2, 3, 2], &[2, 2]);
        let b = random_tt(6, &[2, 3, 2], &[3, 1]);
        let h = tt_hadamard(&a, &b).unwrap();
        assert_eq!(h.ranks(), vec![6, 2]);
        let expect = &a.to_dense().unwrap() * &b.to_dense().unwrap();
        assert!(max_diff(&h.to_dense().unwrap(), &expect) < 1e-12);
    }

    #[test]
    fn rounding_examples() {
        let a = random_tt(7, &[3, 4, 3, 2], &[2, 3, 2]);
        let r = tt_round(&a, Some(&[5, 5, 5]), None).unwrap();
        assert!(max_diff(&r.to_dense().unwrap(), &a.to_dense().unwrap()) < 1e-10);
        let one = random_tt(8, &[3, 3, 3], &[1, 1]);
        let r = tt_round(&one, Some(&[1, 1]), None).unwrap();
        assert!(max_diff(&r.to_dense().unwrap(), &one.to_dense().unwrap()) < 1e-12);
    }

    #[test]
    fn rank_one_rounding_is_quasi_optimal() {
        let t = random_dense(9, &[3, 3, 3]);
        let tt = tt_svd(&t, Some(&[3, 3]), None).unwrap();
        let r = tt_round(&tt, Some(&[1, 1]), None).unwrap();
        let err = fro(&(&r.to_dense().unwrap() - &t));
        // Unfolding tails lower-bound the best rank-(1, 1) error.
        let mut lower = 0.0_f64;
        for split in [3usize, 9] {
            let mat = t.as_standard_layout().into_owned().into_shape_with_order((split, 27 / split)).unwrap();
            let s = linalg::thin_svd(mat.view()).unwrap().s;
            lower = lower.max(s.iter().skip(1).map(|v| v * v).sum::<f64>().sqrt());
        }
        assert!(err <= 2f64.sqrt() * lower * (1.0 + 1e-10), "err {err} lower {lower}");
    }

    #[test]
    fn frobenius_norm_matches_dense() {
        let a = random_tt(10, &[3, 2, 4], &[2, 3]);
        assert!((a.frobenius_norm() - fro(&a.to_dense().unwrap())).abs() < 1e-10);
    }

    #[test]
    fn entries_match_dense() {
        let a = random_tt(11, &[3, 2, 4], &[2, 3]);
        let d = a.to_dense().unwrap();
        assert!((a.entry(&[2, 1, 3]) - d[[2, 1, 3]]).abs() < 1e-12);
    }
}
