//! Random Fourier features for shift-invariant positive-definite kernels.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::generators::{KernelFamily, KernelSpec};
use crate::jl::{self, CompressionReport, JlOptions};
use crate::lowrank::{max_norm, max_norm_error, Factorization};
use crate::rng;
use crate::sampling::PointSet;

/// Spectral law of a supported kernel `kappa` with `kappa(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralLaw {
    /// `exp(-||d||^2)`: `omega ~ N(0, 2 I)`.
    Gaussian,
    /// `exp(-||d||)`: multivariate Cauchy, `omega = z / |g|`.
    MultivariateCauchy,
    /// `prod_k 1 / (1 + d_k^2)`: independent Laplace(0, 1) coordinates.
    Laplace,
}

impl SpectralLaw {
    pub fn of(spec: &KernelSpec) -> Result<SpectralLaw> {
        match spec.family() {
            KernelFamily::GaussSqDist => Ok(SpectralLaw::Gaussian),
            KernelFamily::ExpDist => Ok(SpectralLaw::MultivariateCauchy),
            KernelFamily::Cauchy => Ok(SpectralLaw::Laplace),
            KernelFamily::QuarticDist => Err(Error::Unsupported(
                "exp(-||x-y||^4) is not a positive-definite kernel (Schoenberg's criterion fails), \
                 so random Fourier features do not apply"
                    .into(),
            )),
            _ => Err(Error::Unsupported(format!(
                "{} is not a supported shift-invariant positive-definite kernel",
                spec.name()
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpectralLaw::Gaussian => "gaussian",
            SpectralLaw::MultivariateCauchy => "multivariate_cauchy",
            SpectralLaw::Laplace => "laplace",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySet {
    /// `rho x m`, one frequency per row.
    pub omegas: Array2<f64>,
    pub law: SpectralLaw,
}

impl FrequencySet {
    pub fn len(&self) -> usize {
        self.omegas.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.nrows() == 0
    }
}

pub fn sample_frequencies(spec: &KernelSpec, m: usize, rho: usize, seed: u64) -> Result<FrequencySet> {
    let law = SpectralLaw::of(spec)?;
    if rho == 0 || m == 0 {
        return Err(Error::invalid(format!("need rho >= 1 and m >= 1, got rho={rho}, m={m}")));
    }
    let mut r = rng::rng(seed);
    let mut omegas = Array2::<f64>::zeros((rho, m));
    for mut row in omegas.axis_iter_mut(Axis(0)) {
        match law {
            SpectralLaw::Gaussian => {
                let sd = std::f64::consts::SQRT_2;
                row.iter_mut().for_each(|v| *v = sd * normal(&mut r));
            }
            SpectralLaw::MultivariateCauchy => {
                let g = normal(&mut r);
                let scale = g.abs().recip();
                row.iter_mut().for_each(|v| *v = scale * normal(&mut r));
            }
            SpectralLaw::Laplace => {
                row.iter_mut().for_each(|v| {
                    let e: f64 = Exp1.sample(&mut r);
                    *v = if r.random::<bool>() { e } else { -e };
                });
            }
        }
    }
    Ok(FrequencySet { omegas, law })
}

fn normal(r: &mut rng::Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Interleaved `cos(omega_k^T x), sin(omega_k^T x)` columns scaled by `1 / sqrt(rho)`.
pub fn features(freqs: &FrequencySet, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if points.ncols() != freqs.omegas.ncols() {
        return Err(Error::shape(format!(
            "points live in R^{} but frequencies in R^{}",
            points.ncols(),
            freqs.omegas.ncols()
        )));
    }
    let rho = freqs.len();
    let phase = points.dot(&freqs.omegas.t());
    let scale = (rho as f64).sqrt().recip();
    let mut out = Array2::<f64>::zeros((points.nrows(), 2 * rho));
    for ((i, k), &p) in phase.indexed_iter() {
        let (s, c) = p.sin_cos();
        out[[i, 2 * k]] = c * scale;
        out[[i, 2 * k + 1]] = s * scale;
    }
    Ok(out)
}

pub fn rff_factorization(freqs: &FrequencySet, x: &PointSet, y: &PointSet) -> Result<Factorization> {
    Factorization::new(features(freqs, x.points().view())?, features(freqs, y.points().view())?)
}

/// Pairs compared exactly when probing the feature error; larger problems
/// are probed on a random subset of [`PROBE_SAMPLE`] pairs.
pub const PROBE_EXHAUSTIVE: usize = 1 << 20;
pub const PROBE_SAMPLE: usize = 1 << 16;

#[derive(Debug, Clone, Copy)]
pub struct RffOptions {
    /// Fraction of `eps` given to the sketch; the features get `(1 - theta) eps`.
    pub theta: f64,
    pub initial_rho: usize,
    pub max_rho: usize,
    pub max_attempts: usize,
    pub jl: JlOptions,
}

impl Default for RffOptions {
    fn default() -> Self {
        RffOptions {
            theta: 0.5,
            initial_rho: 16,
            max_rho: 1 << 16,
            max_attempts: jl::DEFAULT_MAX_ATTEMPTS,
            jl: JlOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RffReport {
    pub rho: usize,
    pub law: SpectralLaw,
    /// Feature error on the probe pairs.
    pub feature_error: f64,
    pub probe_pairs: usize,
    pub feature_target: f64,
    pub compression: CompressionReport,
    pub certified: bool,
    pub measured_max_error: Option<f64>,
    pub measured_relative_error: Option<f64>,
}

pub fn rff_then_compress(
    spec: &KernelSpec,
    x: &PointSet,
    y: &PointSet,
    rho: Option<usize>,
    eps: f64,
    seed: u64,
) -> Result<(Factorization, RffReport)> {
    rff_then_compress_with(spec, x, y, rho, eps, seed, &RffOptions::default())
}

pub fn rff_then_compress_with(
    spec: &KernelSpec,
    x: &PointSet,
    y: &PointSet,
    rho: Option<usize>,
    eps: f64,
    seed: u64,
    opts: &RffOptions,
) -> Result<(Factorization, RffReport)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::invalid(format!("theta must lie in (0, 1], got {}", opts.theta)));
    }
    if x.dim() != y.dim() {
        return Err(Error::shape(format!("point dimensions {} and {} differ", x.dim(), y.dim())));
    }
    let law = SpectralLaw::of(spec)?;
    let feature_target = (1.0 - opts.theta) * eps;
    let probe = Probe::new(spec, x, y, rng::split_seed(seed, &[2]))?;

    let mut current = match (rho, opts.theta == 1.0) {
        (Some(r), _) => r,
        (None, true) => return Err(Error::invalid("theta = 1 leaves no feature budget; pass rho explicitly")),
        (None, false) => opts.initial_rho,
    };
    if current == 0 {
        return Err(Error::invalid("rho must be positive"));
    }
    let (features, feature_error) = loop {
        let freqs = sample_frequencies(spec, x.dim(), current, rng::split_seed(seed, &[0, current as u64]))?;
        let f = rff_factorization(&freqs, x, y)?;
        let err = probe.error(&f);
        let done = rho.is_some() || err <= feature_target || current >= opts.max_rho;
        if done {
            break (f, err);
        }
        current = (current * 2).min(opts.max_rho);
    };

    let jl_opts = JlOptions { max_attempts: opts.max_attempts, ..opts.jl };
    let (g, compression) = jl::jl_compress_with(&features, opts.theta * eps, rng::split_seed(seed, &[1]), &jl_opts)?;

    let (measured_max_error, measured_relative_error) = match &probe.dense {
        Some(f) => {
            let e = max_norm_error(f, &g)?;
            let s = max_norm(f.view());
            (Some(e), (s > 0.0).then(|| e / s))
        }
        None => (None, None),
    };
    let certified = compression.certified && feature_error <= feature_target && probe.exhaustive;
    let report = RffReport {
        rho: current,
        law,
        feature_error,
        probe_pairs: probe.pairs(),
        feature_target,
        compression,
        certified,
        measured_max_error,
        measured_relative_error,
    };
    Ok((g, report))
}

struct Probe {
    dense: Option<Array2<f64>>,
    sample: Vec<(usize, usize, f64)>,
    exhaustive: bool,
}

impl Probe {
    fn new(spec: &KernelSpec, x: &PointSet, y: &PointSet, seed: u64) -> Result<Self> {
        let total = x.len() * y.len();
        if total <= PROBE_EXHAUSTIVE {
            let f = crate::generators::eval_kernel_matrix(
                spec,
                crate::sampling::SamplingScheme::Independent,
                x,
                Some(y),
            )?;
            return Ok(Probe { dense: Some(f), sample: Vec::new(), exhaustive: true });
        }
        let mut r = rng::rng(seed);
        let sample = (0..PROBE_SAMPLE)
            .map(|_| {
                let i = r.random_range(0..x.len());
                let j = r.random_range(0..y.len());
                spec.eval_pair(x.row(i), y.row(j)).map(|v| (i, j, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Probe { dense: None, sample, exhaustive: false })
    }

    fn pairs(&self) -> usize {
        self.dense.as_ref().map_or(self.sample.len(), |d| d.len())
    }

    fn error(&self, f: &Factorization) -> f64 {
        match &self.dense {
            Some(d) => max_norm_error(d, f).expect("shapes agree"),
            None => self.sample.iter().fold(0.0_f64, |acc, &(i, j, v)| acc.max((f.entry(i, j) - v).abs())),
        }
    }
}
