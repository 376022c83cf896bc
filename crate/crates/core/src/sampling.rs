//! Seeded point sets on balls and spheres.

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Slack allowed on the ball-membership invariant.
pub const RADIUS_SLACK: f64 = 1e-12;

/// `n` points in `R^m`, stored as the rows of an `n x m` matrix, all inside
/// the closed ball of radius `radius_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Array2<f64>,
    radius_bound: f64,
}

impl PointSet {
    pub fn new(points: Array2<f64>, radius_bound: f64) -> Result<Self> {
        let (n, m) = points.dim();
        if n == 0 || m == 0 {
            return Err(Error::invalid("point set needs n >= 1 and m >= 1"));
        }
        if !(radius_bound >= 0.0) || !radius_bound.is_finite() {
            return Err(Error::invalid(format!("radius bound {radius_bound} must be finite and >= 0")));
        }
        for (i, row) in points.axis_iter(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if !norm.is_finite() || norm > radius_bound + RADIUS_SLACK {
                return Err(Error::invalid(format!(
                    "row {i} has norm {norm}, outside the ball of radius {radius_bound}"
                )));
            }
        }
        Ok(PointSet { points, radius_bound })
    }

    /// Wrap points and take the smallest valid radius bound.
    pub fn from_points(points: Array2<f64>) -> Result<Self> {
        let r = points
            .axis_iter(Axis(0))
            .map(|row| row.dot(&row).sqrt())
            .fold(0.0_f64, f64::max);
        Self::new(points, r)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }

    pub fn radius_bound(&self) -> f64 {
        self.radius_bound
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }
}

/// How the second point set of a matrix experiment is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingScheme {
    /// `x` and `y` drawn independently.
    Independent,
    /// `y_i = x_i`.
    Symmetric,
}

impl SamplingScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingScheme::Independent => "independent",
            SamplingScheme::Symmetric => "symmetric",
        }
    }
}

impl std::str::FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "independent" => Ok(SamplingScheme::Independent),
            "symmetric" => Ok(SamplingScheme::Symmetric),
            other => Err(Error::Parse(format!("unknown sampling scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where experiment points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PointDomain {
    /// Uniform in the open unit ball.
    #[default]
    Ball,
    /// Uniform on the unit sphere.
    Sphere,
}

impl PointDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            PointDomain::Ball => "ball",
            PointDomain::Sphere => "sphere",
        }
    }

    /// `n` points in `R^m` from this domain (radius 1).
    pub fn sample(self, seed: u64, n: usize, m: usize) -> Result<PointSet> {
        match self {
            PointDomain::Ball => sample_ball(seed, n, m, 1.0),
            PointDomain::Sphere => sample_sphere(seed, n, m),
        }
    }
}

impl std::str::FromStr for PointDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ball" => Ok(PointDomain::Ball),
            "sphere" => Ok(PointDomain::Sphere),
            other => Err(Error::Parse(format!("unknown point domain `{other}`"))),
        }
    }
}

impl std::fmt::Display for PointDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_counts(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::invalid(format!("need n >= 1 and m >= 1, got n={n}, m={m}")));
    }
    Ok(())
}

/// Fill `dir` with a standard Gaussian vector scaled to unit length,
/// resampling the (probability-zero) all-zero draw.
fn unit_direction(r: &mut rng::Rng, dir: &mut [f64]) {
    loop {
        let mut sq = 0.0;
        for v in dir.iter_mut() {
            *v = r.sample(StandardNormal);
            sq += *v * *v;
        }
        if sq > 0.0 && sq.is_finite() {
            let norm = sq.sqrt();
            dir.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

/// Uniform samples from the open ball of radius `radius` in `R^m`.
///
/// Each row is a uniform direction scaled by `radius * U^(1/m)`, so the
/// cost is `O(nm)` for every `m`.
pub fn sample_ball(seed: u64, n: usize, m: usize, radius: f64) -> Result<PointSet> {
    check_counts(n, m)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let mut r = rng::rng(seed);
    let mut points = Array2::<f64>::zeros((n, m));
    let mut dir = vec![0.0; m];
    let inv_m = 1.0 / m as f64;
    for mut row in points.axis_iter_mut(Axis(0)) {
        unit_direction(&mut r, &mut dir);
        let u: f64 = r.random();
        let scale = radius * u.powf(inv_m);
        row.iter_mut().zip(&dir).for_each(|(p, d)| *p = d * scale);
    }
    Ok(PointSet { points, radius_bound: radius })
}

/// Uniform samples from the unit sphere in `R^m` (normalised Gaussians).
pub fn sample_sphere(seed: u64, n: usize, m: usize) -> Result<PointSet> {
    check_counts(n, m)?;
    let mut r = rng::rng(seed);
    let mut points = Array2::<f64>::zeros((n, m));
    let mut dir = vec![0.0; m];
    for mut row in points.axis_iter_mut(Axis(0)) {
        unit_direction(&mut r, &mut dir);
        row.iter_mut().zip(&dir).for_each(|(p, d)| *p = *d);
    }
    Ok(PointSet { points, radius_bound: 1.0 })
}
