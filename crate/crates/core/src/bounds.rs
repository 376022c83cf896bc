//! Closed-form rank bounds, their pairwise comparisons and the three-stage
//! profile of the sample-size dependence.

use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::jl::rank_formula;
use crate::multiindex::count_multiindices_big;

/// An integer bound, or a flag that it does not fit in `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundValue {
    Finite(u64),
    Overflow,
}

impl BoundValue {
    fn from_f64(v: f64) -> Self {
        let c = v.ceil();
        if c.is_finite() && c >= 0.0 && c < u64::MAX as f64 {
            BoundValue::Finite(c as u64)
        } else {
            BoundValue::Overflow
        }
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            BoundValue::Finite(v) => Some(v),
            BoundValue::Overflow => None,
        }
    }
}

impl fmt::Display for BoundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundValue::Finite(v) => write!(f, "{v}"),
            BoundValue::Overflow => f.write_str("overflow"),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticalBound {
    /// `ceil(max(ln(C / eps), e^2 m M))`.
    pub rho_star: u64,
    /// `binom(m + rho_star - 1, m)`.
    pub rank: BoundValue,
    pub rank_exact: BigUint,
    /// `e^(m + rho_star - 1)`, the looser chain estimate of the binomial.
    pub chain_estimate: f64,
}

pub fn analytical_rank_bound(m: usize, c: f64, big_m: f64, eps: f64) -> Result<AnalyticalBound> {
    check_eps(eps)?;
    if m == 0 || !(c > 0.0) || !(big_m > 0.0) {
        return Err(Error::invalid("need m >= 1, C > 0 and M > 0"));
    }
    let rho = (c / eps).ln().max(std::f64::consts::E.powi(2) * m as f64 * big_m).ceil();
    if !(rho < u64::MAX as f64) {
        return Err(Error::Overflow(format!("rho* = {rho} does not fit in u64")));
    }
    let rho_star = (rho as u64).max(1);
    let rank_exact = count_multiindices_big(m, rho_star as usize)?;
    let rank = rank_exact.to_u64().map_or(BoundValue::Overflow, BoundValue::Finite);
    Ok(AnalyticalBound { rho_star, rank, rank_exact, chain_estimate: ((m as u64 + rho_star - 1) as f64).exp() })
}

/// `ceil(8 ln(n1 + n2 + 1) (1 + 2 (Cu + Cv + 1) / eps)^2)`; `eps = 1` is
/// accepted as the closed end of the range.
pub fn ut_bound(n1: u64, n2: u64, eps: f64, cu: f64, cv: f64) -> Result<BoundValue> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(cu >= 0.0 && cv >= 0.0) {
        return Err(Error::invalid("Cu and Cv must be nonnegative"));
    }
    let log = ((n1 as f64) + (n2 as f64) + 1.0).ln();
    let factor = 1.0 + 2.0 * (cu + cv + 1.0) / eps;
    Ok(BoundValue::from_f64(8.0 * log * factor * factor))
}

/// `ceil(9 ln(3 n1 n2) C^2 / eps^2 e^(m (1 + M^2)))`; `m = 0` is allowed.
pub fn ut_tighter_bound(n1: u64, n2: u64, eps: f64, c: f64, big_m: f64, m: usize) -> Result<BoundValue> {
    check_eps(eps)?;
    if n1 == 0 || n2 == 0 || !(c > 0.0) || !(big_m >= 0.0) {
        return Err(Error::invalid("need n1, n2 >= 1, C > 0 and M >= 0"));
    }
    let log = 3f64.ln() + (n1 as f64).ln() + (n2 as f64).ln();
    let exponent = m as f64 * (1.0 + big_m * big_m);
    Ok(BoundValue::from_f64(9.0 * log * c * c / (eps * eps) * exponent.exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundComparison {
    /// `m >= 2` and `M < (m^2 - e) / e^3`.
    pub ut_always_looser: bool,
    /// `e^(M^2) > 1 + e^2 M`.
    pub ut_tighter_always_looser: bool,
}

pub fn compare_bounds(m: usize, big_m: f64) -> Result<BoundComparison> {
    if m == 0 || !(big_m > 0.0) {
        return Err(Error::invalid("need m >= 1 and M > 0"));
    }
    let e = std::f64::consts::E;
    let mf = m as f64;
    Ok(BoundComparison {
        ut_always_looser: m >= 2 && big_m < (mf * mf - e) / e.powi(3),
        ut_tighter_always_looser: (big_m * big_m).exp() > 1.0 + e * e * big_m,
    })
}

/// Positive root of `e^(M^2) = 1 + e^2 M`, by bisection on `[1, 2]` to `tol`.
pub fn ut_tighter_crossing(tol: f64) -> f64 {
    let g = |x: f64| (x * x).exp() - 1.0 - std::f64::consts::E.powi(2) * x;
    let (mut lo, mut hi) = (1.0, 2.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Linear,
    Logarithmic,
    Constant,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Linear => "linear",
            Stage::Logarithmic => "logarithmic",
            Stage::Constant => "constant",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileRow {
    pub n: u64,
    pub r_formula: u64,
    /// `min(n, r_formula, beta2)`.
    pub r_n: u64,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageProfile {
    pub rows: Vec<ProfileRow>,
    /// Smallest `n` with `rank_formula(eps, n, n) < n`.
    pub stage2_onset: u64,
}

/// Smallest `n` with `rank_formula(eps, n, n) < n`.
pub fn stage2_onset(eps: f64) -> Result<u64> {
    check_eps(eps)?;
    // n - rank_formula(eps, n, n) is increasing once positive, so bisect.
    let below = |n: u64| -> Result<bool> { Ok(rank_formula(eps, n, n)? < n) };
    let mut hi = 2u64;
    while !below(hi)? {
        hi = hi.checked_mul(2).ok_or_else(|| Error::Overflow("stage-2 onset beyond u64".into()))?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Stage labels take the minimising term, ties resolved as
/// linear before logarithmic before constant.
pub fn three_stage_profile(eps: f64, n_grid: &[u64], beta2: Option<u64>) -> Result<StageProfile> {
    check_eps(eps)?;
    let rows = n_grid
        .iter()
        .map(|&n| {
            let r_formula = rank_formula(eps, n, n)?;
            let mut best = (n, Stage::Linear);
            if r_formula < best.0 {
                best = (r_formula, Stage::Logarithmic);
            }
            if let Some(b) = beta2 {
                if b < best.0 {
                    best = (b, Stage::Constant);
                }
            }
            Ok(ProfileRow { n, r_formula, r_n: best.0, stage: best.1 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StageProfile { rows, stage2_onset: stage2_onset(eps)? })
}
