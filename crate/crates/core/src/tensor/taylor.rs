//! Truncated-Taylor TT approximation of `h(<x^(1), ..., x^(d)>)`.

use ndarray::ArrayD;
use rand::Rng as _;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::generators::{Argument, KernelSpec};
use crate::jet::factorial;
use crate::rng;
use crate::taylor::{derivative_sup, taylor_coeffs};
use crate::tensor::cp::{cp_hadamard_power_with, CPTensor};
use crate::tensor::tt::{cp_to_tt_svd, tt_add, tt_hadamard, tt_round, TTTensor};

/// Entries drawn when the dense tensor exceeds the dense cap.
pub const SAMPLED_ENTRIES: usize = 1_000_000;

/// Relative Frobenius tolerance used to strip numerically zero TT ranks.
const ROUND_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    Dense,
    Sampled(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtPowerReport {
    pub power: usize,
    pub coefficient: f64,
    /// CP width `L^s` of the exact power.
    pub cp_width: u128,
    /// False when the power came from repeated Hadamard products with rounding.
    pub exact: bool,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtTaylorReport {
    pub order: usize,
    pub target_rank: usize,
    /// `1 + (t - 1) r`.
    pub rank_budget: usize,
    pub ranks: Vec<usize>,
    /// `prod_j ||X_j||_{2,inf}`, a bound on every entry of the CP tensor.
    pub radius: f64,
    /// `sup |h^(t)| radius^t / t!`.
    pub remainder_bound: f64,
    pub remainder_estimated: bool,
    /// `C e^{-t}`, reported when `t >= e^2 M radius`.
    pub closed_form_remainder: Option<f64>,
    pub in_validity_regime: bool,
    /// Powers with a nonzero coefficient, in increasing order.
    pub powers: Vec<TtPowerReport>,
    /// Powers whose coefficient vanished.
    pub skipped_powers: Vec<usize>,
    pub measurement: Option<Measurement>,
    pub measured_max_error: Option<f64>,
    pub measured_relative_error: Option<f64>,
    /// Max error of the Taylor polynomial itself (dense measurement only).
    pub truncation_error: Option<f64>,
    pub eps: f64,
    /// `measured_relative_error <= eps`.
    pub target_met: Option<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct TtTaylorOptions {
    pub measure: bool,
    pub caps: Caps,
}

impl Default for TtTaylorOptions {
    fn default() -> Self {
        TtTaylorOptions { measure: true, caps: Caps::from_env() }
    }
}

/// TT approximation with ranks at most `1 + (t - 1) r`. `eps` is only compared
/// with the measured error; `seed` drives sampled measurement.
pub fn taylor_tt_approx(
    spec: &KernelSpec,
    p: &CPTensor,
    t: usize,
    r: usize,
    eps: f64,
    seed: u64,
) -> Result<(TTTensor, TtTaylorReport)> {
    taylor_tt_approx_with(spec, p, t, r, eps, seed, &TtTaylorOptions::default())
}

pub fn taylor_tt_approx_with(
    spec: &KernelSpec,
    p: &CPTensor,
    t: usize,
    r: usize,
    eps: f64,
    seed: u64,
    opts: &TtTaylorOptions,
) -> Result<(TTTensor, TtTaylorReport)> {
    if spec.argument() != Argument::InnerProduct {
        return Err(Error::Unsupported(format!("{} is not a function of the inner product", spec.name())));
    }
    if t == 0 || r == 0 {
        return Err(Error::invalid("order and rank must be positive"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let caps = &opts.caps;
    let radius: f64 = p.factor_row_norms().iter().product();
    let domain = spec.domain();
    let slack = 1e-12 * radius.max(1.0);
    if !(domain.lo <= -radius + slack && domain.hi >= radius - slack) {
        let value = if domain.lo > -radius { -radius } else { radius };
        return Err(Error::DomainViolation { value, lo: domain.lo, hi: domain.hi });
    }
    let plan = taylor_coeffs(spec, 0.0, t, Some(radius))?;
    let (sup, remainder_estimated) = derivative_sup(spec, t, -radius, radius)?;
    let remainder_bound = sup * radius.powi(t as i32) / factorial(t);
    let in_validity_regime = spec.growth().is_some_and(|g| t as f64 >= std::f64::consts::E.powi(2) * g.m * radius);
    let closed_form_remainder = spec.growth().filter(|_| in_validity_regime).map(|g| g.c * (-(t as f64)).exp());

    let shape = p.shape();
    let d = shape.len();
    let cap = vec![r; d - 1];
    let coeffs = &plan.coefficients;
    let last_needed = (1..t).rev().find(|&s| coeffs[s] != 0.0);

    let exact_ok = |s: usize| -> bool {
        let width = (p.width() as u128).checked_pow(s as u32).unwrap_or(u128::MAX);
        if width > caps.cp_power_width {
            return false;
        }
        // Largest unfolding formed by the sweep: (min(r, prefix) * n_k) x width.
        let mut prefix = 1u128;
        shape[..d - 1].iter().all(|&n| {
            let rows = prefix.min(r as u128) * n as u128;
            prefix = prefix.saturating_mul(n as u128);
            rows.saturating_mul(width) <= caps.dense_entries
        })
    };
    let exact_power = |s: usize| -> Result<TTTensor> {
        if s == 0 {
            return TTTensor::constant(&shape, 1.0);
        }
        cp_to_tt_svd(&cp_hadamard_power_with(p, s, caps)?, Some(&cap), caps)
    };

    let mut acc = TTTensor::constant(&shape, coeffs[0])?;
    let mut powers = Vec::new();
    let mut skipped = Vec::new();
    let mut base: Option<TTTensor> = None;
    let mut prev: Option<(usize, TTTensor)> = None;
    if let Some(last) = last_needed {
        for s in 1..=last {
            let c = coeffs[s];
            let exact = exact_ok(s);
            let power = if exact {
                if c == 0.0 {
                    None
                } else {
                    Some(exact_power(s)?)
                }
            } else {
                let p1 = match &base {
                    Some(b) => b.clone(),
                    None => {
                        let b = cp_to_tt_svd(p, None, caps)?;
                        base = Some(b.clone());
                        b
                    }
                };
                let before = match prev.take() {
                    Some((k, tt)) if k == s - 1 => tt,
                    _ => exact_power(s - 1)?,
                };
                Some(tt_round(&tt_hadamard(&before, &p1)?, Some(&cap), Some(ROUND_TOL))?)
            };
            if c == 0.0 {
                skipped.push(s);
            }
            if let Some(tt) = power {
                if c != 0.0 {
                    powers.push(TtPowerReport {
                        power: s,
                        coefficient: c,
                        cp_width: (p.width() as u128).checked_pow(s as u32).unwrap_or(u128::MAX),
                        exact,
                        ranks: tt.ranks(),
                    });
                    acc = tt_add(&acc, &tt.clone().scaled(c))?;
                }
                prev = Some((s, tt));
            }
        }
    }
    let rank_budget = 1 + (t - 1) * r;
    let result = tt_round(&acc, Some(&vec![rank_budget; d - 1]), Some(ROUND_TOL))?;

    let mut report = TtTaylorReport {
        order: t,
        target_rank: r,
        rank_budget,
        ranks: result.ranks(),
        radius,
        remainder_bound,
        remainder_estimated,
        closed_form_remainder,
        in_validity_regime,
        powers,
        skipped_powers: skipped,
        measurement: None,
        measured_max_error: None,
        measured_relative_error: None,
        truncation_error: None,
        eps,
        target_met: None,
    };
    if opts.measure {
        measure(spec, p, &result, coeffs, seed, caps, &mut report)?;
    }
    Ok((result, report))
}

fn polynomial(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

fn measure(
    spec: &KernelSpec,
    p: &CPTensor,
    result: &TTTensor,
    coeffs: &[f64],
    seed: u64,
    caps: &Caps,
    report: &mut TtTaylorReport,
) -> Result<()> {
    let clamp = |u: f64| u.clamp(spec.domain().lo, spec.domain().hi);
    let (err, scale) = if p.len() <= caps.dense_entries {
        let args: ArrayD<f64> = p.to_dense_with(caps)?;
        let approx = result.to_dense_with(caps)?;
        let (mut err, mut scale, mut trunc) = (0.0_f64, 0.0_f64, 0.0_f64);
        for (&u, &a) in args.iter().zip(approx.iter()) {
            let f = spec.value(clamp(u))?;
            err = err.max((f - a).abs());
            scale = scale.max(f.abs());
            trunc = trunc.max((f - polynomial(coeffs, u)).abs());
        }
        report.measurement = Some(Measurement::Dense);
        report.truncation_error = Some(trunc);
        (err, scale)
    } else {
        let shape = p.shape();
        let mut g = rng::stream(seed, 0);
        let mut idx = vec![0usize; shape.len()];
        let (mut err, mut scale) = (0.0_f64, 0.0_f64);
        for _ in 0..SAMPLED_ENTRIES {
            for (i, &n) in idx.iter_mut().zip(&shape) {
                *i = g.random_range(0..n);
            }
            let f = spec.value(clamp(p.entry(&idx)))?;
            err = err.max((f - result.entry(&idx)).abs());
            scale = scale.max(f.abs());
        }
        report.measurement = Some(Measurement::Sampled(SAMPLED_ENTRIES));
        (err, scale)
    };
    report.measured_max_error = Some(err);
    if scale > 0.0 {
        let rel = err / scale;
        report.measured_relative_error = Some(rel);
        report.target_met = Some(rel <= report.eps);
    }
    Ok(())
}
