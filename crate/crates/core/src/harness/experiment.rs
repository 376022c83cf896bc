//! Grid sweeps over the experiment protocol and the bound table.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::altproj::{run_trials, AltProjConfig, TestFunction, TrialProblem};
use crate::bounds::{analytical_rank_bound, three_stage_profile, ut_bound, ut_tighter_bound, BoundValue, Stage};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::generators::KernelSpec;
use crate::harness::config::{Algorithm, ExperimentConfig, ExperimentKind};
use crate::harness::record::{format_float, write_records, ExperimentRecord, TrialTag, SCHEMA_HEADER};
use crate::rff::rff_then_compress;
use crate::rng::split_seed;
use crate::sampling::{PointDomain, PointSet, SamplingScheme};
use crate::stats::median;
use crate::taylor::{
    approx_inner_product_with, approx_sq_distance_local_with, approx_sq_distance_with, default_order, TaylorOptions,
};
use crate::tensor::{cp_from_points, taylor_tt_approx_with, TtTaylorOptions};

/// Median of one algorithm at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub algorithm: Algorithm,
    pub median: f64,
    pub baseline_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub summaries: Vec<PointSummary>,
}

/// One row of the bound table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub n: u64,
    pub r_formula: u64,
    pub r_analytical: BoundValue,
    pub r_ut: BoundValue,
    pub r_ut_tighter: BoundValue,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsInputs {
    pub eps: f64,
    pub m: usize,
    pub c: f64,
    pub big_m: f64,
    pub cu: f64,
    pub cv: f64,
    pub beta2: Option<u64>,
}

impl BoundsInputs {
    /// Fill unset constants from the function's growth and `Cu = Cv = C^2 m^m`.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let growth = cfg.function.spec().growth();
        let c = cfg.growth_c.or(growth.map(|g| g.c));
        let big_m = cfg.growth_m.or(growth.map(|g| g.m));
        let (Some(c), Some(big_m)) = (c, big_m) else {
            return Err(Error::invalid(format!(
                "{} has no growth constants; set growth_c and growth_m",
                cfg.function
            )));
        };
        let m = cfg.m[0];
        let lvm = c * c * (m as f64).powf(m as f64);
        Ok(BoundsInputs { eps: cfg.eps, m, c, big_m, cu: cfg.cu.unwrap_or(lvm), cv: cfg.cv.unwrap_or(lvm), beta2: cfg.beta2 })
    }
}

/// Every closed-form bound at each `n` (with `n1 = n2 = n`).
pub fn bounds_table(inputs: &BoundsInputs, n_grid: &[u64]) -> Result<Vec<BoundsRow>> {
    let analytical = analytical_rank_bound(inputs.m, inputs.c, inputs.big_m, inputs.eps)?.rank;
    let profile = three_stage_profile(inputs.eps, n_grid, inputs.beta2)?;
    profile
        .rows
        .iter()
        .map(|row| {
            Ok(BoundsRow {
                n: row.n,
                r_formula: row.r_formula,
                r_analytical: analytical,
                r_ut: ut_bound(row.n, row.n, inputs.eps, inputs.cu, inputs.cv)?,
                r_ut_tighter: ut_tighter_bound(row.n, row.n, inputs.eps, inputs.c, inputs.big_m, inputs.m)?,
                stage: row.stage,
            })
        })
        .collect()
}

pub fn write_bounds_table<W: Write>(mut w: W, rows: &[BoundsRow]) -> Result<()> {
    writeln!(w, "{SCHEMA_HEADER}")?;
    writeln!(w, "n,r_formula,r_analytical,r_ut,r_ut_tighter,stage")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.n, r.r_formula, r.r_analytical, r.r_ut, r.r_ut_tighter, r.stage)?;
    }
    Ok(())
}

struct Measured {
    relative_error: f64,
    rank: usize,
    bound: Option<f64>,
}

fn measured(v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Unsupported("measuring the error needs the dense matrix under the dense cap".into()))
}

/// Run one constructive algorithm on the points of one trial.
fn constructive(cfg: &ExperimentConfig, problem: &TrialProblem, alg: Algorithm, ps: &[PointSet], r: usize, seed: u64, caps: &Caps) -> Result<Measured> {
    let eps = cfg.eps;
    let mut topts = TaylorOptions::with_order(cfg.order);
    topts.jl.caps = *caps;
    let x = &ps[0];
    let y = ps.get(1).unwrap_or(x);
    match (alg, problem.function) {
        (Algorithm::Tt, TestFunction::F3) => {
            let t = cfg.order.unwrap_or_else(|| default_order(eps));
            let cp = cp_from_points(ps)?;
            let opts = TtTaylorOptions { caps: *caps, ..TtTaylorOptions::default() };
            let (_, rep) = taylor_tt_approx_with(&problem.function.spec(), &cp, t, r, eps, seed, &opts)?;
            Ok(Measured { relative_error: measured(rep.measured_relative_error)?, rank: r, bound: None })
        }
        (Algorithm::Taylor, TestFunction::F3) | (Algorithm::Rff, TestFunction::F3) => {
            Err(Error::Unsupported(format!("{alg} works on matrices; use tt for f3")))
        }
        (Algorithm::Tt, f) => Err(Error::Unsupported(format!("tt works on the order-3 tensor f3, not {f}"))),
        (Algorithm::Taylor, f) => {
            let (fac, rep) = match (f, problem.domain) {
                (TestFunction::Gauss, PointDomain::Sphere) => {
                    approx_inner_product_with(&KernelSpec::gaussian_on_sphere(), x, None, y, eps, seed, &topts)?
                }
                (TestFunction::Gauss, PointDomain::Ball) => {
                    approx_sq_distance_with(&f.spec(), x, None, y, eps, seed, &topts)?
                }
                _ => approx_sq_distance_local_with(&f.spec(), x, None, y, eps, seed, &topts)?,
            };
            Ok(Measured {
                relative_error: measured(rep.measured_relative_error)?,
                rank: fac.width().max(1),
                bound: Some(rep.bound),
            })
        }
        (Algorithm::Rff, f) => {
            let (fac, rep) = rff_then_compress(&f.spec(), x, y, None, eps, seed)?;
            Ok(Measured { relative_error: measured(rep.measured_relative_error)?, rank: fac.width().max(1), bound: None })
        }
        (Algorithm::AltProj | Algorithm::TsvdBaseline, _) => unreachable!("handled by run_trials"),
    }
}

struct Point {
    n: usize,
    m: usize,
    r: usize,
}

fn run_point(cfg: &ExperimentConfig, p: &Point, caps: &Caps) -> Result<(Vec<ExperimentRecord>, Vec<PointSummary>)> {
    let seed = cfg.seed()?;
    let scheme = if cfg.function.is_tensor() { SamplingScheme::Independent } else { cfg.scheme };
    let problem = TrialProblem { function: cfg.function, scheme, domain: cfg.domain, n: p.n, m: p.m };
    let row = |trial: TrialTag, seed: Option<u64>, algorithm: Algorithm, r: usize, err: f64| ExperimentRecord {
        experiment: cfg.experiment,
        function: cfg.function,
        scheme,
        n: p.n,
        m: p.m,
        r,
        trial,
        seed,
        algorithm,
        relative_max_error: err,
        baseline_relative_max_error: None,
        bound: None,
        wall_time_s: None,
    };
    let time = |s: f64| cfg.timing.then_some(s);
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &alg in &cfg.algorithms {
        if alg == Algorithm::AltProj {
            let solver = AltProjConfig { seed, ..cfg.solver };
            let summary = run_trials(&problem, p.r, &solver, cfg.trials, caps)?;
            for t in &summary.trials {
                records.push(ExperimentRecord {
                    wall_time_s: time(t.altproj_seconds),
                    ..row(TrialTag::Index(t.trial), Some(t.seed), Algorithm::AltProj, p.r, t.relative_error)
                });
            }
            for t in &summary.trials {
                if let Some(b) = t.baseline_relative_error {
                    records.push(ExperimentRecord {
                        wall_time_s: t.baseline_seconds.and_then(time),
                        ..row(TrialTag::Index(t.trial), Some(t.seed), Algorithm::TsvdBaseline, p.r, b)
                    });
                }
            }
            records.push(ExperimentRecord {
                baseline_relative_max_error: summary.baseline_median,
                ..row(TrialTag::Median, None, Algorithm::AltProj, p.r, summary.median)
            });
            summaries.push(PointSummary {
                n: p.n,
                m: p.m,
                r: p.r,
                algorithm: alg,
                median: summary.median,
                baseline_median: summary.baseline_median,
            });
            continue;
        }
        let trials = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<(ExperimentRecord, f64, usize)> {
                // Same trial seeds, hence the same points, as the altproj rows.
                let trial_seed = split_seed(seed, &[trial as u64]);
                let ps = problem.points(trial_seed)?;
                let start = Instant::now();
                let out = constructive(cfg, &problem, alg, &ps, p.r, split_seed(trial_seed, &[4]), caps)?;
                let rec = ExperimentRecord {
                    bound: out.bound,
                    wall_time_s: time(start.elapsed().as_secs_f64()),
                    ..row(TrialTag::Index(trial), Some(trial_seed), alg, out.rank, out.relative_error)
                };
                Ok((rec, out.relative_error, out.rank))
            })
            .collect::<Result<Vec<_>>>()?;
        let errs: Vec<f64> = trials.iter().map(|t| t.1).collect();
        let med = median(&errs)?;
        let max_rank = trials.iter().map(|t| t.2).max().unwrap_or(p.r);
        records.extend(trials.into_iter().map(|t| t.0));
        records.push(row(TrialTag::Median, None, alg, max_rank, med));
        summaries.push(PointSummary { n: p.n, m: p.m, r: max_rank, algorithm: alg, median: med, baseline_median: None });
    }
    Ok((records, summaries))
}

/// Sweep the grid (varm/varr/varn/single). Grid points run concurrently;
/// output order is (n, m, r, algorithm, trial) regardless of completion order.
pub fn run_experiment(cfg: &ExperimentConfig, caps: &Caps) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::Bounds {
        return Err(Error::invalid("the bounds experiment writes a bound table; use bounds_table"));
    }
    let points: Vec<Point> = cfg
        .n
        .iter()
        .flat_map(|&n| cfg.m.iter().flat_map(move |&m| cfg.r.iter().map(move |&r| Point { n, m, r })))
        .collect();
    let work = || points.par_iter().map(|p| run_point(cfg, p, caps)).collect::<Result<Vec<_>>>();
    let parts = match cfg.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Backend(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut out = ExperimentOutput { records: Vec::new(), summaries: Vec::new() };
    for (r, s) in parts {
        out.records.extend(r);
        out.summaries.extend(s);
    }
    Ok(out)
}

/// Run whatever the config asks for and write its CSV to `w`.
pub fn run_to_writer<W: Write>(cfg: &ExperimentConfig, caps: &Caps, w: W) -> Result<Option<ExperimentOutput>> {
    if cfg.experiment == ExperimentKind::Bounds {
        cfg.validate()?;
        let inputs = BoundsInputs::from_config(cfg)?;
        let grid: Vec<u64> = cfg.n.iter().map(|&n| n as u64).collect();
        write_bounds_table(w, &bounds_table(&inputs, &grid)?)?;
        return Ok(None);
    }
    let out = run_experiment(cfg, caps)?;
    write_records(w, &out.records)?;
    Ok(Some(out))
}

/// One line per summary, for terminals.
pub fn format_summary(s: &PointSummary) -> String {
    let mut line = format!("n={} m={} r={} {} median={}", s.n, s.m, s.r, s.algorithm, format_float(s.median));
    if let Some(b) = s.baseline_median {
        line.push_str(&format!(" tsvd_median={} ratio={:.3}", format_float(b), b / s.median.max(f64::MIN_POSITIVE)));
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: &str, extra: &str) -> ExperimentConfig {
        let text = format!(
            "experiment = {kind}\nseed = 11\nn = 24\nm = 3\nr = 2\ntrials = 3\nmax_iters = 200\n\
             tol = 0.05\nbisection_steps = 6\nprojection = exact\n"
        );
        let mut cfg = ExperimentConfig::parse(&text).unwrap();
        for line in extra.lines() {
            let (k, v) = line.split_once('=').unwrap();
            cfg.set(k.trim(), v).unwrap();
        }
        cfg
    }

    #[test]
    fn row_accounting_for_varm() {
        let cfg = small("varm", "m = 2, 3, 4\n");
        let out = run_experiment(&cfg, &Caps::default()).unwrap();
        let count = |a: Algorithm, median: bool| {
            out.records.iter().filter(|r| r.algorithm == a && (r.trial == TrialTag::Median) == median).count()
        };
        assert_eq!(count(Algorithm::AltProj, false), 9);
        assert_eq!(count(Algorithm::TsvdBaseline, false), 9);
        assert_eq!(count(Algorithm::AltProj, true), 3);
        assert_eq!(out.records.len(), 21);
        assert_eq!(out.summaries.len(), 3);
        assert!(out.records.iter().all(|r| r.wall_time_s.is_none()));
    }

    #[test]
    fn identical_configs_give_identical_bytes() {
        let cfg = small("single", "jobs = 2\n");
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_to_writer(&cfg, &Caps::default(), &mut a).unwrap();
        run_to_writer(&cfg, &Caps::default(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn taylor_on_sphere_reports_bound() {
        let cfg = small("single", "function = gauss\ndomain = sphere\nalgorithms = taylor\neps = 0.2\n");
        let out = run_experiment(&cfg, &Caps::default()).unwrap();
        assert_eq!(out.records.len(), 4);
        for r in out.records.iter().filter(|r| r.trial != TrialTag::Median) {
            let bound = r.bound.unwrap();
            assert!(bound > 0.0);
        }
    }

    #[test]
    fn tensor_and_rff_rows() {
        let cfg = small("single", "function = f3\nalgorithms = tt\norder = 3\nn = 6\n");
        let out = run_experiment(&cfg, &Caps::default()).unwrap();
        assert_eq!(out.records.len(), 4);
        assert!(out.records.iter().all(|r| r.scheme == SamplingScheme::Independent));
        let cfg = small("single", "function = gauss\nalgorithms = rff\neps = 0.5\n");
        let out = run_experiment(&cfg, &Caps::default()).unwrap();
        assert_eq!(out.records.len(), 4);
        let bad = small("single", "function = f2\nalgorithms = tt\n");
        assert!(run_experiment(&bad, &Caps::default()).is_err());
    }

    #[test]
    fn bound_table_rows() {
        let cfg = small("bounds", "function = gauss\nn = 1000, 100000\nm = 2\n");
        let mut buf = Vec::new();
        assert!(run_to_writer(&cfg, &Caps::default(), &mut buf).unwrap().is_none());
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "n,r_formula,r_analytical,r_ut,r_ut_tighter,stage");
        assert!(lines[2].starts_with("1000,"));
        assert!(lines[2].ends_with(",linear"));
        assert!(lines[3].starts_with("100000,21713,"));
        assert!(lines[3].ends_with(",logarithmic"));
        let no_growth = small("bounds", "function = f1\n");
        assert!(run_to_writer(&no_growth, &Caps::default(), Vec::new()).is_err());
    }
}
