use maxnorm_core::altproj::{binary_search_eps, AltProjConfig, TestFunction, TrialProblem};
use maxnorm_core::harness::plot::aggregate;
use maxnorm_core::harness::{read_records, run_experiment, run_to_writer, write_records, ExperimentConfig, TrialTag};
use maxnorm_core::lowrank::{max_norm_error, truncated_svd};
use maxnorm_core::sampling::SamplingScheme;
use maxnorm_core::Caps;
use ndarray::{Array2, Ix2};

fn small_varr() -> ExperimentConfig {
    ExperimentConfig::parse(
        "experiment = varr\nfunction = f1\nscheme = symmetric\nn = 40\nm = 5\nr = 2, 4\ntrials = 3\nseed = 11\n",
    )
    .unwrap()
}

#[test]
fn experiment_csv_round_trips_and_aggregates() {
    let cfg = small_varr();
    let out = run_experiment(&cfg, &Caps::default()).unwrap();
    let mut buf = Vec::new();
    write_records(&mut buf, &out.records).unwrap();
    let back = read_records(buf.as_slice()).unwrap();
    assert_eq!(back, out.records);

    // altproj + baseline trial rows and one median row per rank
    assert_eq!(back.len(), 2 * (3 + 3 + 1));
    for rec in back.iter().filter(|r| r.trial == TrialTag::Median) {
        let mut errs: Vec<f64> = back
            .iter()
            .filter(|t| t.trial != TrialTag::Median && t.r == rec.r && t.algorithm == rec.algorithm)
            .map(|t| t.relative_max_error)
            .collect();
        errs.sort_by(f64::total_cmp);
        assert_eq!(rec.relative_max_error, errs[1]);
    }
    let (_, rows) = aggregate(&back).unwrap();
    assert!(rows.iter().all(|r| r.count == 3 && r.q25 <= r.median && r.median <= r.q75));
}

#[test]
fn identical_configs_write_identical_bytes() {
    let cfg = small_varr();
    let run = || {
        let mut buf = Vec::new();
        run_to_writer(&cfg, &Caps::default(), &mut buf).unwrap();
        buf
    };
    assert_eq!(run(), run());
}

#[test]
fn bisection_result_is_certified_and_low_rank() {
    let problem = TrialProblem::new(TestFunction::F1, SamplingScheme::Independent, 30, 4);
    let f = problem.generate(5, &Caps::default()).unwrap();
    let cfg = AltProjConfig { bisection_steps: 12, ..AltProjConfig::with_seed(3) };
    let out = binary_search_eps(&f, &problem.rank(3), &cfg).unwrap();

    let f2 = f.clone().into_dimensionality::<Ix2>().unwrap();
    let t = out.approximant.clone().into_dimensionality::<Ix2>().unwrap();
    let diff = (&f2 - &t).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((diff - out.certified_error).abs() <= 1e-12 * diff.max(1.0));
    assert!(out.certified_error <= out.eps_star * (1.0 + cfg.tol) + 1e-12);

    let refit = truncated_svd(t.view(), 3).unwrap();
    let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max_norm_error(&t, &refit).unwrap() <= 1e-8 * scale);

    let zero = Array2::<f64>::zeros(f2.dim());
    assert!(out.certified_error <= max_norm_error(&f2, &zero).unwrap());
}

#[test]
fn bounds_config_writes_a_table() {
    let text = "experiment = bounds\nfunction = f1\nn = 1000, 100000\nm = 3\nseed = 0\n";
    let bare = ExperimentConfig::parse(text).unwrap();
    assert!(run_to_writer(&bare, &Caps::default(), Vec::new()).is_err());

    let cfg = ExperimentConfig::parse(&format!("{text}growth_c = 1\ngrowth_m = 2\n")).unwrap();
    let mut buf = Vec::new();
    assert!(run_to_writer(&cfg, &Caps::default(), &mut buf).unwrap().is_none());
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "n,r_formula,r_analytical,r_ut,r_ut_tighter,stage");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1000,"));
}
