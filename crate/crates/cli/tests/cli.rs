use std::path::Path;
use std::process::{Command, Output};

fn maxnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxnorm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn bounds_table_has_documented_columns() {
    let out = stdout(&maxnorm(&["bounds", "--eps", "0.1", "--n", "100000,10000000,1000000000", "--m", "1"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "# maxnorm-lowrank v1");
    assert_eq!(lines[1], "n,r_formula,r_analytical,r_ut,r_ut_tighter,stage");
    assert!(lines[2].starts_with("100000,21713,"));
    assert!(lines[3].starts_with("10000000,30002,"));
    assert!(lines[4].starts_with("1000000000,38291,"));
}

#[test]
fn bounds_comparison_predicates() {
    let low = stdout(&maxnorm(&["bounds", "--compare-at", "1.5"]));
    assert!(low.contains("ut_tighter_always_looser = false"));
    let high = stdout(&maxnorm(&["bounds", "--compare-at", "1.6", "--m", "2"]));
    assert!(high.contains("ut_tighter_always_looser = true"));
    assert!(high.contains("ut_tighter_crossing = 1.5966"));
}

#[test]
fn generate_then_altproj_on_file() {
    let dir = tempfile::tempdir().unwrap();
    let mat = dir.path().join("f.bin");
    let approx = dir.path().join("g.bin");
    stdout(&maxnorm(&["generate", "--function", "f1", "--n", "30", "--m", "3", "--seed", "5", "--output", p(&mat)]));
    let out = stdout(&maxnorm(&[
        "altproj", "--input", p(&mat), "--rank", "3", "--seed", "1", "--max-iters", "200", "--projection", "exact",
        "--output", p(&approx),
    ]));
    assert!(out.contains("revalidated = true"), "{out}");
    assert!(out.contains("tsvd_relative_error"));
    assert_eq!(std::fs::metadata(&approx).unwrap().len(), std::fs::metadata(&mat).unwrap().len());
}

#[test]
fn seed_is_mandatory_for_stochastic_commands() {
    assert!(!maxnorm(&["generate", "--n", "4", "--m", "2", "--output", "/dev/null"]).status.success());
    assert!(!maxnorm(&["altproj", "--n", "4", "--m", "2", "--rank", "1"]).status.success());
    let o = maxnorm(&["experiment", "--set", "experiment=single"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn approx_algorithms_report() {
    let ip = stdout(&maxnorm(&[
        "approx", "--algorithm", "taylor-ip", "--function", "gauss", "--domain", "sphere", "--n", "40", "--m", "5",
        "--eps", "0.2", "--seed", "3",
    ]));
    assert!(ip.contains("measured_max_error"));
    assert!(ip.contains("in_validity_regime"));
    let dist = stdout(&maxnorm(&[
        "approx", "--algorithm", "taylor-dist", "--function", "gauss", "--n", "30", "--m", "3", "--seed", "3",
    ]));
    assert!(dist.contains("bound = "));
    let local = stdout(&maxnorm(&[
        "approx", "--algorithm", "taylor-dist-local", "--function", "f2", "--n", "30", "--m", "3", "--seed", "3",
    ]));
    assert!(local.contains("center = "));
    let rff = stdout(&maxnorm(&[
        "approx", "--algorithm", "rff", "--function", "gauss", "--n", "30", "--m", "3", "--eps", "0.5", "--seed", "3",
    ]));
    assert!(rff.contains("spectral_law = gaussian"));
    let jl = stdout(&maxnorm(&["approx", "--algorithm", "jl", "--n", "30", "--m", "3", "--seed", "3"]));
    assert!(jl.contains("achieved_max_error"));
    let tt = stdout(&maxnorm(&[
        "approx", "--algorithm", "tt-taylor", "--function", "f3", "--n", "6", "--m", "3", "--order", "3", "--rank", "4",
        "--seed", "3",
    ]));
    assert!(tt.contains("tt_ranks"));
    let wrong = maxnorm(&["approx", "--algorithm", "taylor-ip", "--function", "gauss", "--n", "4", "--m", "2", "--seed", "1"]);
    assert!(!wrong.status.success());
}

#[test]
fn experiment_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("varr.conf");
    std::fs::write(
        &cfg,
        "# small varr sweep\nexperiment = varr\nfunction = f1\nn = 24\nm = 3\nr = 1, 2, 4\ntrials = 3\nseed = 9\n\
         max_iters = 200\nbisection_steps = 6\nprojection = exact\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let again = dir.path().join("again.csv");
    let o = maxnorm(&["experiment", "--config", p(&cfg), "--output", p(&csv)]);
    stdout(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tsvd_median"));
    stdout(&maxnorm(&["experiment", "--config", p(&cfg), "--output", p(&again), "--jobs", "1"]));
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&again).unwrap());

    let agg = dir.path().join("agg.csv");
    let svg = dir.path().join("fig.svg");
    stdout(&maxnorm(&["plot", "--input", p(&csv), "--output", p(&agg), "--svg", p(&svg)]));
    let text = std::fs::read_to_string(&agg).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with("loglog_slope"));
    assert_eq!(text.lines().filter(|l| l.starts_with("varr,altproj,")).count(), 3);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn malformed_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "experiment = sideways\n").unwrap();
    let o = maxnorm(&["experiment", "--config", p(&cfg), "--seed", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    let junk = dir.path().join("junk.csv");
    std::fs::write(&junk, "a,b\n1,2\n").unwrap();
    assert!(!maxnorm(&["plot", "--input", p(&junk)]).status.success());
    let cap = Command::new(env!("CARGO_BIN_EXE_maxnorm"))
        .env("MAXNORM_DENSE_CAP", "10")
        .args(["generate", "--n", "10", "--m", "2", "--seed", "1", "--output", p(&dir.path().join("x.bin"))])
        .output()
        .unwrap();
    assert!(!cap.status.success());
}
