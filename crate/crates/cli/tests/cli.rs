use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use subac_cli::output::strip_header;

fn subac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subac")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn body(path: &Path) -> String {
    strip_header(&fs::read_to_string(path).unwrap())
}

#[test]
fn simulate_is_reproducible_from_its_own_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "run.conf", "modes = 16\nhorizon = 0.2\nseed = 9\nscheme = y_split\n");
    let first = d.join("a");
    let second = d.join("b");
    let third = d.join("c");
    assert!(
        subac(&["simulate", &cfg, "--out", first.to_str().unwrap(), "--threads", "1"])
            .status
            .success()
    );
    assert!(
        subac(&["simulate", &cfg, "--out", second.to_str().unwrap(), "--threads", "4"])
            .status
            .success()
    );
    let a = first.join("trajectory.csv");
    assert_eq!(body(&a), body(&second.join("trajectory.csv")));
    let echoed = a.to_str().unwrap();
    assert!(subac(&["simulate", echoed, "--out", third.to_str().unwrap()])
        .status
        .success());
    assert_eq!(body(&a), body(&third.join("trajectory.csv")));
    assert!(body(&a).starts_with("t,h_norm,v_norm,sobolev_delta,f1,f2,f3\n"));
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "run.conf", "modes = 8\nhorizon = 0.05\nseed = 1\n");
    let out = d.join("o");
    assert!(
        subac(&["simulate", &cfg, "--out", out.to_str().unwrap(), "--seed", "77"])
            .status
            .success()
    );
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(text.contains("# master seed: 77\n"));
    assert!(text.contains("# seed = 77\n"));
}

#[test]
fn config_errors_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("o");
    for text in ["bogus = 1\n", "alpha = 2.5\n", "modes = many\n", "x0_mode = 99\n"] {
        let cfg = write(d, "bad.conf", text);
        let r = subac(&["simulate", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(2), "{text}");
    }
    let cfg = write(d, "p.conf", "modes = 8\nensemble = 4\np = 0.5\n");
    let r = subac(&["moments", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
    let missing = d.join("nope.conf");
    assert_eq!(subac(&["simulate", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("o");
    let cfg = write(d, "n.conf", "modes = 16\nhorizon = 0.01\nx0_norm = 1e160\n");
    let r = subac(&["simulate", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("step 1"));
    assert!(!out.exists());
}

#[test]
fn unreachable_level_gives_censored_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("o");
    let cfg = write(d, "r.conf", "modes = 8\nensemble = 10\nn_max = 2\nlevel = 0\n");
    let r = subac(&["recurrence", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(body(&out.join("recurrence_summary.csv")).contains("all_censored,true\n"));
    assert_eq!(
        body(&out.join("recurrence.csv")).lines().next(),
        Some("n,p_tail,ci_lo,ci_hi")
    );
}

#[test]
fn schemas_of_the_study_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("o");
    let o = out.to_str().unwrap();
    let cfg = write(d, "s.conf", "modes = 8\nensemble = 30\nhorizon = 1\nhorizons = 1,2\n");
    assert!(subac(&["ldp", &cfg, "--out", o]).status.success());
    assert!(subac(&["moments", &cfg, "--out", o]).status.success());
    let first = |name: &str| body(&out.join(name)).lines().next().unwrap().to_string();
    assert_eq!(first("scgf.csv"), "lambda,scgf");
    assert_eq!(first("rate.csv"), "r,rate");
    assert_eq!(first("moments.csv"), "x0_label,T,p,estimate,se");
    assert_eq!(body(&out.join("moments.csv")).lines().count(), 1 + 3 * 2);
}

#[test]
fn control_and_selftest_pass_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    assert!(subac(&["control", "--out", o]).status.success());
    assert!(body(&out.join("control_summary.csv")).contains("passed,true\n"));
    let r = subac(&["selftest", "--out", o]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!body(&out.join("selftest.csv")).contains(",false,"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(subac(&["dance"]).status.code(), Some(2));
}
