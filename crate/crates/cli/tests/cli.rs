use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nnlsif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnlsif")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    report.lines().take_while(|l| *l != "[records]").find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
}

fn records(report: &str) -> Vec<&str> {
    report.lines().skip_while(|l| *l != "[records]").skip(1).take_while(|l| !l.starts_with('[')).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const FOUR_UNITS: &str = "x0,d,y\n0,1,1\n2,1,3\n0.1,0,0\n1.9,0,2\n";

#[test]
fn ate_on_four_units() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "data.csv", FOUR_UNITS);
    for estimator in ["weight", "matching"] {
        let out = nnlsif(&["ate", "--input", &input, "--m", "1", "--estimator", estimator]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(field(&stdout(&out), "tau"), Some("1"));
    }
    let out = nnlsif(&["ate", "--input", &input, "--m", "1", "--estimator", "bc", "--degree", "0"]);
    assert_eq!(field(&stdout(&out), "tau"), Some("1"));
    let text = stdout(&out);
    let recs = records(&text);
    assert_eq!(recs.len(), 4);
    assert_eq!(recs[2], "i=2 d=0 k=1 w=2 y0_hat=0 y1_hat=1");
}

#[test]
fn dre_indicator_on_running_instance() {
    let dir = tempfile::tempdir().unwrap();
    let den = write(dir.path(), "den.csv", "x0\n0\n1\n2\n3\n");
    let num = write(dir.path(), "num.csv", "x0\n0.4\n2.6\n");
    let pts = write(dir.path(), "pts.csv", "x0\n0\n");
    let out = nnlsif(&[
        "dre", "--denominator", &den, "--numerator", &num, "--m", "1", "--basis", "indicator", "--eval-points", &pts,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(records(&text), ["point=0 x=0 r_hat=2 r_one_step=2 k=1 support=1"]);
}

#[test]
fn dre_smooth_basis_on_synthetic_densities() {
    let out = nnlsif(&[
        "dre", "--denominator-density", "uniform:0:1", "--numerator-density", "uniform:0:1", "--basis", "poly",
        "--degree", "1", "--n-den", "400", "--n-num", "400", "--seed", "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(records(&text).len(), 400);
    // equal laws: the fitted ratio is near 1 and r_true is exactly 1
    let first = records(&text)[0];
    assert!(first.ends_with("r_true=1"));
    let r: f64 = first.split(' ').find_map(|kv| kv.strip_prefix("r_hat=")).unwrap().parse().unwrap();
    assert!((r - 1.0).abs() < 0.3, "{r}");
}

#[test]
fn simulate_shape() {
    let out = nnlsif(&["simulate", "--dgp", "logistic", "--n", "500", "--reps", "10", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(records(&text).len(), 10);
    for key in ["bc.mean", "bc.sd", "bc.bias", "matching.mean", "true_ate"] {
        assert!(field(&text, key).is_some(), "{key}");
    }
    assert_eq!(field(&text, "m"), Some("16"));
}

#[test]
fn weights_with_oracle() {
    let out = nnlsif(&["weights", "--dgp", "logistic", "--n", "300", "--m", "5", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let recs = records(&text);
    assert_eq!(recs.len(), 300);
    assert!(recs.iter().all(|r| r.contains(" w_oracle=")));
    let n1: usize = field(&text, "n1").unwrap().parse().unwrap();
    let n0: usize = field(&text, "n0").unwrap().parse().unwrap();
    assert_eq!(field(&text, "k_sum.d1").unwrap().parse::<usize>().unwrap(), 5 * n0);
    assert_eq!(field(&text, "k_sum.d0").unwrap().parse::<usize>().unwrap(), 5 * n1);
}

#[test]
fn reports_are_identical_across_jobs() {
    for args in [
        vec!["verify", "--instances", "15", "--seed", "7"],
        vec!["simulate", "--n", "300", "--reps", "6", "--seed", "7"],
    ] {
        let runs: Vec<Vec<u8>> = ["1", "3", "0", "1"]
            .iter()
            .map(|jobs| {
                let mut a = args.clone();
                a.extend(["--jobs", jobs]);
                nnlsif(&a).stdout
            })
            .collect();
        assert!(!runs[0].is_empty());
        assert!(runs.iter().all(|r| *r == runs[0]), "{args:?}");
    }
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.txt");
    let out = nnlsif(&["simulate", "--n", "200", "--reps", "2", "--output", path.to_str().unwrap(), "--timings"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = fs::read_to_string(path).unwrap();
    assert!(text.contains("[timings]\nwall_seconds="));
}

#[test]
fn verify_single_instance_and_fault() {
    let out = nnlsif(&["verify", "--instances", "1", "--seed", "1"]);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let text = stdout(&out);
    assert_eq!(records(&text).len(), 5);
    assert_eq!(field(&text, "matching_weight_form.status"), Some("pass"));

    let out = nnlsif(&["verify", "--instances", "10", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(field(&stdout(&out), "matching_weight_form.status"), Some("fail"));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "x0,d,y\n0,2,1\n1,0,0\n");
    let one_arm = write(dir.path(), "one.csv", "x0,d,y\n0,1,1\n1,1,0\n");
    let four = write(dir.path(), "four.csv", FOUR_UNITS);
    for args in [
        vec!["ate", "--input", "/definitely/missing.csv"],
        vec!["ate", "--input", bad.as_str()],
        vec!["ate", "--input", one_arm.as_str()],
        vec!["ate", "--input", four.as_str(), "--m", "3"],
        vec!["ate", "--input", four.as_str(), "--metric", "manhattan"],
        vec!["simulate", "--dgp", "nope"],
        vec!["verify", "--instances", "0"],
    ] {
        let out = nnlsif(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = nnlsif(&["ate", "--input", &bad]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-binary treatment at row 1"));
}
