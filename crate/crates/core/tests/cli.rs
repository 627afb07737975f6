use serde_json::Value;
use std::process::{Command, Output};

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_equivar"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("EQUIVAR_THREADS", t),
        None => cmd.env_remove("EQUIVAR_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("one JSON document per line"))
        .collect()
}

#[test]
fn list_actions_reports_the_catalogue() {
    let out = run(&["list-actions", "--json"], None);
    assert!(out.status.success());
    let recs = records(&out);
    assert_eq!(recs.len(), 4);
    let kappas: Vec<u64> = recs.iter().map(|r| r["kappa"].as_u64().unwrap()).collect();
    assert_eq!(kappas, [1, 1, 2, 2]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let manifest = stderr.lines().find_map(|l| l.strip_prefix("manifest: ")).expect("manifest on stderr");
    let m: Value = serde_json::from_str(manifest).unwrap();
    assert_eq!(m["command"], "list-actions");
    assert_eq!(m["output_checksum"].as_str().unwrap().len(), 64);
}

#[test]
fn verify_critical_is_deterministic() {
    let args = ["verify-critical", "--action", "circle_on_circle", "--samples", "10", "--seed", "1"];
    let (a, b) = (run(&args, None), run(&args, None));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
    let json = ["verify-critical", "--action", "so3_on_sphere", "--samples", "25", "--seed", "4", "--json"];
    let (one, two) = (run(&json, Some("1")), run(&json, Some("2")));
    assert_eq!(one.stdout, two.stdout);
    let recs = records(&one);
    assert_eq!(recs.len(), 25);
    for r in &recs {
        assert_eq!(r["rank"], 4);
        assert_eq!(r["pass"], true);
        assert!(r["grad_norm"].as_f64().unwrap() <= 1e-10);
        assert_eq!(r["kernel_dim"], 3);
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["transmogrify"], None).status.code(), Some(2));
    assert_eq!(run(&["list-actions", "--frobnicate"], None).status.code(), Some(2));
    assert_eq!(run(&["list-actions"], Some("zero")).status.code(), Some(2));
}

#[test]
fn failures_exit_with_one() {
    let out = run(&["compute-l0", "--action", "klein_bottle", "--json"], None);
    assert_eq!(out.status.code(), Some(1));
    let recs = records(&out);
    assert_eq!(recs.last().unwrap()["pass"], false);
}

#[test]
fn csv_output_has_header_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l0.csv");
    let out = run(
        &["compute-l0", "--action", "circle_on_circle", "--amplitude", "bump_A", "--csv", path.to_str().unwrap()],
        None,
    );
    assert!(out.status.success());
    let mut rd = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["action", "amplitude", "re_L0", "im_L0"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let re = &rows[0][2];
    let mantissa = re.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    let v: f64 = re.parse().unwrap();
    assert!((v - equivar::reference_l0("circle_on_circle", "bump_A").unwrap()).abs() < 1e-9);

    let path = dir.path().join("sweep.csv");
    let out = run(
        &["sweep-mu", "--action", "circle_on_circle", "--mu-min", "0.02", "--mu-max", "0.08", "--mu-points", "4", "--csv", path.to_str().unwrap()],
        None,
    );
    assert!(out.status.success());
    let mut rd = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["mu", "re_I", "im_I", "abs_residual"]);
    assert_eq!(rd.records().count(), 4);
}

#[test]
fn fit_and_cutoff_commands() {
    let out = run(&["fit", "--action", "circle_on_circle", "--mu-min", "0.01", "--mu-max", "0.1", "--json"], None);
    assert!(out.status.success());
    let recs = records(&out);
    let fit = recs.iter().find(|r| r.get("kappa_hat").is_some()).expect("fit record");
    assert!((fit["kappa_hat"].as_f64().unwrap() - 1.0).abs() < 0.05);
    let out = run(&["cutoff", "--action", "circle_on_sphere", "--eps", "0.2,0.05", "--json"], None);
    assert!(out.status.success());
    assert!(records(&out).len() >= 2);
}

#[test]
fn quick_suite_passes() {
    let out = run(&["all", "--budget", "quick", "--json"], None);
    let recs = records(&out);
    assert_eq!(recs.len(), 10);
    assert!(recs.iter().all(|r| r["pass"] == true), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(out.status.code(), Some(0));
}
