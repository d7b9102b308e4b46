//! End-to-end tests of the command-line interface: each test drives the
//! compiled binary through a pipe and checks output and exit codes against
//! the library oracles.

use std::path::PathBuf;
use std::process::{Command, Output};

use num_complex::Complex64;
use serde_json::Value;

use isingpf::exact::{self, BruteForceOptions};
use isingpf::model::CubePolynomial;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isingpf"))
}

/// Fresh scratch directory for one test, cleaned up by the caller at the end.
fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("isingpf-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be JSON")
}

fn complex_field(v: &Value, key: &str) -> Complex64 {
    let pair = v[key].as_array().unwrap();
    Complex64::new(pair[0].as_f64().unwrap(), pair[1].as_f64().unwrap())
}

#[test]
fn gen_then_exact_matches_the_library_oracle() {
    let dir = workdir("gen-exact");
    let file = dir.join("q10.json");
    let status = run(&[
        "gen",
        "--kind",
        "random-quadratic",
        "--n",
        "10",
        "--seed",
        "7",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "gen failed: {}", String::from_utf8_lossy(&status.stderr));

    let f = CubePolynomial::read_file(&file).unwrap();
    let oracle = exact::log_partition_sum(&f, &BruteForceOptions::default()).unwrap();

    let out = stdout_json(&run(&["exact", file.to_str().unwrap()]));
    let got = complex_field(&out, "log_partition");
    assert_eq!(out["n"].as_u64(), Some(10));
    assert!(
        (got - oracle).norm() <= 1e-12 * oracle.norm().max(1.0),
        "cli {got} vs library {oracle}"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn approx_forced_interpolation_stays_within_epsilon_of_exact() {
    let dir = workdir("approx");
    let file = dir.join("q12.json");
    run(&[
        "gen",
        "--kind",
        "random-quadratic",
        "--n",
        "12",
        "--seed",
        "41",
        "--out",
        file.to_str().unwrap(),
    ]);

    let f = CubePolynomial::read_file(&file).unwrap();
    let oracle = exact::log_partition_sum(&f, &BruteForceOptions::default()).unwrap();

    let epsilon = 0.05;
    let out = stdout_json(&run(&[
        "approx",
        file.to_str().unwrap(),
        "--delta",
        "0.25",
        "--epsilon",
        "0.05",
        "--force-interpolation",
    ]));
    assert_eq!(out["path"].as_str(), Some("interpolated"));
    assert_eq!(out["hypothesis"]["satisfied"].as_bool(), Some(true));
    assert!(out["table_order"].as_u64().unwrap() >= 2);
    let got = complex_field(&out, "log_partition");
    assert!(
        (got - oracle).norm() <= epsilon,
        "cli {got} vs oracle {oracle} beyond ε = {epsilon}"
    );

    // without the flag, n = 12 routes to exact enumeration and must agree
    // with the oracle bit for bit
    let direct = stdout_json(&run(&[
        "approx",
        file.to_str().unwrap(),
        "--delta",
        "0.25",
        "--epsilon",
        "0.05",
    ]));
    assert_eq!(direct["path"].as_str(), Some("exact"));
    assert_eq!(complex_field(&direct, "log_partition"), oracle);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn check_exit_codes_distinguish_pass_from_violation() {
    let dir = workdir("check");

    // generated instances are rescaled under the row-sum bound: exit 0
    let good = dir.join("good.json");
    run(&[
        "gen",
        "--kind",
        "random-quadratic",
        "--n",
        "9",
        "--seed",
        "3",
        "--out",
        good.to_str().unwrap(),
    ]);
    let out = run(&["check", good.to_str().unwrap(), "--delta", "0.25"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["satisfied"].as_bool(), Some(true));

    // a 3-regular graph at the critical coupling has row sums ≈ 1.65,
    // far above the bound 1 − δ: report printed, exit 2
    let hot = dir.join("hot.json");
    run(&[
        "gen",
        "--kind",
        "regular-graph",
        "--n",
        "8",
        "--degree",
        "3",
        "--out",
        hot.to_str().unwrap(),
    ]);
    let out = run(&["check", hot.to_str().unwrap(), "--delta", "0.25"]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["satisfied"].as_bool(), Some(false));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn approx_refuses_unaffordable_instances_with_exit_3() {
    let dir = workdir("budget");
    let file = dir.join("dense30.json");
    run(&[
        "gen",
        "--kind",
        "random-quadratic",
        "--n",
        "30",
        "--edge-prob",
        "1.0",
        "--seed",
        "11",
        "--out",
        file.to_str().unwrap(),
    ]);
    let out = run(&[
        "approx",
        file.to_str().unwrap(),
        "--delta",
        "0.25",
        "--epsilon",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("work"), "refusal should name the budget: {msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn derivs_csv_feeds_interp_and_reproduces_ln_p1() {
    let dir = workdir("derivs");
    let file = dir.join("q10.json");
    run(&[
        "gen",
        "--kind",
        "random-quadratic",
        "--n",
        "10",
        "--seed",
        "19",
        "--out",
        file.to_str().unwrap(),
    ]);

    let table = run(&["derivs", file.to_str().unwrap(), "--kmax", "24"]);
    assert!(table.status.success(), "{}", String::from_utf8_lossy(&table.stderr));
    let csv_text = String::from_utf8(table.stdout).unwrap();
    assert!(csv_text.starts_with("k,re,im"));
    assert_eq!(csv_text.lines().count(), 26); // header + orders 0..=24
    let csv_path = dir.join("table.csv");
    std::fs::write(&csv_path, &csv_text).unwrap();

    let out = stdout_json(&run(&[
        "interp",
        csv_path.to_str().unwrap(),
        "--delta",
        "0.25",
        "--epsilon",
        "0.01",
    ]));
    let log_p1 = complex_field(&out, "log_p1");
    assert!(out["tail_bound"].as_f64().unwrap() <= 0.01);

    let f = CubePolynomial::read_file(&file).unwrap();
    let expected = exact::p_exact_stats(&f, Complex64::new(1.0, 0.0), &BruteForceOptions::default())
        .unwrap()
        .log_sum;
    assert!(
        (log_p1 - expected).norm() <= 0.01,
        "interp {log_p1} vs enumerated {expected}"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn field_scan_of_a_ferromagnet_finds_roots_on_the_imaginary_axis() {
    let out = stdout_json(&run(&[
        "scan-zeros",
        "gen:regular-graph,n=8,degree=3,seed=5",
        "--param",
        "b",
        "--grid",
        "-0.4:0.4:0.0:1.6:9",
    ]));
    assert_eq!(out["parameter_name"].as_str(), Some("b"));
    let roots = out["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 8);
    for root in roots {
        let re = root[0].as_f64().unwrap();
        assert!(re.abs() <= 1e-8, "root off the imaginary axis: {root}");
    }
    assert!(out["max_root_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn bad_inputs_exit_1() {
    let dir = workdir("bad");
    let missing = dir.join("nope.json");
    let out = run(&["exact", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let mangled = dir.join("mangled.json");
    std::fs::write(&mangled, "{\"n\": 4, \"linear\": {\"0\": 1.0}}").unwrap();
    let out = run(&["exact", mangled.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let file = dir.join("ok.json");
    run(&[
        "gen",
        "--kind",
        "random-quadratic",
        "--n",
        "6",
        "--seed",
        "1",
        "--out",
        file.to_str().unwrap(),
    ]);
    let out = run(&["scan-zeros", file.to_str().unwrap(), "--param", "z", "--grid", "oops"]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn determinism_same_seed_same_file() {
    let dir = workdir("determinism");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    for out in [&a, &b] {
        run(&[
            "gen",
            "--kind",
            "complex-boundary",
            "--n",
            "14",
            "--delta",
            "0.3",
            "--seed",
            "99",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let ta = std::fs::read_to_string(&a).unwrap();
    let tb = std::fs::read_to_string(&b).unwrap();
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    std::fs::remove_dir_all(&dir).ok();
}
