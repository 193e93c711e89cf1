use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ftclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftclust"))
        .args(args)
        .env_remove("FTCLUST_ARITH")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json_out(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for f in [&a, &b] {
        let out = ftclust(&["gen", "--kind", "ftmed", "--geometry", "plane", "--n", "10", "--m", "8", "--k", "3", "--seed", "7", "--out", p(f)]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let doc: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(doc["kind"], "ftmed");
    assert_eq!(doc["k"], 3);
    assert_eq!(doc["metric"]["type"], "plane");
}

#[test]
fn gap_family_has_kc_value_n() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    assert_eq!(code(&ftclust(&["gen", "--kind", "ftfl", "--geometry", "line", "--gap-family", "--n", "6", "--out", p(&g)])), 0);
    let r = json_out(&ftclust(&["solve", p(&g), "--method", "ftfl-fixed", "--alpha", "0.25"]));
    assert_eq!(r["kc_value_exact"], "6");
    assert_eq!(r["bound_checks"]["within_factor"], true);
    let opt = json_out(&ftclust(&["solve", p(&g), "--method", "brute"]));
    assert_eq!(opt["value_exact"], "6");
}

#[test]
fn brute_on_three_facility_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("line.json");
    fs::write(&f, r#"{"kind":"ftmed","k":2,"requirements":[2],"metric":{"type":"line","facilities":[0,1,3],"clients":[0]}}"#).unwrap();
    let r = json_out(&ftclust(&["solve", p(&f), "--method", "brute"]));
    assert_eq!(r["value_exact"], "1");
    assert_eq!(r["open_set"], serde_json::json!([0, 1]));
    let exact = json_out(&ftclust(&["solve", p(&f), "--method", "exact-line"]));
    assert_eq!(exact["value_exact"], "1");
}

#[test]
fn ftfl_fixed_respects_bound() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2", "3"] {
        let f = dir.path().join(format!("f{seed}.json"));
        let out = ftclust(&["gen", "--kind", "ftfl", "--geometry", "explicit", "--n", "6", "--m", "4", "--rmax", "3", "--seed", seed, "--out", p(&f)]);
        assert_eq!(code(&out), 0);
        let r = json_out(&ftclust(&["solve", p(&f), "--method", "ftfl-fixed", "--alpha", "0.25"]));
        assert_eq!(r["bound_checks"]["within_factor"], true);
        assert!(r["best"].as_f64().unwrap() <= 4.0 * r["kc_value"].as_f64().unwrap() + 1e-9);
    }
}

#[test]
fn lp_round_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("m.json");
    assert_eq!(code(&ftclust(&["gen", "--kind", "ftmed", "--geometry", "hst", "--n", "6", "--m", "5", "--k", "3", "--rmax", "2", "--seed", "4", "--out", p(&f)])), 0);
    let args = ["solve", p(&f), "--method", "lp-round", "--samples", "200", "--seed", "9"];
    let first = ftclust(&args);
    let r = json_out(&first);
    for key in ["mean_cost", "best_cost", "lp_value", "best_open_set"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["marginal_check"]["samples"], 200);
    assert_eq!(first.stdout, ftclust(&args).stdout, "same flags and seed give the same report");
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    assert_eq!(code(&ftclust(&["gen", "--kind", "ftmed", "--geometry", "line", "--n", "5", "--m", "4", "--k", "2", "--rmax", "2", "--seed", "3", "--out", p(&good)])), 0);
    let out = ftclust(&["verify", p(&good), "--samples", "20000"]);
    assert_eq!(json_out(&out)["passed"], true);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"kind":"ftmed","k":1,"requirements":[1],"metric":{"type":"explicit","matrix":[[0,1],[5,0]]}}"#).unwrap();
    let out = ftclust(&["verify", p(&bad)]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["checks"][0]["name"], "metric");
    assert_eq!(report["checks"][0]["passed"], false);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("l.json");
    assert_eq!(code(&ftclust(&["gen", "--kind", "ftfl", "--n", "4", "--m", "2", "--out", p(&f)])), 0);
    assert_eq!(code(&ftclust(&["solve", p(&f), "--method", "lp-round"])), 2);
    assert_eq!(code(&ftclust(&["solve", p(&f), "--method", "exact-hst"])), 2);
    assert_eq!(code(&ftclust(&["solve", p(&f), "--alpha", "3/2"])), 2);
    assert_eq!(code(&ftclust(&["gen", "--kind", "ftfl", "--geometry", "plane", "--gap-family", "--n", "4"])), 2);
    assert_eq!(code(&ftclust(&["solve", p(&f), "--method", "nonsense"])), 2);
}

#[test]
fn infeasible_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("inf.json");
    fs::write(&f, r#"{"kind":"ftmed","k":1,"requirements":[2],"metric":{"type":"line","facilities":[0,1],"clients":[0]}}"#).unwrap();
    assert_eq!(code(&ftclust(&["solve", p(&f), "--method", "brute"])), 3);
}

#[test]
fn arith_flag_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("l.json");
    assert_eq!(code(&ftclust(&["gen", "--kind", "ftmed", "--n", "5", "--m", "3", "--k", "2", "--out", p(&f)])), 0);
    let q = json_out(&ftclust(&["solve", p(&f)]));
    assert_eq!(q["arith"], "rational");
    let fl = json_out(&ftclust(&["solve", p(&f), "--arith", "float"]));
    assert_eq!(fl["arith"], "float");
    assert!((q["lp_value"].as_f64().unwrap() - fl["lp_value"].as_f64().unwrap()).abs() < 1e-9);
    let env = Command::new(env!("CARGO_BIN_EXE_ftclust")).args(["solve", p(&f)]).env("FTCLUST_ARITH", "float").output().unwrap();
    assert_eq!(json_out(&env)["arith"], "float");
}

#[test]
fn bench_rows_and_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    fs::create_dir(&inst).unwrap();
    let geoms = ["line", "hst", "explicit", "plane"];
    for s in 0..10 {
        let seed = s.to_string();
        let g = geoms[s % 4];
        let med = inst.join(format!("med{s:02}.json"));
        let fl = inst.join(format!("fl{s:02}.json"));
        assert_eq!(code(&ftclust(&["gen", "--kind", "ftmed", "--geometry", g, "--n", "6", "--m", "5", "--k", "3", "--rmax", "2", "--seed", &seed, "--out", p(&med)])), 0);
        assert_eq!(code(&ftclust(&["gen", "--kind", "ftfl", "--geometry", g, "--n", "6", "--m", "4", "--rmax", "3", "--seed", &seed, "--out", p(&fl)])), 0);
    }
    let csv_path = dir.path().join("out.csv");
    let out = ftclust(&["bench", "--dir", p(&inst), "--methods", "lp-round,brute,ftfl-fixed", "--samples", "50", "--out", p(&csv_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["instance", "method", "lp_value", "cost", "ratio_vs_lp", "ratio_vs_brute", "runtime_ms", "seed"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    // ftmed gets lp-round and brute, ftfl gets brute and ftfl-fixed.
    assert_eq!(rows.len(), 20 * 2);
    for r in &rows {
        let ratio = |i: usize| r[i].parse::<f64>().ok();
        match &r[1] {
            "lp-round" => assert!(ratio(4).unwrap() <= 93.0),
            "ftfl-fixed" => assert!(ratio(4).unwrap() <= 4.0 + 1e-9),
            "brute" => assert_eq!(ratio(5), Some(1.0)),
            other => panic!("unexpected method {other}"),
        }
        assert!(ratio(5).unwrap() >= 1.0 - 1e-9);
    }
}
