use std::path::Path;
use std::process::{Command, Output};

use kmed::metric::MetricInstance;
use kmed::num::q;
use serde_json::Value;

fn kmed(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kmed"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(text: &[u8]) -> Value {
    serde_json::from_slice(text).unwrap()
}

fn audits_pass(report: &Value) -> bool {
    report["audits"].as_array().unwrap().iter().all(|a| a["status"] != "fail")
}

fn gen_random(dir: &Path, name: &str, seed: u64, n: usize, m: usize) -> String {
    let file = dir.join(name);
    let out = kmed(
        &[
            "gen",
            "--seed",
            &seed.to_string(),
            "--out",
            path(&file),
            "random",
            "--n",
            &n.to_string(),
            "--m",
            &m.to_string(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path(&file).to_string()
}

#[test]
fn gen_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_random(dir.path(), "a.json", 9, 5, 4);
    let b = gen_random(dir.path(), "b.json", 9, 5, 4);
    let c = gen_random(dir.path(), "c.json", 10, 5, 4);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn gen_rejects_empty_instances() {
    assert_eq!(code(&kmed(&["gen", "random", "--n", "0", "--m", "3"], &[])), 2);
}

#[test]
fn stable_gen_labels_the_planted_solution() {
    let out = kmed(&["gen", "--seed", "2", "stable", "--k", "3"], &[]);
    assert_eq!(code(&out), 0);
    let inst = json(&out.stdout);
    let labels = &inst["labels"];
    for key in ["beta", "planted", "opt"] {
        assert!(labels.get(key).is_some(), "missing label {key}: {labels}");
    }
}

#[test]
fn greedy_on_one_client_matches_the_hand_trace() {
    // one client at distance 2 from one facility, f = 1: the bid reaches 2 + 2f = 4
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("one.json");
    let inst = MetricInstance::new(1, 1, vec![vec![q(0), q(2)], vec![q(2), q(0)]]).unwrap();
    std::fs::write(&file, inst.to_json()).unwrap();
    let out = kmed(&["solve", "--instance", path(&file), "--alg", "greedy", "--f", "1"], &[]);
    assert_eq!(code(&out), 0);
    let r = json(&out.stdout);
    assert_eq!(r["centers"], serde_json::json!([0]));
    assert_eq!(r["cost"], "2/1");
    assert_eq!(r["certificate"]["sum_alpha"], "4/1");
    assert_eq!(r["output"]["greedy"]["alpha_star"], serde_json::json!(["4/1"]));
}

#[test]
fn main_on_a_planted_instance_opens_k_centers() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("planted.json");
    let out = kmed(&["gen", "--seed", "4", "--out", path(&file), "stable", "--k", "3"], &[]);
    assert_eq!(code(&out), 0);
    let inst = json(&std::fs::read(&file).unwrap());
    let out = kmed(&["solve", "--instance", path(&file), "--alg", "main", "--k", "3", "--seed", "1"], &[]);
    assert!(matches!(code(&out), 0 | 3), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out.stdout);
    assert_eq!(r["centers"].as_array().unwrap().len(), 3);
    assert_eq!(r["cost"], inst["labels"]["opt"]);
    assert!(audits_pass(&r));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_random(dir.path(), "i.json", 1, 4, 3);
    assert_eq!(code(&kmed(&["solve", "--instance", &inst, "--alg", "nope", "--k", "2"], &[])), 2);
    assert_eq!(code(&kmed(&["solve", "--instance", &inst, "--alg", "merge"], &[])), 2);
    assert_eq!(code(&kmed(&["solve", "--instance", &inst, "--alg", "greedy", "--f", "-1"], &[])), 2);
    assert_eq!(code(&kmed(&["solve", "--instance", &inst, "--alg", "merge", "--k", "2", "--eps", "2"], &[])), 2);
    assert_eq!(code(&kmed(&["solve", "--instance", &inst, "--alg", "stable", "--k", "2", "--cap", "bogus=1"], &[])), 2);
    assert_eq!(code(&kmed(&["frobnicate"], &[])), 2);
}

#[test]
fn verify_passes_on_a_fresh_report_and_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_random(dir.path(), "i.json", 3, 5, 4);
    let report = dir.path().join("r.json");
    let out = kmed(&["solve", "--instance", &inst, "--alg", "greedy", "--f", "3", "--out", path(&report)], &[]);
    assert_eq!(code(&out), 0);
    let out = kmed(&["verify", "--instance", &inst, "--report", path(&report)], &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(json(&out.stdout)["passed"], true);

    let mut r = json(&std::fs::read(&report).unwrap());
    r["output"]["greedy"]["alpha_star"][0] = Value::String("1000/1".into());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&r).unwrap()).unwrap();
    let out = kmed(&["verify", "--instance", &inst, "--report", path(&bad)], &[]);
    assert_eq!(code(&out), 4);
    let v = json(&out.stdout);
    let dual = v["verdicts"].as_array().unwrap().iter().find(|a| a["check"] == "dual_feasibility").unwrap();
    assert_eq!(dual["status"], "fail");
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_random(dir.path(), "i.json", 3, 4, 3);
    let missing = dir.path().join("absent.json");
    let out = kmed(&["verify", "--instance", &inst, "--report", path(&missing)], &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("kmed: "));
}

#[test]
fn bench_writes_one_row_per_instance_and_algorithm() {
    let out = kmed(
        &[
            "bench",
            "--generate",
            "20",
            "--seed",
            "5",
            "--alg",
            "greedy,merge,main",
            "--k",
            "2",
            "--f",
            "4",
            "--restarts",
            "2",
        ],
        &[],
    );
    assert!(matches!(code(&out), 0 | 3), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 60);
    for row in &rows {
        assert_eq!(&row[col("audits_pass")], "true");
        if &row[col("algorithm")] == "merge" {
            let (p, qd) = row[col("ratio")].split_once('/').unwrap();
            let r = p.parse::<f64>().unwrap() / qd.parse::<f64>().unwrap();
            assert!(r <= 2.0 / (1.0 - 3.0 / 8.0) + 0.01, "merge ratio {r}");
        }
    }
}

#[test]
fn bench_on_an_empty_corpus_prints_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = kmed(&["bench", "--corpus", path(dir.path()), "--alg", "greedy", "--f", "1"], &[]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("instance,algorithm"));
}

#[test]
fn oracle_reports_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("planted.json");
    assert_eq!(code(&kmed(&["gen", "--seed", "1", "--out", path(&file), "stable", "--k", "2"], &[])), 0);
    let inst = json(&std::fs::read(&file).unwrap());
    let out = kmed(&["oracle", "--instance", path(&file), "--k", "2"], &[]);
    assert_eq!(code(&out), 0);
    let v = json(&out.stdout);
    assert_eq!(v["value"], inst["labels"]["opt"]);
    assert_eq!(code(&kmed(&["oracle", "--instance", path(&file)], &[])), 2);
}

#[test]
fn caps_come_from_env_then_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_random(dir.path(), "i.json", 8, 6, 5);
    let caps = dir.path().join("caps.json");
    std::fs::write(&caps, r#"{"candidates": 40}"#).unwrap();
    let env = [("KMED_CAP_CANDIDATES", "30"), ("KMED_CAP_EXP_OUTER", "5")];
    let run = |extra: &[&str]| {
        let mut args = vec!["solve", "--instance", inst.as_str(), "--alg", "stable", "--k", "2", "--restarts", "1"];
        args.extend_from_slice(extra);
        json(&kmed(&args, &env).stdout)["config"]["caps"].clone()
    };
    let c = run(&[]);
    assert_eq!((c["candidates"].as_u64(), c["exp_outer"].as_u64()), (Some(30), Some(5)));
    let c = run(&["--caps", path(&caps)]);
    assert_eq!((c["candidates"].as_u64(), c["exp_outer"].as_u64()), (Some(40), Some(5)));
    let c = run(&["--caps", path(&caps), "--cap", "candidates=50"]);
    assert_eq!((c["candidates"].as_u64(), c["restarts"].as_u64()), (Some(50), Some(1)));
}

#[test]
fn capped_search_exits_3_with_a_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_random(dir.path(), "i.json", 2, 8, 6);
    let out = kmed(&["solve", "--instance", &inst, "--alg", "stable", "--k", "3", "--cap", "candidates=1"], &[]);
    assert_eq!(code(&out), 3);
    let r = json(&out.stdout);
    assert_eq!(r["partial"], true);
    assert!(!r["truncated"].as_array().unwrap().is_empty());
    assert_eq!(r["centers"].as_array().unwrap().len(), 3);
}

#[test]
fn reports_are_stable_across_runs_and_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_random(dir.path(), "i.json", 6, 9, 6);
    let args = ["solve", "--instance", inst.as_str(), "--alg", "main", "--k", "3", "--seed", "4"];
    let a = kmed(&args, &[]);
    let b = kmed(&args, &[]);
    let mut par = args.to_vec();
    par.push("--parallel");
    let c = kmed(&par, &[]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(code(&a), code(&c));
}
