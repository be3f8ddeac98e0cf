use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn coordc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coordc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = coordc(args);
    assert!(
        out.status.success(),
        "coordc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = coordc(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn rang_instance_carries_generator_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "r.json");
    ok(&["gen", "rang", "--rho", "1", "--n", "64", "--seed", "7", "-o", s(&f)]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&f).unwrap()).unwrap();
    assert_eq!(v["n"], 64);
    assert_eq!(v["k"], 64);
    let params = &v["generator"]["params"];
    assert_eq!(params["rho"], 1);
    assert_eq!(params["seed"], 7);
    assert_eq!(params["kappa"], 8);
    assert_eq!(params["block_size"], 4);
    assert_eq!(v["edges"].as_array().unwrap().len(), 64 * 3);
    let report: Value = serde_json::from_str(&ok(&["verify", "rang", "--instance", s(&f)])).unwrap();
    assert!(report["max_matching"].as_u64().unwrap() >= 56);
}

#[test]
fn rang_divisibility_error() {
    let (status, err) = code(&["gen", "rang", "--rho", "1", "--n", "10"]);
    assert_eq!(status, 2);
    assert!(err.contains("16 rho^2"), "{err}");
}

#[test]
fn tampered_rang_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "r.json");
    ok(&["gen", "rang", "--rho", "1", "--n", "32", "--seed", "1", "-o", s(&f)]);
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&f).unwrap()).unwrap();
    v["edges"].as_array_mut().unwrap().pop();
    std::fs::write(&f, v.to_string()).unwrap();
    assert_eq!(code(&["verify", "rang", "--instance", s(&f)]).0, 4);
}

#[test]
fn non_rang_instance_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "m.json");
    ok(&["gen", "planted", "--k", "2", "--supply", "4", "--density", "0.3", "-o", s(&f)]);
    let (status, stderr) = code(&["verify", "rang", "--instance", s(&f)]);
    assert_eq!(status, 2, "{stderr}");
}

#[test]
fn stable_generation_and_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "s.json");
    let m = path(dir.path(), "m.json");
    ok(&["gen", "stable", "--n", "50", "--k", "5", "--cap", "10", "--seed", "3", "-o", s(&f)]);
    ok(&["verify", "stable", "--instance", s(&f)]);
    let report = ok(&["stable-coordinate", "--instance", s(&f), "--matching-out", s(&m)]);
    let row = &csv_rows(&report)[0];
    // 5 fields of ceil(log2(52)) = 6 bits.
    assert_eq!(row[4], "30");
    assert_eq!(row[5], "1.0");
    ok(&["verify", "stable", "--instance", s(&f), "--matching", s(&m)]);

    // Everyone unmatched leaves empty seats that students want.
    std::fs::write(&m, serde_json::to_string(&vec![Value::Null; 50]).unwrap()).unwrap();
    let (status, _) = code(&["verify", "stable", "--instance", s(&f), "--matching", s(&m)]);
    assert_eq!(status, 4);
}

#[test]
fn routing_example_meets_regret_bound_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.json");
    let p = path(dir.path(), "paths.json");
    ok(&["gen", "routing", "--topology", "identical", "--n", "100", "--m", "2", "--slope", "0.01", "-o", s(&g)]);
    let out = ok(&[
        "routing-coordinate", "--instance", s(&g), "--alpha", "0.3", "--r", "5", "--format", "json", "--paths-out", s(&p),
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v[0]["objective"].as_f64().unwrap() <= 0.42);
    ok(&["verify", "routing", "--instance", s(&g), "--paths", s(&p), "--epsilon", "0.42"]);
    let replay: Value = serde_json::from_str(&ok(&["verify", "routing", "--instance", s(&g), "--alpha", "0.3", "--r", "5"])).unwrap();
    assert!(replay["replay_mismatches"].as_array().unwrap().is_empty());
}

#[test]
fn routing_precondition_is_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.json");
    ok(&["gen", "routing", "--n", "20", "--m", "3", "--seed", "2", "-o", s(&g)]);
    let (status, err) = code(&["routing-coordinate", "--instance", s(&g), "--alpha", "0.001", "--r", "1"]);
    assert_eq!(status, 3);
    assert!(err.contains("must exceed 2 lambda m (r + 1)"), "{err}");
    assert_eq!(code(&["routing-coordinate", "--instance", s(&g)]).0, 2);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "p.json");
    ok(&["gen", "planted", "--k", "4", "--supply", "10", "--seed", "5", "-o", s(&inst)]);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let rep = path(dir.path(), &format!("rep{i}.json"));
        let msg = path(dir.path(), &format!("msg{i}.hex"));
        let out = Command::new(env!("CARGO_BIN_EXE_coordc"))
            .env("COORDC_THREADS", threads)
            .args([
                "match-coordinate", "--instance", s(&inst), "--seed", "9", "--format", "json", "-o", s(&rep),
                "--message-out", s(&msg),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((std::fs::read(&rep).unwrap(), std::fs::read(&msg).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: Value = serde_json::from_slice(&outputs[0].0).unwrap();
    assert_eq!(v[0]["protocol"], "rec");
    assert_eq!(v[0]["opt"], 40.0);
    assert_eq!(v[0]["wall_time_ms"], 0.0);
}

#[test]
fn bad_thread_count_is_a_parameter_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_coordc"))
        .env("COORDC_THREADS", "zero")
        .args(["gen", "multiple-index", "--t", "2", "--k", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_matching_baseline_is_optimal() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "m.json");
    ok(&["gen", "matching", "--n", "30", "--k", "5", "--supply", "3", "--density", "0.3", "--seed", "2", "-o", s(&inst)]);
    let row = &csv_rows(&ok(&["match-coordinate", "--instance", s(&inst), "--baseline"]))[0];
    assert_eq!(row[0], "full-matching");
    // 30 fields of ceil(log2(6)) = 3 bits.
    assert_eq!(row[4], "90");
    assert_eq!(row[5], row[6]);
}

#[test]
fn lifted_instance_has_b_copies() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "l.json");
    ok(&["gen", "lifted", "--rho", "1", "--n", "16", "--b", "4", "--seed", "1", "-o", s(&f)]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&f).unwrap()).unwrap();
    assert_eq!(v["n"], 64);
    assert_eq!(v["k"], 16);
    assert!(v["supplies"].as_array().unwrap().iter().all(|b| b == 4));
    let row = &csv_rows(&ok(&["match-coordinate", "--instance", s(&f), "--baseline"]))[0];
    assert!(row[6].parse::<f64>().unwrap() >= 56.0);
}

#[test]
fn sampling_reduction_check() {
    let dir = tempfile::tempdir().unwrap();
    let f = path(dir.path(), "r.json");
    ok(&["gen", "rang", "--rho", "1", "--n", "64", "--seed", "3", "-o", s(&f)]);
    let v: Value = serde_json::from_str(&ok(&["verify", "reduction", "--instance", s(&f), "--samples", "500"])).unwrap();
    assert!(v["mean"].as_f64().unwrap() >= v["threshold"].as_f64().unwrap());
}

#[test]
fn private_coordination_and_dp_check() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.json");
    let b = path(dir.path(), "b.json");
    let cands = path(dir.path(), "c.json");
    let base = r#"{"schema_version":1,"n":3,"k":2,"supplies":[1,1],"edges":[[0,0],[1,0],[1,1],[2,1]]}"#;
    let neighbor = r#"{"schema_version":1,"n":3,"k":2,"supplies":[1,1],"edges":[[0,0],[0,1],[1,0],[1,1],[2,1]]}"#;
    std::fs::write(&a, base).unwrap();
    std::fs::write(&b, neighbor).unwrap();
    // Width byte 1 followed by two 1-bit multiples and the terminator bit,
    // plus the all-zero message of width 0.
    std::fs::write(&cands, r#"["0001", "0104", "0105", "0106", "0107"]"#).unwrap();
    let out = ok(&["private-coordinate", "--instance", s(&a), "--candidates", s(&cands), "--eta", "0.05", "--epsilon", "0.5"]);
    assert!(["0", "10"].contains(&csv_rows(&out)[0][4].as_str()));
    std::fs::write(&cands, r#"["0000"]"#).unwrap();
    assert_eq!(code(&["private-coordinate", "--instance", s(&a), "--candidates", s(&cands)]).0, 2);
    let out = ok(&[
        "private-coordinate", "--instance", s(&a), "--levels", "3", "--max-price", "1.0", "--eta", "0.05", "--epsilon", "0.5",
    ]);
    let row = &csv_rows(&out)[0];
    assert_eq!(row[0], "pri-coor");
    let v: Value = serde_json::from_str(&ok(&[
        "verify", "dp", "--instances", s(&a), s(&b), "--levels", "3", "--eta", "0.05", "--epsilon", "0.5",
    ]))
    .unwrap();
    assert_eq!(v["holds"], true);
    assert_eq!(v["neighbor_pairs"], 1);
    assert!(v["max_log_ratio"].as_f64().unwrap() <= 1.0 + 1e-9);
}

#[test]
fn sweep_empty_grid_is_header_only() {
    let out = ok(&["sweep", "--protocol", "stable", "--param", "n", "--values", ""]);
    assert_eq!(out, "parameter,value,seed,message_bits,objective,status\n");
}

#[test]
fn sweep_rejects_unknown_parameter() {
    assert_eq!(code(&["sweep", "--protocol", "stable", "--param", "eta", "--values", "1"]).0, 2);
}

#[test]
fn sweep_marks_failed_cells_and_continues() {
    let out = ok(&["sweep", "--protocol", "routing", "--param", "epsilon", "--values", "0.01,1.0", "--n", "20", "--m", "3"]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows[0][5].starts_with("error: precondition violated"), "{:?}", rows[0]);
    assert_eq!(rows[1][5], "ok");
}

#[test]
fn stable_sweep_bits_are_exact() {
    let out = ok(&["sweep", "--protocol", "stable", "--param", "k", "--values", "2,4,8", "--n", "30", "--cap", "5", "--seeds", "2"]);
    for row in csv_rows(&out) {
        let k: usize = row[1].parse().unwrap();
        // ceil(log2(32)) = 5 bits per school.
        assert_eq!(row[3].parse::<usize>().unwrap(), 5 * k);
        assert_eq!(row[4], "1.0");
    }
}

#[test]
fn rec_sweep_bits_grow_linearly_in_k() {
    let out = ok(&["sweep", "--protocol", "rec", "--param", "k", "--values", "2,4,8,16", "--n-per-k", "10", "--eta", "0.01", "--epsilon", "0.01"]);
    let pts: Vec<(f64, f64)> = csv_rows(&out)
        .iter()
        .map(|r| (r[1].parse().unwrap(), r[3].parse().unwrap()))
        .collect();
    assert_eq!(pts.len(), 4);
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    assert!(sxy * sxy / (sxx * syy) >= 0.95, "{pts:?}");
}

#[test]
fn multiple_index_sweep_reaches_full_success() {
    let out = ok(&["sweep", "--protocol", "multiple-index", "--param", "bits", "--values", "0,16", "--t", "8", "--k", "4"]);
    let rows = csv_rows(&out);
    let r0: f64 = rows[0][4].parse().unwrap();
    assert!((r0 - 0.25).abs() < 0.05);
    assert_eq!(rows[1][4], "1.0");
}
