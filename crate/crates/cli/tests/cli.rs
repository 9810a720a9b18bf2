use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn sdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdr")).args(args).output().expect("run sdr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_study(dir: &Path, name: &str, rows: &[(&str, &str, i8, i8, Option<f64>)]) -> PathBuf {
    let mut text = String::from("param_id,module_id,proposed_sign,validation_sign,confidence_score\n");
    for (p, m, a, b, s) in rows {
        let score = s.map(|x| x.to_string()).unwrap_or_default();
        text.push_str(&format!("{p},{m},{a},{b},{score}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn bound_equal_width_example() {
    let o = sdr(&["bound", "--widths", "1,1,1,1,1,1,1,1,1,1", "--mu", "5", "--s", "8", "--compare-hoeffding"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("log_bound")).unwrap();
    let v = num(line.split_whitespace().nth(1).unwrap());
    assert!((v + 1.92745).abs() < 1e-4);
    assert!(text.contains("hoeffding_log_bound  -1.8000000000000000e0"));
}

#[test]
fn bound_trivial_and_impossible() {
    let o = sdr(&["bound", "--widths", "1,2,3", "--mu", "3", "--s", "2", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["bound"], 1.0);
    assert_eq!(v["log_bound"], 0.0);
    let o = sdr(&["bound", "--widths", "1,2,3", "--mu", "3", "--s", "7", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["bound"], 0.0);
}

#[test]
fn bound_reads_width_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("w.txt");
    fs::write(&path, "1\n1\n1\n1\n1\n1\n1\n1\n1\n1\n").unwrap();
    let arg = format!("@{}", path.display());
    let o = sdr(&["bound", "--widths", &arg, "--mu", "5", "--s", "8", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["log_bound"].as_f64().unwrap() + 1.927_447_570_217_574).abs() < 1e-9);
}

#[test]
fn malformed_flags_exit_2() {
    assert_eq!(sdr(&["bound", "--widths", "1,-1", "--mu", "0.5", "--s", "1"]).status.code(), Some(2));
    assert_eq!(sdr(&["bound", "--widths", "1", "--mu", "0.5"]).status.code(), Some(2));
    assert_eq!(sdr(&["simulate", "--k-grid", "0.5", "--out", "/dev/null"]).status.code(), Some(2));
    assert_eq!(sdr(&["simulate", "--sigma-grid", "a", "--out", "/dev/null"]).status.code(), Some(2));
}

#[test]
fn assess_perfect_agreement() {
    let dir = TempDir::new().unwrap();
    let study = write_study(
        dir.path(),
        "s.csv",
        &[("a", "0", 1, 1, Some(0.9)), ("b", "1", -1, -1, Some(0.5)), ("c", "2", 1, 1, Some(0.1))],
    );
    let out = dir.path().join("sweep.csv");
    let o = sdr(&["assess", "--study", study.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), vec!["1", "2", "3"]);
    assert!(rows.iter().all(|r| num(&r[1]) == 0.0));
}

#[test]
fn assess_two_module_hand_computation() {
    // Module 0: three members, two agree. Module 1: two members, one agrees.
    let dir = TempDir::new().unwrap();
    let study = write_study(
        dir.path(),
        "s.csv",
        &[
            ("p1", "m0", 1, 1, Some(5.0)),
            ("p2", "m0", 1, 1, Some(5.0)),
            ("p3", "m0", 1, -1, Some(5.0)),
            ("p4", "m1", -1, -1, Some(1.0)),
            ("p5", "m1", -1, 1, Some(1.0)),
        ],
    );
    let out = dir.path().join("sweep.csv");
    let o = sdr(&["assess", "--study", study.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("subset_size,sdp,ci_lower,ci_upper,simultaneous_upper\n"));
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "3");
    assert!((num(&rows[0][1]) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(rows[1][0], "5");
    assert!((num(&rows[1][1]) - 0.4).abs() < 1e-15);
    for r in &rows {
        assert!(num(&r[2]) <= num(&r[1]) && num(&r[1]) <= num(&r[3]));
        // Modules enter whole, so the joint bound is reported.
        assert!(num(&r[4]) >= num(&r[1]));
    }
}

#[test]
fn assess_omits_joint_bound_when_modules_split() {
    let dir = TempDir::new().unwrap();
    let study = write_study(
        dir.path(),
        "s.csv",
        &[("a", "m", 1, 1, Some(2.0)), ("b", "m", 1, 1, Some(1.0)), ("c", "n", 1, -1, Some(1.5))],
    );
    let out = dir.path().join("sweep.csv");
    assert!(sdr(&["assess", "--study", study.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status
        .success());
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[4].is_empty()));
}

#[test]
fn assess_grid_thresholds() {
    let dir = TempDir::new().unwrap();
    let rows: Vec<(String, f64, i8)> =
        (0..40).map(|i| (format!("p{i}"), i as f64 / 39.0, if i % 7 == 0 { -1 } else { 1 })).collect();
    let table: Vec<(&str, &str, i8, i8, Option<f64>)> =
        rows.iter().map(|(p, s, v)| (p.as_str(), p.as_str(), 1, *v, Some(*s))).collect();
    let study = write_study(dir.path(), "s.csv", &table);
    let out = dir.path().join("sweep.csv");
    let o = sdr(&[
        "assess", "--study", study.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--thresholds", "grid:5", "--alpha", "0.1",
    ]);
    assert!(o.status.success());
    let sizes: Vec<usize> = read_csv(&out).iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(sizes.len(), 5);
    assert!(sizes.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*sizes.last().unwrap(), 40);
    assert_eq!(
        sdr(&["assess", "--study", study.to_str().unwrap(), "--out", "/dev/null", "--thresholds", "grid:x"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn assess_schema_violations_exit_2() {
    let dir = TempDir::new().unwrap();
    let dup = write_study(dir.path(), "d.csv", &[("a", "0", 1, 1, Some(1.0)), ("a", "0", 1, 1, Some(1.0))]);
    let bad_sign = write_study(dir.path(), "b.csv", &[("a", "0", 2, 1, Some(1.0))]);
    let no_scores = write_study(dir.path(), "n.csv", &[("a", "0", 1, 1, None)]);
    for s in [dup, bad_sign, no_scores] {
        let o = sdr(&["assess", "--study", s.to_str().unwrap(), "--out", "/dev/null"]);
        assert_eq!(o.status.code(), Some(2), "{}", s.display());
    }
}

#[test]
fn control_selects_everything_when_all_agree() {
    let dir = TempDir::new().unwrap();
    let study = write_study(
        dir.path(),
        "s.csv",
        &[("x", "0", 1, 1, Some(0.3)), ("y", "1", -1, -1, Some(0.8)), ("z", "1", 1, 1, Some(0.5))],
    );
    for method in ["sdp", "ci", "simultaneous"] {
        let out = dir.path().join(format!("{method}.txt"));
        let o = sdr(&[
            "control", "--study", study.to_str().unwrap(), "--target-v", "0.1",
            "--method", method, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        if method == "sdp" {
            assert_eq!(fs::read_to_string(&out).unwrap(), "y\nz\nx\n");
            assert_eq!(v["k_star"], 3);
            assert_eq!(v["guarantee"], "none");
        }
        if method == "simultaneous" {
            assert_eq!(v["guarantee"], "exceedance(0.05)");
        }
    }
}

#[test]
fn control_empty_selection_exits_0() {
    let dir = TempDir::new().unwrap();
    let study = write_study(dir.path(), "s.csv", &[("x", "0", 1, -1, Some(0.3)), ("y", "1", -1, 1, Some(0.8))]);
    let out = dir.path().join("sel.txt");
    let summary = dir.path().join("summary.json");
    let o = sdr(&[
        "control", "--study", study.to_str().unwrap(), "--target-v", "0.1", "--method", "ci",
        "--out", out.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["k_star"], 0);
    assert_eq!(v["trace"].as_array().unwrap().len(), 2);
}

#[test]
fn control_flag_conflicts_exit_2() {
    let dir = TempDir::new().unwrap();
    let study = write_study(dir.path(), "s.csv", &[("x", "0", 1, 1, Some(0.3))]);
    let s = study.to_str().unwrap();
    let base = ["control", "--study", s, "--target-v", "0.1", "--out", "/dev/null"];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        sdr(&a).status.code()
    };
    assert_eq!(with(&["--method", "simultaneous", "--ordering", "parameter"]), Some(2));
    assert_eq!(with(&["--method", "sdp", "--q", "0.3"]), Some(2));
    assert_eq!(with(&["--method", "ci", "--cuts", "4"]), Some(2));
    assert_eq!(with(&["--method", "sdp", "--preprocess", "bogus:1"]), Some(2));
    assert_eq!(with(&["--method", "sdp", "--preprocess", "threshold:0.2"]), Some(0));
    assert_eq!(with(&["--method", "simultaneous", "--preprocess", "top-k:1"]), Some(0));
}

#[test]
fn simulate_is_deterministic_and_filters_methods() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "simulate".to_string(), "--n".into(), "400".into(), "--sigma-grid".into(), "0.3,0.9".into(),
            "--k-grid".into(), "1,10".into(), "--seeds".into(), "1".into(), "--seed".into(), "17".into(),
            "--methods".into(), "bh".into(), "--out".into(), out.to_str().unwrap().into(),
        ]
    };
    let run = |out: &Path| {
        let a: Vec<String> = args(out);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert!(sdr(&refs).status.success());
    };
    run(&a);
    run(&b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("method,sigma,k,seed,discoveries,type_s_proportion,target\n"));
    let rows = read_csv(&a);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[0] == "bh" && r[3] == "17"));
}

#[test]
fn score_external_selection() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o.csv");
    let dump = dir.path().join("cells");
    let o = sdr(&[
        "simulate", "--n", "50", "--sigma-grid", "0.5", "--k-grid", "2", "--methods", "sdr-sdp",
        "--out", out.to_str().unwrap(), "--dump-dir", dump.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let truth = dump.join("sigma0.5_k2_seed0.csv");
    let text = fs::read_to_string(&truth).unwrap();
    assert!(text.starts_with("param_id,theta,rep0,rep1\n"));
    // Claim every parameter positive.
    let mut sel = String::from("param_id,sign\n");
    let mut negatives = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        sel.push_str(&format!("{},1\n", f[0]));
        negatives += usize::from(num(f[1]) < 0.0);
    }
    let sel_path = dir.path().join("sel.csv");
    fs::write(&sel_path, sel).unwrap();
    let o = sdr(&["score", "--truth", truth.to_str().unwrap(), "--selections", sel_path.to_str().unwrap()]);
    assert!(o.status.success());
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let f: Vec<&str> = line.split(',').collect();
    assert_eq!(f[0], "50");
    assert!((num(f[1]) - negatives as f64 / 50.0).abs() < 1e-15);
}
