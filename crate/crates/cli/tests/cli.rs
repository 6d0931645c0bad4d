use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mcgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcgraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_er() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mcgraph(&[
        "generate",
        "--family",
        "er",
        "--n",
        "1000",
        "--out",
        dir_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&tmp.path().join("summary.json"));
    assert_eq!(s["sigma1"], 1000.0);
    assert_eq!(s["sigma2"], 1000.0);
    assert_eq!(s["kappa"], 1000);
    assert_eq!(s["kappa_discrepancy"], 0.0);
    let masses = fs::read_to_string(tmp.path().join("masses.csv")).unwrap();
    assert_eq!(masses.lines().count(), 1001);
    assert_eq!(masses.lines().next(), Some("mass"));
}

#[test]
fn generate_nr_quantile_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mcgraph(&[
        "generate",
        "--family",
        "nr",
        "--dist",
        "pareto",
        "--a",
        "3",
        "--n",
        "4",
        "--out",
        dir_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0);
    let masses: Vec<f64> = fs::read_to_string(tmp.path().join("masses.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    // (4/i)^(1/3) for i = 1, 2, 3, normalized by the square root of their sum
    let w: Vec<f64> = (1..=3).map(|i| (4.0 / i as f64).cbrt()).collect();
    let root = w.iter().sum::<f64>().sqrt();
    assert_eq!(masses.len(), 3);
    for (m, w) in masses.iter().zip(&w) {
        assert!((m - w / root).abs() < 1e-12, "{m} vs {}", w / root);
    }
}

#[test]
fn generate_ger() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mcgraph(&[
        "generate",
        "--family",
        "ger",
        "--n",
        "9",
        "--m",
        "3",
        "--theta",
        "2",
        "--out",
        dir_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0);
    let masses = fs::read_to_string(tmp.path().join("masses.csv")).unwrap();
    let rows: Vec<&str> = masses.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(&rows[..4], &["2", "2", "2", "1"]);
    assert_eq!(json(&tmp.path().join("summary.json"))["kappa"], 12);
}

fn traj_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("traj_"))
        .map(|p| {
            (
                p.file_name().unwrap().to_str().unwrap().to_string(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_reproducible_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (name, workers, record) in [
        ("a", "1", "full"),
        ("b", "4", "full"),
        ("c", "8", "full"),
        ("d", "1", "grid"),
        ("e", "4", "grid"),
    ] {
        let dir = tmp.path().join(name);
        let out = mcgraph(&[
            "simulate",
            "--family",
            "ger",
            "--n",
            "500",
            "--reps",
            "20",
            "--seed",
            "11",
            "--workers",
            workers,
            "--record",
            record,
            "--out",
            dir_str(&dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(traj_files(&dir));
    }
    assert_eq!(runs[0].len(), 20);
    assert_eq!(runs[0][0].0, "traj_00000.csv");
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    assert_eq!(runs[3], runs[4]);
    assert!(String::from_utf8_lossy(&runs[0][0].1).starts_with("event_index,time,K,S2\n0,0,522,"));
    assert!(String::from_utf8_lossy(&runs[3][0].1).starts_with("t,K\n"));

    let m = json(&tmp.path().join("a/manifest.json"));
    assert_eq!(m["seeds"].as_array().unwrap().len(), 20);
    assert_eq!(m["seeds"][3]["stream"], 3);
    assert_eq!(
        m["config_hash"],
        json(&tmp.path().join("c/manifest.json"))["config_hash"]
    );
}

#[test]
fn critical_horizon_refused_without_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("x");
    let out = mcgraph(&[
        "simulate",
        "--n",
        "50",
        "--c",
        "1.2",
        "--reps",
        "2",
        "--out",
        dir_str(&dir),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sub-critical"));
    assert!(!dir.exists());
    let out = mcgraph(&[
        "simulate",
        "--n",
        "50",
        "--c",
        "1.2",
        "--reps",
        "2",
        "--allow-critical",
        "--out",
        dir_str(&dir),
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn analyze_checks_hash_and_data() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let common = [
        "--family",
        "er",
        "--n",
        "2000",
        "--reps",
        "50",
        "--seed",
        "3",
        "--out",
        dir_str(&dir),
    ];
    assert_eq!(code(&mcgraph(&[&["simulate"][..], &common].concat())), 0);
    let out = mcgraph(&[&["analyze"][..], &common].concat());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["ensemble.csv", "reports.json", "fluid_curve.csv", "variance_curve.csv"] {
        assert!(dir.join("analysis").join(f).exists(), "{f}");
    }
    let ens = fs::read_to_string(dir.join("analysis/ensemble.csv")).unwrap();
    assert_eq!(
        ens.lines().next(),
        Some("t,mean_scaled_K,fluid,mean_Z,var_Z,se_mean,se_var")
    );
    let reports = json(&dir.join("analysis/reports.json"));
    let first = &reports["reports"][0];
    for key in ["name", "statistic", "p_value", "tolerance", "verdict"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    assert_eq!(first["verdict"], "pass");

    let out = mcgraph(&[
        "analyze",
        "--family",
        "er",
        "--n",
        "2000",
        "--reps",
        "50",
        "--seed",
        "4",
        "--out",
        dir_str(&dir),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));

    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = mcgraph(&["analyze", "--out", dir_str(&empty)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn nr_analyzed_in_original_time() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("nr");
    let common = [
        "--family",
        "nr",
        "--dist",
        "pareto",
        "--a",
        "3",
        "--n",
        "5000",
        "--c",
        "0.8",
        "--grid",
        "8",
        "--reps",
        "100",
        "--seed",
        "5",
        "--out",
        dir_str(&dir),
    ];
    assert_eq!(code(&mcgraph(&[&["simulate"][..], &common].concat())), 0);
    assert_eq!(code(&mcgraph(&[&["analyze"][..], &common].concat())), 0);
    let curve = fs::read_to_string(dir.join("analysis/fluid_curve.csv")).unwrap();
    let last: Vec<f64> = curve
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    // scaled time 0.8 is original time 0.4 where 1 - 0.75 s = 0.7
    assert!((last[1] - 0.4).abs() < 1e-12);
    assert!((last[4] - 0.7).abs() < 1e-12);
    let reports = json(&dir.join("analysis/reports.json"));
    let slope = reports["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == "fluid_slope_original_time")
        .unwrap();
    assert!((slope["statistic"].as_f64().unwrap() + 0.75).abs() < 0.03);
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# desk run\nfamily = ger\nn = 16\nm = 2\ntheta = 3\n").unwrap();
    let out = mcgraph(&[
        "generate",
        "--config",
        dir_str(&cfg),
        "--m",
        "4",
        "--out",
        dir_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&tmp.path().join("summary.json"))["kappa"], 20);

    fs::write(&cfg, "famly = er\n").unwrap();
    assert_eq!(
        code(&mcgraph(&[
            "generate",
            "--config",
            dir_str(&cfg),
            "--out",
            dir_str(tmp.path())
        ])),
        1
    );
}

#[test]
fn oracle_small_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mcgraph(&[
        "oracle",
        "--n",
        "3",
        "--t",
        "0.2",
        "--reps",
        "2000",
        "--out",
        dir_str(tmp.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let exact = fs::read_to_string(tmp.path().join("exact_k.csv")).unwrap();
    let rows: Vec<Vec<f64>> = exact
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    let e3 = (-0.6f64).exp();
    assert!((rows[2][1] - e3).abs() < 1e-8);
    // too many components for the exact chain
    let out = mcgraph(&["oracle", "--n", "20", "--t", "0.1", "--out", dir_str(tmp.path())]);
    assert_eq!(code(&out), 1);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&mcgraph(&["frobnicate"])), 1);
    assert_eq!(code(&mcgraph(&["simulate", "--n", "abc"])), 1);
    assert_eq!(code(&mcgraph(&["simulate", "--n", "1"])), 1);
    assert_eq!(code(&mcgraph(&["--help"])), 0);
}

#[test]
fn quick_verify_reports_every_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mcgraph(&["verify", "--profile", "quick", "--out", dir_str(tmp.path())]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout
        .lines()
        .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
        .collect();
    assert_eq!(lines.len(), 12, "{stdout}");
    // the Riemann-sum criterion cannot pass at the stated n; everything else must
    assert!(lines[9].starts_with("[FAIL] #10"), "{stdout}");
    assert_eq!(lines.iter().filter(|l| l.starts_with("[FAIL]")).count(), 1, "{stdout}");
    assert_eq!(code(&out), 2);
    assert_eq!(json(&tmp.path().join("verify.json")).as_array().unwrap().len(), 12);
}
