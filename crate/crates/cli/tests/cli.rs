use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/corpus.csv");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_techcast"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn dir_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_column(p: PathBuf, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn describe_partitions_and_alpha_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let d10 = tmp.path().join("a10");
    let d05 = tmp.path().join("a05");
    ok(&["describe", "--input", CORPUS, "--out", dir_str(&d10)]);
    ok(&[
        "describe",
        "--input",
        CORPUS,
        "--out",
        dir_str(&d05),
        "--alpha",
        "0.001",
    ]);
    let loose = read_json(d10.join("describe.json"));
    let strict = read_json(d05.join("describe.json"));
    assert_eq!(loose["n_series"], 12);
    assert_eq!(loose["n_improving"], 8);
    assert_eq!(loose["excluded"].as_array().unwrap().len(), 4);
    assert!(strict["n_improving"].as_u64() <= loose["n_improving"].as_u64());
    assert!(loose["regression"]["linear"]["slope"].is_number());

    let summary = fs::read_to_string(d10.join("summary.csv")).unwrap();
    assert!(summary.starts_with("technology,sector,T,mu,p_value,K,theta,improving\n"));
    let run = read_json(d10.join("run.json"));
    assert_eq!(run["command"], "describe");
    assert_eq!(run["config"]["alpha"], 0.1);
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "technology,year,cost\n").unwrap();
    let out = run(&["describe", "--input", dir_str(&empty), "--out", dir_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "technology,year,cost\na,2000,1\na,2001,0\n").unwrap();
    let out = run(&["describe", "--input", dir_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let missing = run(&["hindcast", "--input", "/nonexistent/file.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = run(&[
        "forecast",
        "--input",
        CORPUS,
        "--tech",
        "Nope",
        "--out",
        dir_str(tmp.path()),
    ]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["validate", "--input", CORPUS, "--reps", "0"],
        vec!["hindcast", "--input", CORPUS, "--window", "3"],
        vec![
            "forecast",
            "--input",
            CORPUS,
            "--tech",
            "Photovoltaics",
            "--theta",
            "1.5",
        ],
        vec![
            "validate",
            "--input",
            CORPUS,
            "--theta",
            "0.2",
            "--theta-from",
            "weighted",
        ],
        vec!["validate", "--input", CORPUS, "--grid", "0:2:0.1", "--reps", "5"],
        vec!["validate", "--input", CORPUS, "--robustness", "bogus", "--reps", "5"],
        vec!["trend", "--f", "1", "--gf", "1.1", "--s", "2", "--gs", "1.2"],
        vec!["frobnicate"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn hindcast_counts_and_weighting() {
    let tmp = tempfile::tempdir().unwrap();
    let pooled = tmp.path().join("pooled");
    let equal = tmp.path().join("equal");
    ok(&[
        "hindcast",
        "--input",
        CORPUS,
        "--out",
        dir_str(&pooled),
        "--theta",
        "0.6",
    ]);
    ok(&[
        "hindcast",
        "--input",
        CORPUS,
        "--out",
        dir_str(&equal),
        "--weighting",
        "equal-tech",
    ]);

    // improving series have T = 34, 18, 20, 22, 24, 26, 28, 34; at m = 5 each
    // contributes sum over tau <= 20 of (T - 6 - tau + 1)
    let expected: usize = [34usize, 18, 20, 22, 24, 26, 28, 34]
        .iter()
        .map(|&t| (1..=20).map(|tau| (t + 1).saturating_sub(5 + tau + 1)).sum::<usize>())
        .sum();
    let records = fs::read_to_string(pooled.join("records.csv")).unwrap();
    assert_eq!(records.lines().count() - 1, expected);
    assert_eq!(read_json(pooled.join("hindcast.json"))["n_records"], expected);

    let a = csv_column(pooled.join("growth.csv"), "xi_empirical");
    let b = csv_column(equal.join("growth.csv"), "xi_empirical");
    assert_eq!(a.len(), 20);
    assert_ne!(a, b);
    let pred = csv_column(pooled.join("growth.csv"), "xi_pred_theta");
    let pred0 = csv_column(pooled.join("growth.csv"), "xi_pred_theta0");
    assert!(pred.iter().zip(&pred0).skip(1).all(|(t, z)| t > z));
}

#[test]
fn longer_window_shrinks_the_error() {
    let tmp = tempfile::tempdir().unwrap();
    let m5 = tmp.path().join("m5");
    let m20 = tmp.path().join("m20");
    ok(&["hindcast", "--input", CORPUS, "--out", dir_str(&m5)]);
    ok(&["hindcast", "--input", CORPUS, "--out", dir_str(&m20), "--window", "20"]);
    let short = read_json(m20.join("hindcast.json"));
    // T = 18 and 20 cannot host a 20-difference window plus one target
    assert_eq!(short["too_short"].as_array().unwrap().len(), 2);
    let a = csv_column(m5.join("growth.csv"), "xi_empirical");
    let b = csv_column(m20.join("growth.csv"), "xi_empirical");
    assert!(a.iter().zip(&b).take(5).all(|(x, y)| y < x), "{a:?} vs {b:?}");
}

#[test]
fn validate_is_reproducible_and_thread_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let args = |threads| {
        vec![
            "--threads",
            threads,
            "validate",
            "--input",
            CORPUS,
            "--out",
            dir_str(&out),
            "--reps",
            "60",
            "--grid",
            "0:0.9:0.3",
            "--sweep",
            "--robustness",
            "vary-m=4,8",
            "--seed",
            "9",
        ]
    };
    let stdout_a = ok(&args("1"));
    let first = snapshot(&out);
    let stdout_b = ok(&args("4"));
    let second = snapshot(&out);
    assert_eq!(stdout_a, stdout_b);
    // --threads is left out of run.json because no output depends on it
    assert_eq!(first, second);
    for name in [
        "theta.json",
        "band_theta0.csv",
        "band_theta.csv",
        "deviation.json",
        "sweep.json",
        "robustness_1.json",
        "run.json",
    ] {
        assert!(first.contains_key(name), "{name} missing");
    }
    let theta = read_json(out.join("theta.json"));
    let resolved = theta["theta"].as_f64().unwrap();
    assert!([0.0, 0.3, 0.6, 0.9].contains(&resolved));
    assert_eq!(theta["matched"]["theta_m"].as_f64(), Some(resolved));
    let run = read_json(out.join("run.json"));
    assert_eq!(run["resolved"]["theta"].as_f64(), Some(resolved));
    assert_eq!(run["config"]["seed"], 9);
    assert_eq!(run["resolved"]["replications"]["deviation"], 60);
}

#[test]
fn validate_with_fixed_theta_skips_matching() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    ok(&[
        "validate",
        "--input",
        CORPUS,
        "--out",
        dir_str(&out),
        "--reps",
        "30",
        "--theta",
        "-0.2",
    ]);
    let theta = read_json(out.join("theta.json"));
    assert_eq!(theta["theta"], -0.2);
    assert!(theta["matched"].is_null());
    let dev = read_json(out.join("deviation.json"));
    assert_eq!(dev[0]["theta"], -0.2);
    for p in ["p_sum_abs", "p_sum_sq", "p_max_abs"] {
        let v = dev[0][p].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn forecast_writes_json_and_plot_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("f");
    ok(&[
        "forecast",
        "--input",
        CORPUS,
        "--tech",
        "Photovoltaics",
        "--horizon",
        "17",
        "--theta",
        "0.63",
        "--out",
        dir_str(&out),
    ]);
    let records =
        techcast::forecasting::parse_forecast_json(&fs::read_to_string(out.join("forecast.json")).unwrap()).unwrap();
    assert_eq!(records.len(), 17);
    assert!(records
        .iter()
        .all(|r| r.origin_year == 2009 && r.technology == "Photovoltaics"));
    assert!(records.windows(2).all(|w| w[1].sd_log > w[0].sd_log));
    let q50 = csv_column(out.join("quantiles.csv"), "q50");
    for (q, r) in q50.iter().zip(&records) {
        assert!((q / r.median_cost - 1.0).abs() < 1e-12);
    }
    let years = csv_column(out.join("bands.csv"), "year");
    assert_eq!(years.first(), Some(&2010.0));
    assert_eq!(years.last(), Some(&2026.0));
    assert_eq!(read_json(out.join("run.json"))["resolved"]["m"], 33);
}

#[test]
fn compare_reproduces_the_crossing_time() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    ok(&[
        "compare",
        "--a-cost",
        "1",
        "--a-mu",
        "-0.10",
        "--a-k",
        "0.15",
        "--b-cost",
        "0.333333333333",
        "--b-mu",
        "0",
        "--b-k",
        "0.05,0.15,0.25",
        "--window",
        "33",
        "--theta",
        "0.63",
        "--out",
        dir_str(&out),
    ]);
    let doc = read_json(out.join("compare.json"));
    let taus: Vec<f64> = doc["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["tau_half"].as_f64().unwrap())
        .collect();
    assert_eq!(taus.len(), 3);
    for t in &taus {
        assert!((t - 3f64.ln() / 0.1).abs() < 1e-6, "{t}");
    }
    let p = csv_column(out.join("crossing_K0.05.csv"), "p_cross");
    assert_eq!(p.len(), 40);
    assert!(p.windows(2).all(|w| w[1] >= w[0]));

    let from_data = tmp.path().join("d");
    ok(&[
        "compare",
        "--input",
        CORPUS,
        "--tech",
        "Photovoltaics",
        "--b-cost",
        "0.1",
        "--b-mu",
        "0",
        "--b-k",
        "0.1",
        "--out",
        dir_str(&from_data),
    ]);
    assert_eq!(read_json(from_data.join("run.json"))["resolved"]["m"], 33);
}

#[test]
fn trend_prints_the_crossing_year() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        "trend",
        "--f",
        "0.0022",
        "--gf",
        "1.425",
        "--s",
        "0.2",
        "--gs",
        "1.026",
        "--out",
        dir_str(tmp.path()),
    ]);
    assert_eq!(stdout.trim(), "13.7 years");
    let years = read_json(tmp.path().join("trend.json"))["years"].as_f64().unwrap();
    assert!((years - 13.7).abs() < 0.05);
}
