use std::f64::consts::PI;
use std::process::{Command, Output};

fn unicirc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unicirc"))
        .args(args)
        .env_remove("UNICIRC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV artifact, header excluded.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

#[test]
fn density_grid_rows() {
    let o = unicirc(&["density", "--beta", "2", "--N", "3", "--grid-points", "4"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let thetas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    for (t, want) in thetas.iter().zip([-PI / 2.0, 0.0, PI / 2.0, PI]) {
        assert!((t - want).abs() < 1e-15);
    }
    let rho0: f64 = rows[1][1].parse().unwrap();
    assert!((rho0 - 5.0 / (2.0 * PI)).abs() < 1e-14);
}

#[test]
fn density_exceptional_case() {
    let o = unicirc(&["density", "--beta", "1", "--N", "2", "--grid-points", "4"]);
    let rho: f64 = csv_rows(&stdout(&o))[2][1].parse().unwrap();
    assert!((rho - 0.5).abs() < 1e-14);
}

#[test]
fn degenerate_ensemble_exits_2() {
    let o = unicirc(&["density", "--beta", "2", "--N", "1", "--unimodular"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("atom at theta = 0"));
}

#[test]
fn bad_flags_exit_1_and_help_exits_0() {
    assert_eq!(unicirc(&["density", "--beta", "2"]).status.code(), Some(1));
    assert_eq!(
        unicirc(&["density", "--beta", "x", "--N", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(unicirc(&["--help"]).status.code(), Some(0));
}

#[test]
fn csv_and_json_agree() {
    let args = ["density", "--beta", "4", "--N", "5", "--grid-points", "33"];
    let csv = csv_rows(&stdout(&unicirc(&args)));
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let j = json(&unicirc(&json_args));
    let points = j["points"].as_array().unwrap();
    assert_eq!(points.len(), csv.len());
    for (row, p) in csv.iter().zip(points) {
        assert_eq!(row[0].parse::<f64>().unwrap(), p["theta"].as_f64().unwrap());
        assert_eq!(row[1].parse::<f64>().unwrap(), p["rho"].as_f64().unwrap());
    }
    assert_eq!(j["config"]["beta"], 4);
    assert_eq!(j["config"]["grid_points"], 33);
    assert!(j["version"].is_string());
}

#[test]
fn per_eigenvalue_normalization() {
    let total = unicirc(&["density", "--beta", "2", "--N", "3", "--grid-points", "8"]);
    let per = unicirc(&[
        "density",
        "--beta",
        "2",
        "--N",
        "3",
        "--grid-points",
        "8",
        "--normalization",
        "per-eigenvalue",
    ]);
    for (a, b) in csv_rows(&stdout(&total))
        .iter()
        .zip(csv_rows(&stdout(&per)))
    {
        let (a, b): (f64, f64) = (a[1].parse().unwrap(), b[1].parse().unwrap());
        assert!((a / 3.0 - b).abs() < 1e-15);
    }
}

#[test]
fn sample_is_deterministic() {
    let args = [
        "sample", "--beta", "2", "--N", "2", "--count", "3", "--seed", "7",
    ];
    let a = unicirc(&args);
    let b = unicirc(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# seed=7"));
    assert!(text.contains("# stream_id=0"));
    assert_eq!(csv_rows(&text).len(), 3);
}

#[test]
fn sample_respects_constraint() {
    let o = unicirc(&["sample", "--beta", "4", "--N", "3", "--count", "100"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 100);
    for r in rows {
        assert_eq!(r.len(), 3);
        let phases: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        assert!(phases.windows(2).all(|w| w[0] <= w[1]));
        let s: f64 = phases.iter().sum();
        let defect = (s / (2.0 * PI)).round() * 2.0 * PI - s;
        assert!(defect.abs() < 1e-9, "{phases:?}");
    }
}

#[test]
fn sample_unsupported_beta() {
    assert_eq!(
        unicirc(&["sample", "--beta", "3", "--N", "2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sample_streams_differ() {
    let a = unicirc(&[
        "sample",
        "--beta",
        "1",
        "--N",
        "3",
        "--count",
        "4",
        "--stream-id",
        "0",
    ]);
    let b = unicirc(&[
        "sample",
        "--beta",
        "1",
        "--N",
        "3",
        "--count",
        "4",
        "--stream-id",
        "1",
    ]);
    assert_ne!(csv_rows(&stdout(&a)), csv_rows(&stdout(&b)));
}

#[test]
fn verify_passes_and_power_check_fails() {
    let o = unicirc(&[
        "verify", "--beta", "2", "--N", "3", "--count", "20000", "--seed", "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = json(&o);
    assert_eq!(r["passed"], true);
    assert!(r["chi_square"]["p_value"].as_f64().unwrap() > 1e-3);

    let o = unicirc(&[
        "verify",
        "--beta",
        "2",
        "--N",
        "3",
        "--count",
        "20000",
        "--seed",
        "1",
        "--expect-uniform",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let r = json(&o);
    assert_eq!(r["passed"], false);
    assert_eq!(r["reference"], "uniform");
}

#[test]
fn verify_exceptional_case_uses_closed_form() {
    let o = unicirc(&[
        "verify", "--beta", "1", "--N", "2", "--count", "20000", "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("# reference=closed_form"));
    assert!(csv_rows(&text).iter().all(|r| r[6] == "true"));
}

#[test]
fn morris_values() {
    let value = |args: &[&str]| -> serde_json::Value {
        let mut v = vec!["morris", "--format", "json"];
        v.extend(args);
        json(&unicirc(&v))
    };
    let r = value(&["--n-vars", "2", "--a", "1", "--b", "1", "--lam", "1"]);
    assert!((r["value"].as_f64().unwrap() - 6.0).abs() < 1e-12);
    assert_eq!(r["exact_zero"], false);

    let r = value(&["--n-vars", "2", "--a", "2.5", "--b", "-1.5", "--lam", "0.5"]);
    assert_eq!(r["value"].as_f64(), Some(0.0));
    assert_eq!(r["exact_zero"], true);
    assert_eq!(r["pole"]["j"], 1);
    assert_eq!(r["pole"]["argument"].as_f64(), Some(0.0));

    let r = value(&["--n-vars", "1", "--a", "2.5", "--b", "-1.5", "--lam", "0.5"]);
    assert!((r["value"].as_f64().unwrap() + 0.084_882_636_315_677_51).abs() < 1e-12);
}

#[test]
fn morris_invalid_params_exit_2() {
    let o = unicirc(&[
        "morris", "--n-vars", "2", "--a", "1", "--b", "0.5", "--lam", "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn moments_analytic() {
    let analytic = |beta: &str, n: &str, k: &str| -> f64 {
        let o = unicirc(&[
            "moments", "--beta", beta, "--N", n, "--k", k, "--format", "json",
        ]);
        json(&o)["analytic"].as_f64().unwrap()
    };
    assert!((analytic("2", "3", "3") - 1.0).abs() < 1e-12);
    assert!(analytic("2", "3", "2").abs() < 1e-15);
    assert!((analytic("4", "2", "4") - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn moments_empirical() {
    let o = unicirc(&[
        "moments", "--beta", "2", "--N", "3", "--k", "3", "--count", "5000", "--format", "json",
    ]);
    let r = json(&o);
    assert!(r["empirical"]["z_score"].as_f64().unwrap().abs() < 4.0);
    assert_eq!(r["config"]["count"], 5000);
}

#[test]
fn output_file() {
    let dir = std::env::temp_dir().join(format!("unicirc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("grid.csv");
    let o = unicirc(&[
        "density",
        "--beta",
        "2",
        "--N",
        "2",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv_rows(&text).len(), 256);
    std::fs::remove_dir_all(&dir).unwrap();
}
