use std::process::{Command, Output};

fn qdarwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdarwin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn pip_ghz_layout() {
    let o = qdarwin(&["pip", "--state", "ghz", "--n-env", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("# H_S=1.000000000000 seed=1 state=ghz(N=6)")
    );
    assert!(lines.next().unwrap().starts_with("# config command=pip"));
    assert_eq!(lines.next(), Some("m,f,samples,I_mean,I_std,I_min,I_max"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[6][3], "2.000000000000");
    assert!(!text.contains('\r'));
}

#[test]
fn pip_without_records_is_flat_zero() {
    let o = qdarwin(&["pip", "--n-env", "6", "--overlap", "1"]);
    assert_eq!(o.status.code(), Some(0));
    for row in data_rows(&stdout(&o)) {
        assert_eq!(row[3], "0.000000000000");
    }
}

#[test]
fn redundancy_documents() {
    let ghz: serde_json::Value = serde_json::from_slice(&qdarwin(&["redundancy"]).stdout).unwrap();
    assert_eq!(ghz["m_delta"], 1);
    assert_eq!(ghz["redundancy"].as_f64(), Some(10.0));

    let o = qdarwin(&["redundancy", "--overlap", "0.5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "{\n  \"n_env\": 10,\n  \"delta\": 0.1,\n  \"entropy_system_bits\": 0.9999993120692872,\n  \"m_delta\": 2,\n  \"f_delta\": 0.2,\n  \"redundancy\": 5.0,\n  \"seed\": 1\n}\n"
    );
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 7);
}

#[test]
fn degenerate_system_exits_4() {
    let o = qdarwin(&["redundancy", "--overlap", "1"]);
    assert_eq!(o.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["error"], "degenerate_system");
}

#[test]
fn bad_config_and_capacity_codes() {
    assert_eq!(qdarwin(&["pip", "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(qdarwin(&["pip", "--delta", "1"]).status.code(), Some(2));
    assert_eq!(qdarwin(&["pip", "--state", "nope"]).status.code(), Some(2));
    assert_eq!(qdarwin(&["pip", "--n-env", "ten"]).status.code(), Some(2));
    assert_eq!(
        qdarwin(&["collide", "--collision-angle", "0"])
            .status
            .code(),
        Some(2)
    );
    let o = qdarwin(&["pip", "--n-env", "30"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("capacity"));
    assert_eq!(
        qdarwin(&["pip", "--state", "hazy", "--n-env", "12"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn foundations_pass_and_injected_fault() {
    let o = qdarwin(&["foundations"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["born"].as_array().unwrap().len(), 400);
    for check in v["checks"].as_array().unwrap() {
        if check["name"] != "copier_floor" {
            assert!(check["residual"].as_f64().unwrap() < 1e-10, "{check}");
        }
    }

    let o = qdarwin(&["foundations", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(5));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["checks"][0]["name"], "envariance_swap");
    assert_eq!(v["checks"][0]["pass"], false);
}

#[test]
fn collide_rows() {
    let o = qdarwin(&[
        "collide",
        "--n-env",
        "6",
        "--collision-angle",
        &std::f64::consts::FRAC_PI_2.to_string(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 6);
    for (t, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (t + 1).to_string());
        assert_eq!(row[1].parse::<f64>().unwrap(), (t + 1) as f64);
    }
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("# fit slope=1.000000000000"));

    let o = qdarwin(&["collide", "--n-env", "1"]);
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert!(rows[0][1].parse::<f64>().unwrap() >= 1.0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# experiment\nn-env = 4\noverlap = 0.2\nseed = 5\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = qdarwin(&["pip", "--config", cfg, "--seed", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# H_S="));
    assert!(text.lines().next().unwrap().contains("seed=8"));
    assert!(text.contains("n_env=4 alpha=0.7071067811865476 overlap=0.2"));
    assert_eq!(data_rows(&text).len(), 5);

    std::fs::write(dir.path().join("bad.cfg"), "colour = blue\n").unwrap();
    let bad = dir.path().join("bad.cfg");
    assert_eq!(
        qdarwin(&["pip", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let args = ["random", "--n-env", "6", "--seed", "11"];
    let o = qdarwin(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let quiet = qdarwin(&with_out);
    assert_eq!(quiet.status.code(), Some(0));
    assert!(quiet.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), o.stdout);
}

#[test]
fn monte_carlo_output_is_reproducible() {
    let args = [
        "pip",
        "--n-env",
        "12",
        "--max-exhaustive",
        "50",
        "--samples-per-size",
        "30",
        "--overlap",
        "0.4",
        "--seed",
        "9",
    ];
    let a = qdarwin(&args);
    let b = qdarwin(&args);
    assert_eq!(a.stdout, b.stdout);
    let rows = data_rows(&stdout(&a));
    assert_eq!(rows[6][2], "30");
    assert_eq!(rows[1][2], "12");
    let other = qdarwin(&[
        "pip",
        "--n-env",
        "12",
        "--max-exhaustive",
        "50",
        "--samples-per-size",
        "30",
        "--overlap",
        "0.4",
        "--seed",
        "10",
    ]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn scramble_reports_metrics() {
    let o = qdarwin(&["scramble", "--state", "ghz", "--n-env", "8", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("state=scrambled(ghz(N=8),rounds=200,seed=42)"));
    let line = text
        .lines()
        .find(|l| l.starts_with("# plateau_deviation"))
        .unwrap();
    let after: f64 = line.rsplit("after=").next().unwrap().parse().unwrap();
    assert!(after > 0.1);
}
