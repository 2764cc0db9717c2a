use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn qrat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = qrat(args);
    (
        out.status.code().expect("exited normally"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

fn value(stdout: &str, player: &str, action: &str) -> f64 {
    let prefix = format!("{player}\t{action}\t");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .and_then(|rest| rest.split('\t').next())
        .expect("row present")
        .parse()
        .unwrap()
}

#[test]
fn qre_on_bundled_games() {
    let (code, out, _) = run(&["qre", path(&fixture("vaccination.json")), "--all"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("1 equilibria (complete)"));
    assert!((value(&out, "1", "NV") - 0.396242033074).abs() < 1e-11);

    let (code, out, _) = run(&["qre", path(&fixture("matching_pennies_uniform.json"))]);
    assert_eq!(code, 0);
    for p in ["1", "2"] {
        for a in ["H", "T"] {
            assert_eq!(value(&out, p, a), 0.5);
        }
    }

    let (code, out, _) = run(&["qre", path(&fixture("coordination_2x2.json")), "--all"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("3 equilibria (complete)"));
}

#[test]
fn qre_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"players\": [,]\n}\n").unwrap();
    let (code, _, err) = run(&["qre", path(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2, column 15"), "{err}");

    let (code, _, err) = run(&["qre", path(&fixture("vaccination.json")), "--max-iter", "3"]);
    assert_eq!(code, 3, "{err}");
    let (code, _, _) = run(&["qre", path(&fixture("vaccination.json")), "--damping", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn rationalize_reports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("mp.csv");
    let (code, out, _) = run(&[
        "rationalize",
        path(&fixture("matching_pennies_uniform.json")),
        "--csv",
        path(&csv),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("limit is a QRE\n"));
    assert!((value(&out, "2", "T") - 0.5).abs() <= 1e-9);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("step,player,action,bound\n0,1,H,0\n"));
    assert!(text.contains("\n1,1,H,0.28125\n"));
    assert!(!text.contains('\r'));

    let (code, out, _) = run(&["rationalize", path(&fixture("asym_mp_gumbel5.json"))]);
    assert_eq!(code, 0);
    assert!(out.contains("limit is NOT a QRE (per-player bound sums < 1)"));

    let (code, _, err) = run(&[
        "rationalize",
        path(&fixture("vaccination.json")),
        "--max-iter",
        "2",
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("after 2 steps"));
}

#[test]
fn vaccination_bound_series_rise() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("vac.csv");
    let (code, _, _) = run(&[
        "rationalize",
        path(&fixture("vaccination.json")),
        "--csv",
        path(&csv),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut series: std::collections::BTreeMap<(String, String), Vec<f64>> = Default::default();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        series
            .entry((f[1].into(), f[2].into()))
            .or_default()
            .push(f[3].parse().unwrap());
    }
    assert_eq!(series.len(), 4);
    for s in series.values() {
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn graph_output() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("vac.dot");
    let (code, out, _) = run(&[
        "graph",
        path(&fixture("vaccination.json")),
        "--dot",
        path(&dot),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.matches("GUARANTEED_TIGHT (C2)").count(), 4);
    assert!(std::fs::read_to_string(&dot)
        .unwrap()
        .contains("  NV1 -> V2;\n"));

    let (code, out, _) = run(&["graph", path(&fixture("asym_mp_gumbel5.json"))]);
    assert_eq!(code, 0);
    assert_eq!(out.matches("UNDETERMINED").count(), 4);
    for e in ["H1 -> H2", "H2 -> T1", "T1 -> T2", "T2 -> H1"] {
        assert!(out.contains(e), "{e}");
    }

    let (code, out, _) = run(&["graph", path(&fixture("serial_3x2.json"))]);
    assert_eq!(code, 0);
    assert!(out.contains("no action satisfies C2"));
    assert!(out.contains("relaxed criteria"));

    let three = dir.path().join("three.json");
    let d = r#"{"kind": "extreme_value", "lambda": 1}"#;
    std::fs::write(
        &three,
        format!(
            r#"{{"players": [
  {{"name": "a", "actions": ["x", "y"], "distribution": {d}}},
  {{"name": "b", "actions": ["x", "y"], "distribution": {d}}},
  {{"name": "c", "actions": ["x", "y"], "distribution": {d}}}],
 "payoffs": [[[[0,1],[2,3]],[[4,5],[6,7]]], [[[0,1],[2,3]],[[4,5],[6,7]]], [[[0,1],[2,3]],[[4,5],[6,7]]]]}}"#
        ),
    )
    .unwrap();
    let (code, _, err) = run(&["graph", path(&three)]);
    assert_eq!(code, 4);
    assert!(err.contains("relaxed criteria"));
}

#[test]
fn simulate_checks_and_determinism() {
    let (code, out, _) = run(&[
        "simulate",
        path(&fixture("vaccination.json")),
        "--belief",
        "qre",
        "--agents",
        "100000",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("bounds check: PASS"));

    let dir = tempfile::tempdir().unwrap();
    let mp = fixture("matching_pennies_uniform.json");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &PathBuf| {
        vec![
            "simulate".to_string(),
            path(&mp).to_string(),
            "--belief".into(),
            "lag".into(),
            "--rounds".into(),
            "200".into(),
            "--agents".into(),
            "10000".into(),
            "--seed".into(),
            "7".into(),
            "--csv".into(),
            path(p).to_string(),
        ]
    };
    let out = qrat(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for p in ["1", "2"] {
        assert!((value(&stdout, p, "H") - 0.5).abs() < 0.02);
    }
    let out = Command::new(env!("CARGO_BIN_EXE_qrat"))
        .args(args(&b))
        .env("QRE_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("round,player,action,frequency,analytic_frequency,deviation\n"));
    assert_eq!(text.lines().count(), 1 + 200 * 4);
}
