use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rha(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rha")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "rha {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path) {
    fs::write(
        dir.join("jn.json"),
        r#"{"schema_version": 1, "points_per_axis": 64, "instances": 20, "seed": 3}"#,
    )
    .unwrap();
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let d = tempfile::tempdir().unwrap();
    write_config(d.path());
    for tag in ["a", "b"] {
        let out = rha(
            &["run", "john-nirenberg", "--config", "jn.json", "--out", &format!("{tag}.json"), "--csv", &format!("{tag}.csv")],
            d.path(),
        );
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.lines().all(|l| l.starts_with("PASS") || l.starts_with("FAIL")));
        assert!(stdout.contains("rho_at_least_one"));
    }
    let read = |n: &str| fs::read(d.path().join(n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.csv"), read("b.csv"));
    let report: serde_json::Value = serde_json::from_slice(&read("a.json")).unwrap();
    assert_eq!(report["experiment"], "john-nirenberg");
    assert_eq!(report["input_hash"].as_str().unwrap().len(), 64);
    assert!(report["tolerances"]["jn_rho_floor_rel"].is_number());
    assert_eq!(report["rows"].as_array().unwrap().len(), 20);
    assert!(report.get("wall_clock_s").is_none_or(|v| v.is_null()));
}

#[test]
fn config_change_changes_hash() {
    let d = tempfile::tempdir().unwrap();
    write_config(d.path());
    rha(&["run", "john-nirenberg", "--config", "jn.json", "--out", "a.json"], d.path());
    fs::write(d.path().join("jn.json"), r#"{"schema_version": 1, "points_per_axis": 64, "instances": 20, "seed": 4}"#).unwrap();
    rha(&["run", "john-nirenberg", "--config", "jn.json", "--out", "b.json"], d.path());
    let hash = |n: &str| {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join(n)).unwrap()).unwrap();
        v["input_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash("a.json"), hash("b.json"));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bad.json"), r#"{"schema_version": 1, "pointz": 64}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rha"))
        .args(["run", "john-nirenberg", "--config", "bad.json", "--out", "x.json"])
        .current_dir(d.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!d.path().join("x.json").exists());
}

fn write_function(dir: &Path) {
    let n = 64;
    let mut csv = format!("# dim=1 halfwidth=1 points_per_axis={n} domain=full_space\ni0,value\n");
    for k in 0..n {
        let x = -1.0 + (k as f64 + 0.5) * 2.0 / n as f64;
        csv.push_str(&format!("{k},{}\n", (3.0 * x).sin()));
    }
    fs::write(dir.join("f.csv"), csv).unwrap();
}

#[test]
fn apply_and_bmo_subcommands() {
    let d = tempfile::tempdir().unwrap();
    write_function(d.path());
    rha(&["apply", "--op", "heat-free", "--t", "0.05", "--input", "f.csv", "--out", "g.csv"], d.path());
    let g = fs::read_to_string(d.path().join("g.csv")).unwrap();
    assert_eq!(g.lines().count(), fs::read_to_string(d.path().join("f.csv")).unwrap().lines().count());

    let out = rha(&["bmo", "--flavor", "classical-w", "--input", "f.csv"], d.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let norm = v["norm"].as_f64().unwrap();
    assert!(norm > 0.0 && norm.is_finite());

    let out = rha(&["squarefn", "--flavor", "haar", "--input", "f.csv"], d.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["hardy_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn opnorm_reports_certificate() {
    let d = tempfile::tempdir().unwrap();
    let out = rha(
        &["opnorm", "--op", "riesz-neumann-1", "--points", "32", "--domain", "upper", "--mu", r#"{"kind":"power","alpha":0.3}"#],
        d.path(),
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(v["certificate"].is_object());
}
