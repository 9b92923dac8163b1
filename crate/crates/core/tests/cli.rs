use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn run(config: &str, out: &Path, extra: &[&str]) -> (i32, String) {
    let cfg_path = out.join("config.toml");
    fs::create_dir_all(out).unwrap();
    fs::write(&cfg_path, config).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_divfree"))
        .arg("run")
        .arg(&cfg_path)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    (output.status.code().unwrap(), String::from_utf8_lossy(&output.stderr).into_owned())
}

fn rows(path: PathBuf) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(Result::unwrap).collect()
}

const SHEAR_AUDIT: &str = "\
[run]
kind = \"poincare_audit\"
seed = 7
threshold = 1e-9

[field]
name = \"shear_torus\"

[section]
axis = 0
offset = 0.0

[sampling]
count = 200
";

#[test]
fn shear_audit_passes_with_two_hundred_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(SHEAR_AUDIT, dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    let rows = rows(dir.path().join("poincare_audit.csv"));
    assert_eq!(rows.len(), 200);
    for r in &rows {
        let residual: f64 = r[4].parse().unwrap();
        assert!(residual < 1e-9);
    }
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("poincare_audit.csv.config.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 7);
    assert_eq!(side["config"]["field"]["name"], "shear_torus");
}

#[test]
fn rotation_profile_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[run]\nkind = \"rotation_profile\"\n[field]\nname = \"shear_torus\"\n[profile]\nlevels = 33\n";
    let (code, err) = run(cfg, dir.path(), &[]);
    assert_eq!(code, 0, "{err}");
    let rows = rows(dir.path().join("rotation_profile.csv"));
    assert_eq!(rows.len(), 33);
    for r in &rows {
        let c: f64 = r[0].parse().unwrap();
        let lambda: f64 = r[3].parse().unwrap();
        let z = c.asin();
        let expect = (2.0 + z.cos()) / 1.0;
        assert!((lambda - expect).abs() < 1e-9, "c = {c}: {lambda} vs {expect}");
    }
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "[run]\nkind = \"poincare_audit\"\n",
        "[run]\nkind = \"nonsense\"\n",
        "[run]\nkind = \"rotation_profile\"\n[field]\nname = \"no_such_field\"\n",
        "[run]\nkind = \"rotation_profile\"\nbogus = 1\n[field]\nname = \"shear_torus\"\n",
        "[run]\nkind = \"rotation_profile\"\n[field]\nname = \"abc\"\n",
        "not toml at all [",
    ];
    for (i, cfg) in cases.iter().enumerate() {
        let (code, _) = run(cfg, &dir.path().join(i.to_string()), &[]);
        assert_eq!(code, 2, "case {i}");
    }
    let (code, _) = run(SHEAR_AUDIT, &dir.path().join("jobs"), &["--jobs", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn residual_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // a loose tolerance cannot meet a tight threshold
    let cfg = "[run]\nkind = \"poincare_audit\"\nseed = 1\nthreshold = 1e-15\n\
               [field]\nname = \"abc\"\n[section]\naxis = 2\noffset = 1.5707963267948966\nmin_cosine = 0.1\n\
               max_return_time = 30.0\n[sampling]\ncount = 10\n";
    let (code, err) = run(cfg, dir.path(), &["--tol-override", "1e-6"]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("FAIL"));
}

#[test]
fn repeated_runs_give_identical_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(SHEAR_AUDIT, &a, &["--jobs", "1"]).0, 0);
    assert_eq!(run(SHEAR_AUDIT, &b, &["--jobs", "3", "--stamp"]).0, 0);
    let body_a = fs::read_to_string(a.join("poincare_audit.csv")).unwrap();
    let body_b = fs::read_to_string(b.join("poincare_audit.csv")).unwrap();
    let (stamp, rest) = body_b.split_once('\n').unwrap();
    assert!(stamp.starts_with("# stamp: "));
    assert_eq!(body_a, rest);
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // every point is fixed under the identity map, so Newton has no isolated root
    let cfg = "[run]\nkind = \"orbit_classify\"\n[map]\nname = \"identity\"\n[orbits]\nguesses = [[0.5, 0.5]]\n";
    let (code, err) = run(cfg, dir.path(), &[]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("ERROR"));
}
