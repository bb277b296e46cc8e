use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SLOW: &str = r#"{"schema_version": 1, "name": "slow", "model": "schwinger", "omega0": 1, "omega": 0.1,
    "theta": 1.5707963267948966, "t_end": 4, "steps": 400, "n": 1}"#;

fn adiabat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiabat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_series_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "slow.json", SLOW);
    let out = dir.path().join("out");
    let o = adiabat(&["run", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(out.join("slow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 402);
    assert!(csv.starts_with("t,re_c_1,im_c_1,abs_c_1,re_c_2,"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("slow.report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["name"], "slow");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "slow.json", SLOW);
    let mut files = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        assert_eq!(
            adiabat(&["run", &scenario, "--out", out.to_str().unwrap()])
                .status
                .code(),
            Some(0)
        );
        files.push((
            fs::read(out.join("slow.csv")).unwrap(),
            fs::read(out.join("slow.report.json")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn verify_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "slow.json", SLOW);
    let o = Command::new(env!("CARGO_BIN_EXE_adiabat"))
        .args(["verify", &scenario])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("pass decomposition"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        &SLOW.replace("\"steps\": 400", "\"steps\": 5"),
    );
    let o = adiabat(&["verify", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`steps`"));

    let unknown = write(
        dir.path(),
        "unknown.json",
        &SLOW.replace("\"n\": 1", "\"n\": 1, \"colour\": 1"),
    );
    let o = adiabat(&["verify", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`colour`"));

    assert_eq!(
        adiabat(&["verify", "/nonexistent/scenario.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn failed_identity_exits_with_one_and_names_the_check() {
    // too coarse for the finite-difference eigenvector derivative
    let dir = tempfile::tempdir().unwrap();
    let coarse = write(
        dir.path(),
        "coarse.json",
        r#"{"model": "random-smooth", "dim": 3, "seed": 7, "t_end": 1, "steps": 100, "n": 2}"#,
    );
    let o = adiabat(&["verify", &coarse]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("perturbative_identity"));
}

#[test]
fn degenerate_spectrum_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write(
        dir.path(),
        "flat.json",
        r#"{"model": "static", "energies": [0.5, 0.5], "t_end": 1, "steps": 10, "n": 1}"#,
    );
    let o = adiabat(&["verify", &flat]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("degenerate"));
}

#[test]
fn batch_runs_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = dir.path().join("scenarios");
    fs::create_dir(&scenarios).unwrap();
    write(&scenarios, "slow.json", SLOW);
    write(
        &scenarios,
        "static.json",
        r#"{"name": "flat", "model": "static", "energies": [-1, 1], "t_end": 2, "steps": 20, "n": 2}"#,
    );
    write(&scenarios, "notes.txt", "ignored");
    let out = dir.path().join("out");
    let o = adiabat(&[
        "batch",
        scenarios.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "flat.csv",
            "flat.report.json",
            "slow.csv",
            "slow.report.json"
        ]
    );
}
