use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_vvbath");

fn small(experiment: &str) -> Vec<&'static str> {
    match experiment {
        "spectrum" => vec!["spectrum.radius_nm=2", "spectrum.points=200", "spectrum.members=3"],
        "coherence" => vec!["crystal.radius_nm=3", "coherence.points=20", "coherence.members=3"],
        "census" => vec!["census.radius_nm=3"],
        "sweep" => vec!["census.radius_nm=3", "sweep.points=4"],
        "register" => vec!["register.shots=2000"],
        "rb" => vec!["rb.lengths=[1,10,50,100]", "rb.per_length=5", "rb.bootstrap=20"],
        _ => unreachable!(),
    }
}

fn vvbath(experiment: &str, out: &Path, extra: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg(experiment).arg("--seed").arg("7").arg("--out").arg(out);
    for s in small(experiment).iter().chain(extra) {
        cmd.arg("--set").arg(s);
    }
    cmd.output().unwrap()
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    for experiment in ["spectrum", "coherence", "census", "sweep", "register", "rb"] {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        let first = vvbath(experiment, &a, &["workers=1"]);
        assert!(
            first.status.success(),
            "{experiment}: {}",
            String::from_utf8_lossy(&first.stderr)
        );
        let second = vvbath(experiment, &b, &["workers=2"]);
        assert!(second.status.success());
        let (fa, fb) = (artifacts(&a), artifacts(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{experiment} artifacts differ between runs");
        assert!(a.join("manifest.json").exists());
    }
}

#[test]
fn manifest_lists_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vvbath("rb", tmp.path(), &[]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "rb");
    assert_eq!(manifest["config"]["seed"], 7);
    let listed: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    let on_disk: Vec<String> = artifacts(tmp.path()).into_iter().map(|f| f.0).collect();
    let mut listed_sorted: Vec<String> = listed.iter().map(|s| s.to_string()).collect();
    listed_sorted.sort();
    assert_eq!(listed_sorted, on_disk);
}

#[test]
fn sweep_writes_one_row_per_concentration() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(vvbath("sweep", tmp.path(), &["sweep.points=5"]).status.success());
    let text = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "concentration,n_mem_all,n_mem_low,median_a_par_khz"
    );
    assert_eq!(lines.count(), 5);
}

#[test]
fn invalid_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vvbath("census", tmp.path(), &["isotopes.c_si29=1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"], "invalid_config");
    assert!(record["diagnostics"].to_string().contains("c_si29"));
    assert!(!tmp.path().join("census.csv").exists());
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vvbath("rb", tmp.path(), &["rb.not_a_key=3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_reports_without_running() {
    let ok = Command::new(BIN).arg("validate").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(BIN)
        .args(["validate", "--set", "census.t_max_s=-1"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("census.t_max_s"));
}

#[test]
fn config_files_are_read() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    std::fs::write(
        &path,
        "seed = 3\n[rb]\nlengths = [1, 5, 20]\nper_length = 2\nbootstrap = 5\n",
    )
    .unwrap();
    let out = Command::new(BIN)
        .arg("rb")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(tmp.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("o/rb.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    let missing = Command::new(BIN)
        .args(["rb", "--config", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
