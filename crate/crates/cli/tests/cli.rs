use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn wavekin(args: &[&str], root: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wavekin")).args(args).env("WAVEKIN_OUT", root).output().expect("spawn wavekin")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn run_ok(args: &[&str], root: &Path) -> PathBuf {
    let out = wavekin(args, root);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

const TOY_CENSUS: &str = r#"
[box]
d = 1
L = 1
beta = [1.0]
cutoff = 1.0
gamma = 0.5

[census]
times = [0.5, 2.0]
"#;

#[test]
fn census_toy_instance() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "toy.toml", TOY_CENSUS);
    let dir = run_ok(&["census", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(dir, tmp.path().join("toy-census"));
    let mut rdr = csv::Reader::from_path(dir.join("census.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["beta_label", "d", "L", "t", "delta", "quasi_count", "exact_count", "volume_prediction"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| &r[6] == "5"));
}

#[test]
fn manifest_lists_every_file_with_checksum() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "diag.toml",
        r#"
[box]
d = 1
L = 2
beta = [1.0]
cutoff = 1.0
gamma = 0.5

[spectrum]
family = "gaussian_bump"
amplitude = 1.0
width = 0.7

[diagrams]
max_order = 2
tau = 0.3
"#,
    );
    let dir = run_ok(&["diagrams", "--config", cfg.to_str().unwrap()], tmp.path());
    let m = manifest(&dir);
    let listed: Vec<String> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap().to_string()).collect();
    let mut on_disk: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(dir.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    assert_eq!(m["experiment"], "diagrams");
    assert_eq!(m["config"]["box"]["L"].as_f64(), Some(2.0));
    let census = std::fs::read_to_string(dir.join("couple_census.csv")).unwrap();
    let order2: Vec<&str> = census.lines().nth(3).unwrap().split(',').collect();
    assert_eq!((order2[0], order2[2]), ("2", "14"));
}

const ENSEMBLE: &str = r#"
[box]
d = 1
L = 4
beta = [1.0]
cutoff = 1.0
gamma = 0.0

[spectrum]
family = "gaussian_bump"
amplitude = 1.0
width = 0.5

[evolve]
dt = 0.01
t_end = 0.1
snapshot_times = [0.0, 0.1]

[ensemble]
members = 64
seed = 9
dump_initial_field = true
"#;

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "ens.toml", ENSEMBLE);
    let c = cfg.to_str().unwrap();
    let a = run_ok(&["ensemble", "--config", c, "--out", tmp.path().join("a").to_str().unwrap()], tmp.path());
    let b = run_ok(&["ensemble", "--config", c, "--out", tmp.path().join("b").to_str().unwrap(), "--threads", "1"], tmp.path());
    for f in ["moments.csv", "member0_initial.bin"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let s = run_ok(&["ensemble", "--config", c, "--out", tmp.path().join("s").to_str().unwrap(), "--seed", "10"], tmp.path());
    assert_ne!(std::fs::read(a.join("moments.csv")).unwrap(), std::fs::read(s.join("moments.csv")).unwrap());
    assert_eq!(manifest(&s)["summary"]["seed"], 10);
}

#[test]
fn missing_field_fails_without_output() {
    let tmp = TempDir::new().unwrap();
    let text = ENSEMBLE.replace("members = 64\n", "");
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    let out = wavekin(&["ensemble", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("members"), "{err}");
    assert!(err.contains("line"), "{err}");
    let entries: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("bad.toml")]);

    let cfg = write_config(tmp.path(), "nosec.toml", TOY_CENSUS);
    let out = wavekin(&["wke", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[kinetic]"));
    assert!(!tmp.path().join("nosec-wke").exists());
}

#[test]
fn existing_output_directory_is_refused() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "toy.toml", TOY_CENSUS);
    run_ok(&["census", "--config", cfg.to_str().unwrap()], tmp.path());
    let out = wavekin(&["census", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn linear_compare_control() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ctl.toml",
        r#"
[box]
d = 2
L = 4
beta = [1.0, 1.0]
cutoff = 1.0
gamma = 0.5
linear = true

[spectrum]
family = "gaussian_bump"
amplitude = 1.0
width = 0.5

[ensemble]
members = 200
seed = 3

[kinetic]
h = 0.25

[compare]
l_values = [4.0]
tau = 0.1
dt = 0.05
"#,
    );
    let dir = run_ok(&["compare", "--config", cfg.to_str().unwrap()], tmp.path());
    let m = manifest(&dir);
    assert_eq!(m["summary"]["within_4_sigma"], "PASS");
    let rows: Vec<csv::StringRecord> = csv::Reader::from_path(dir.join("compare.csv")).unwrap().records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
}

#[test]
fn wke_and_first_iterate_outputs() {
    let tmp = TempDir::new().unwrap();
    let base = r#"
[box]
d = 2
L = 4
beta = [1.0, 1.0]
cutoff = 1.0
gamma = 0.5

[spectrum]
family = "gaussian_bump"
amplitude = 1.0
width = 0.5

[kinetic]
h = 0.25
tau_end = 0.1
dtau = 0.05

[first_iterate]
times = [1.0, 2.0]
modes = [[0, 0], [1, 0]]
"#;
    let cfg = write_config(tmp.path(), "k.toml", base);
    let dir = run_ok(&["wke", "--config", cfg.to_str().unwrap()], tmp.path());
    let traj = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("tau,k_x,k_y,n\n"));
    assert_eq!(traj.lines().count(), 1 + 3 * 49);
    let dir = run_ok(&["first-iterate", "--config", cfg.to_str().unwrap()], tmp.path());
    let mut rdr = csv::Reader::from_path(dir.join("first_iterate.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "m_x", "m_y", "lattice_sum", "integral"]);
    assert_eq!(rdr.records().count(), 4);
}
