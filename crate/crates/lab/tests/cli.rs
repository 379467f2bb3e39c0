use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "[geometry]\nnr = 9\nna = 8\nnt = 16\n[weights]\ns_grid = [8.0, 16.0]\n[run]\nsamples = 2\n";

fn carlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carlab"))
        .current_dir(dir)
        .env_remove("CARLAB_GEOMETRY_NR")
        .args(args)
        .output()
        .expect("spawn carlab")
}

fn setup() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("small.toml"), SMALL).unwrap();
    d
}

fn run_dir(o: &Output) -> PathBuf {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    PathBuf::from(String::from_utf8(o.stdout.clone()).unwrap().trim())
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn forward_writes_one_row_per_outer_node_and_time() {
    let d = setup();
    let run = d.path().join(run_dir(&carlab(d.path(), &["--config", "small.toml", "--out", "runs", "forward"])));
    let text = fs::read_to_string(run.join("cauchy_data.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: cauchy_data v1"));
    assert_eq!(lines.next(), Some("t,theta_index,re_u,im_u,re_dnu,im_dnu"));
    assert_eq!(lines.count(), 8 * 16);
    assert!(run.join("resolved_config.toml").is_file());
    let m = manifest(&run);
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["cauchy_data.csv", "source.csv"]);
}

#[test]
fn invert_reads_forward_data() {
    let d = setup();
    let fwd = d.path().join(run_dir(&carlab(d.path(), &["--config", "small.toml", "--out", "runs", "forward"])));
    let data = fwd.join("cauchy_data.csv");
    let o = carlab(d.path(), &["--config", "small.toml", "--out", "runs", "invert", "--data", data.to_str().unwrap(), "--max-iter", "20"]);
    let inv = d.path().join(run_dir(&o));
    let trace = fs::read_to_string(inv.join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 3);
    let rec = fs::read_to_string(inv.join("reconstruction.csv")).unwrap();
    assert_eq!(rec.lines().count(), 2 + 8 * 17);
}

#[test]
fn dry_run_lists_the_plan_without_writing() {
    let d = setup();
    let o = carlab(d.path(), &["--config", "small.toml", "--out", "runs", "carleman", "--dry-run"]);
    assert!(o.status.success());
    let plan = String::from_utf8(o.stdout).unwrap();
    assert_eq!(plan.lines().count(), 2 * 2);
    assert!(plan.lines().next().unwrap().starts_with("s=8 gamma=2 sample=sample-00"));
    assert!(!d.path().join("runs").exists());
}

#[test]
fn config_errors_are_reported_together_as_json() {
    let d = setup();
    fs::write(d.path().join("bad.toml"), "[geometry]\nnr = 9\nna = 8\nnt = 16\nr_in = 2.0\nr_out = 1.0\nbogus = 1\n").unwrap();
    let o = carlab(d.path(), &["--config", "bad.toml", "--out", "runs", "forward"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    let keys: Vec<String> = err["issues"].as_array().unwrap().iter().flat_map(|i| i["keys"].as_array().unwrap().clone()).map(|k| k.as_str().unwrap().to_string()).collect();
    assert!(keys.contains(&"geometry.bogus".to_string()));
    assert!(keys.contains(&"geometry.r_in".to_string()) && keys.contains(&"geometry.r_out".to_string()));
    assert!(!d.path().join("runs").exists());
}

#[test]
fn environment_overrides_file_values() {
    let d = setup();
    let o = Command::new(env!("CARGO_BIN_EXE_carlab"))
        .current_dir(d.path())
        .env("CARLAB_GEOMETRY_NA", "12")
        .args(["--config", "small.toml", "--out", "runs", "forward"])
        .output()
        .unwrap();
    let run = d.path().join(run_dir(&o));
    let rows = fs::read_to_string(run.join("cauchy_data.csv")).unwrap().lines().count();
    assert_eq!(rows, 2 + 12 * 16);
    assert!(fs::read_to_string(run.join("resolved_config.toml")).unwrap().contains("na = 12"));
}

#[test]
fn repeated_runs_match_except_timing() {
    let d = setup();
    let strip = |mut m: serde_json::Value| {
        m.as_object_mut().unwrap().remove("wall_seconds");
        for s in m["stages"].as_array_mut().unwrap() {
            s.as_object_mut().unwrap().remove("seconds");
        }
        m
    };
    let args = ["--config", "small.toml", "--out", "runs", "--seed", "5", "stability"];
    let a = d.path().join(run_dir(&carlab(d.path(), &args)));
    let b = d.path().join(run_dir(&carlab(d.path(), &args)));
    assert_ne!(a, b);
    assert_eq!(strip(manifest(&a)), strip(manifest(&b)));
}

#[test]
fn invalid_identity_levels_leave_no_directory() {
    let d = setup();
    let o = carlab(d.path(), &["--config", "small.toml", "--out", "runs", "identities"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("runs").exists());
}
