use std::path::Path;
use std::process::{Command, Output};

const FAST: [&str; 10] = [
    "--set",
    "planner.policies=20",
    "--set",
    "planner.iterations=2",
    "--set",
    "planner.planning_particles=10",
    "--set",
    "particles=50",
    "--set",
    "occlusion.duration=1.0",
];

fn aidrive(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aidrive")).args(args).output().expect("spawn aidrive")
}

fn run_into(dir: &Path) -> Output {
    let mut args = vec!["run", "1a", "--runs", "2", "--seed", "11", "--out", dir.to_str().unwrap()];
    args.extend(FAST);
    aidrive(&args)
}

#[test]
fn lists_presets() {
    let out = aidrive(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["1a", "1d", "2a-vts", "2b-sweep"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn run_writes_traces_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = run_into(a.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run_into(b.path()).status.success());
    for file in ["run_000.csv", "run_001.csv", "run_000.meta.toml", "stats.csv", "aggregate.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty(), "{file} is empty");
        assert_eq!(x, y, "{file} differs between identical invocations");
    }
    let trace = std::fs::read_to_string(a.path().join("run_000.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 6);
    assert_ne!(
        std::fs::read(a.path().join("run_000.csv")).unwrap(),
        std::fs::read(a.path().join("run_001.csv")).unwrap()
    );
}

#[test]
fn config_file_and_map() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scene.toml");
    std::fs::write(
        &cfg,
        "scenario = \"occlusion\"\nseed = 3\nparticles = 100\n\n[map]\nx_min = 0.0\nx_max = 30.0\nx_step = 10.0\n\
         y_min = -1.0\ny_max = 1.0\ny_step = 1.0\nrows = 40\n",
    )
    .unwrap();
    let out = aidrive(&["map", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map = std::fs::read_to_string(dir.path().join("map.csv")).unwrap();
    assert_eq!(map.lines().count(), 1 + 4 * 3);
}

#[test]
fn rejects_bad_input() {
    let out = aidrive(&["run", "no-such-preset"]);
    assert!(!out.status.success());
    let out = aidrive(&["run", "1a", "--set", "planner.nonsense=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
}
