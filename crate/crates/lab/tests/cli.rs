use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 99
[chain]
N = [16]
gamma = 1.0
[plan]
times = [0.01, 0.05]
ensemble = 40
"#;

fn vflip(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vflip"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("vflip runs")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for cmd in ["simulate", "converge"] {
        let a = dir.path().join(format!("{cmd}_a"));
        let b = dir.path().join(format!("{cmd}_b"));
        // A small ensemble may fail its checks (exit 4); the files are still written.
        let (ra, rb) = (vflip(&[cmd], Some(&cfg), &a), vflip(&[cmd, "--threads", "2"], Some(&cfg), &b));
        assert!(matches!(ra.status.code(), Some(0 | 4)), "{}", String::from_utf8_lossy(&ra.stderr));
        assert_eq!(ra.status.code(), rb.status.code());
        assert_eq!(ra.stdout, rb.stdout);
        let mut csvs = 0;
        for e in std::fs::read_dir(&a).unwrap() {
            let name = e.unwrap().file_name();
            if Path::new(&name).extension().is_some_and(|x| x == "csv") {
                csvs += 1;
                assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
            }
        }
        assert!(csvs > 0);
    }
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(vflip(&["simulate"], Some(&cfg), &a).status.success());
    assert!(vflip(&["simulate", "--seed", "100"], Some(&cfg), &b).status.success());
    let f = "trajectory_N16.csv";
    assert_ne!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
}

#[test]
fn missing_gamma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[chain]\nN = 16\n");
    let out = vflip(&["simulate"], Some(&cfg), &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("chain.gamma: required"));
}

#[test]
fn physical_violations_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[chain]\ngamma = 1.0\n[profile]\nbeta = { table = [1.0, -0.5, 1.0, 1.0] }\n");
    let out = vflip(&["simulate"], Some(&cfg), &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("profile.beta"));
}

#[test]
fn verify_identities_passes_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = vflip(&["verify-identities"], None, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8_lossy(&out.stdout);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(v["passed"], true);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    let fd = summary["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "fd_residual_max")
        .unwrap();
    assert!(fd["value"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn quiet_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = vflip(&["pde", "--quiet"], Some(&cfg), &dir.path().join("o"));
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(dir.path().join("o/pde.csv").exists());
}
