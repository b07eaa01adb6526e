use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const OU: &str = include_str!("../../core/configs/ou.toml");

fn svie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svie")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn small_ou(dir: &Path) -> PathBuf {
    let text = OU.replace("paths = 10000", "paths = 300").replace("horizon = 5.0", "horizon = 1.0");
    write(dir, "ou.toml", &text)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_is_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_ou(tmp.path());
    let mut csvs = Vec::new();
    for w in ["1", "4", "8"] {
        let out = tmp.path().join(format!("run{w}"));
        let o = svie(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", w]);
        assert!(o.status.success(), "{}", stderr(&o));
        csvs.push(fs::read(out.join("trajectories.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "path,t,x0");
    let manifest = fs::read_to_string(tmp.path().join("run1/manifest.json")).unwrap();
    for key in ["\"config_hash\"", "\"seed\": 20240601", "\"truncation\"", "\"x_max\"", "\"max_tail_gap\""] {
        assert!(manifest.contains(key), "manifest lacks {key}");
    }
}

#[test]
fn overrides_change_seed_and_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_ou(tmp.path());
    let out = tmp.path().join("o");
    let o = svie(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5", "--paths", "120",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 5"));
    assert!(manifest.contains("\"paths\": 120"));
}

#[test]
fn unknown_field_is_a_validation_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &OU.replace("dim = 1", "dim = 1\nbogus_knob = 3"));
    let o = svie(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_knob"), "{}", stderr(&o));
}

#[test]
fn invalid_value_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &OU.replace("dt = 0.00390625", "dt = -0.1"));
    let o = svie(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`dt`"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_a_validation_error() {
    let o = svie(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn certify_prints_the_dissipative_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_ou(tmp.path());
    let out = tmp.path().join("c");
    let o = svie(&["certify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 L_a + L_b^2 = 0 < 2β = 2: PASS"), "{}", stdout(&o));
    assert!(fs::read_to_string(out.join("certify_report.json")).unwrap().contains("config_hash"));
}

#[test]
fn envelope_free_kernels_cannot_be_certified() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "none.toml",
        &OU.replace("sigma = 0.5", "sigma = 0.5\nenvelopes = \"none\""),
    );
    let o = svie(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot certify"), "{}", stderr(&o));
}

#[test]
fn replay_into_foreign_outputs_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_ou(tmp.path());
    let out = tmp.path().join("o");
    let args = |seed: &'static str| {
        vec![
            "simulate".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
            "--seed".into(),
            seed.into(),
        ]
    };
    let run = |a: Vec<String>| Command::new(env!("CARGO_BIN_EXE_svie")).args(a).output().unwrap();
    assert!(run(args("1")).status.success());
    assert!(run(args("1")).status.success());
    let o = run(args("2"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replay mismatch"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
seed = 1
paths = 20
horizon = 2.0
dt = 0.0625
dim = 1
noise_dim = 1

[weight]
family = "exponential"
rho = 1.0

[kernel]
family = "exponential"
c_drift = 40.0
c_diffusion = 0.1
rate = 1.0

[initial]
kind = "constant"
value = [1.0]
"#;
    let cfg = write(tmp.path(), "blowup.toml", text);
    let o = svie(&["simulate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn oracle_compare_reports_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "fading.toml",
        include_str!("../../core/configs/fading.toml"),
    );
    let out = tmp.path().join("o");
    let o = svie(&["oracle-compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("max deviation 0.000e0"), "{text}");
    assert!(text.contains("fitted order"));
}

#[test]
fn estimate_law_writes_a_verdict_report() {
    let tmp = tempfile::tempdir().unwrap();
    let text = OU
        .replace("paths = 10000", "paths = 200")
        .replace("dt = 0.00390625", "dt = 0.0625")
        .replace("t1 = 10.0", "t1 = 5.0")
        .replace("t2 = 20.0", "t2 = 10.0");
    let cfg = write(tmp.path(), "ou.toml", &text);
    let out = tmp.path().join("o");
    let o = svie(&["estimate-law", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("two-horizon test"));
    assert!(stdout(&o).contains("initial-value probe"));
    let report = fs::read_to_string(out.join("law_report.json")).unwrap();
    assert!(report.contains("\"p_value\""));
    assert!(report.contains("\"config_hash\""));
}
