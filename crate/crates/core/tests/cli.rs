use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TWO_GAUSSIAN: &str = "\
target.kind = gauss_mix
target.components = 0.4 -1.5 0.4; 0.6 1.2 0.4
family.dim = 1
family.lower = -3
family.upper = 3
family.sigma_min = 0.4
family.sigma_max = 1
family.mean_stride = 0.0001
lmo.kind = grid
lmo.means_per_dim = 31
lmo.sigmas = 2
solver.T = 5
";

fn boostvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boostvi"))
        .args(args)
        .env_remove("BOOSTVI_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, algorithm: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("{TWO_GAUSSIAN}solver.algorithm = {algorithm}\n{extra}")).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_into(config: &Path, out: &Path) {
    let o = boostvi(&["--out", out.to_str().unwrap(), "run", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn run_writes_one_trace_row_per_iteration_plus_init() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fixed.cfg", "fw_fixed", "");
    let out = dir.path().join("out");
    run_into(&cfg, &out);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert!(lines[0].starts_with("t,objective,objective_stderr"));
    assert_eq!(lines.len(), 1 + 6);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["iterations"], 5);
    assert!(out.join("resolved.cfg").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "nc.cfg", "norm_corrective", "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_into(&cfg, &a);
    run_into(&cfg, &b);
    for f in ["trace.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resolved_snapshot_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ls.cfg", "fw_linesearch", "solver.curvature = 15\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_into(&cfg, &a);
    run_into(&a.join("resolved.cfg"), &b);
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fixed.cfg", "fw_fixed", "");
    let out = dir.path().join("out");
    let o = boostvi(&["--seed", "42", "--out", out.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = fs::read_to_string(out.join("resolved.cfg")).unwrap();
    assert!(resolved.contains("run.seed = 42"));
}

#[test]
fn missing_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lr.cfg");
    fs::write(
        &cfg,
        "target.kind = logreg\ntarget.dataset = does/not/exist.csv\ntarget.n_train = 10\n\
         family.dim = 2\nfamily.lower = -3\nfamily.upper = 3\nfamily.sigma_min = 0.5\n\
         family.sigma_max = 1\nlmo.kind = stochastic\nsolver.algorithm = fw_fixed\nsolver.T = 2\n",
    )
    .unwrap();
    let o = boostvi(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("target.dataset"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "fw_fixed", "solver.tee = 3\n");
    let o = boostvi(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.tee"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fixed.cfg", "fw_fixed", "");
    let o = Command::new(env!("CARGO_BIN_EXE_boostvi"))
        .args(["verify", cfg.to_str().unwrap()])
        .env("BOOSTVI_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_merges_traces() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "fixed.cfg", "fw_fixed", "");
    let b = write_config(dir.path(), "fc.cfg", "fully_corrective", "");
    let out = dir.path().join("cmp");
    let o = boostvi(&["--out", out.to_str().unwrap(), "compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,"));
    assert!(header.contains("fw_fixed") && header.contains("fully_corrective"), "{header}");
    assert!(csv.lines().count() >= 6);
}

#[test]
fn compare_refuses_different_targets() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.cfg", "fw_fixed", "");
    let b = dir.path().join("b.cfg");
    fs::write(
        &b,
        fs::read_to_string(&a).unwrap().replace("0.6 1.2 0.4", "0.6 1.0 0.4"),
    )
    .unwrap();
    let o = boostvi(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("target.components"), "{}", stderr(&o));
}

#[test]
fn verify_json_is_valid_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fixed.cfg", "fw_fixed", "");
    let o = boostvi(&["verify", "--json", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["dim"], 1);
    let checks = v["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["status"] != "fail"), "{checks:?}");
    assert!(v["truncation_loss"].as_f64().unwrap() >= 0.0);
}

#[test]
fn shipped_configs_parse() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        boostvi::cli::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
