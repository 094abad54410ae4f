//! End-to-end checks of the command-line interface: exit codes, failure
//! manifests, the verify mutation flag, and the output-directory lock.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = "\
[grid]
dim = 2
nx = 4
ny = 16
lx = 0.5
ly = 1.0
bc_x = periodic
bc_y = wall

[rheology]
viscosity = constant
mu = 1.0
yield = 0.1
epsilon = 1e-6

[forces]
fx = 1.0
";

struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("viscoflow-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        Workspace { dir }
    }

    fn config(&self, text: &str) -> PathBuf {
        let path = self.dir.join("run.ini");
        std::fs::write(&path, text).unwrap();
        path
    }

    fn out(&self) -> PathBuf {
        self.dir.join("out")
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viscoflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_solve(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "solve",
        config.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn solve_valid_config_exits_zero_and_writes_fields() {
    let ws = Workspace::new("solve-ok");
    let cfg = ws.config(BASE);
    let out = run_solve(&cfg, &ws.out(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["velocity.csv", "pressure.csv", "manifest.json", "fields.vtk"] {
        assert!(ws.out().join(name).exists(), "missing {name}");
    }
    let manifest = std::fs::read_to_string(ws.out().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"converged\": true"));
}

#[test]
fn nonpositive_viscosity_exits_one_citing_bounds() {
    let ws = Workspace::new("bad-mu");
    let cfg = ws.config(&BASE.replace("mu = 1.0", "mu = -1.0"));
    let out = run_solve(&cfg, &ws.out(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("viscosity bounds"), "{err}");
}

#[test]
fn solver_failure_exits_two_with_failure_manifest() {
    let ws = Workspace::new("hard");
    let cfg = ws.config(&format!("{BASE}\n[solver]\nmax_picard = 1\n"));
    let out = run_solve(&cfg, &ws.out(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let manifest = std::fs::read_to_string(ws.out().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"converged\": false"));
    assert!(manifest.contains("\"error\""));
}

#[test]
fn optimize_without_control_section_exits_one() {
    let ws = Workspace::new("no-control");
    let cfg = ws.config(BASE);
    let out = run(&[
        "optimize",
        cfg.to_str().unwrap(),
        "--output-dir",
        ws.out().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[control]"), "{err}");
}

#[test]
fn optimize_finite_set_records_candidate_table() {
    let ws = Workspace::new("finite");
    let cfg = ws.config(&format!(
        "{BASE}\n[control]\nbasis_size = 2\nadmissible = finite\n\
         points = 0.0, 0.0 / 0.3, -0.1 / 0.5, 0.2\n\
         lambda1 = 1.0\nlambda2 = 0.1\ntruth = 0.3,-0.1\n"
    ));
    let out = run(&[
        "optimize",
        cfg.to_str().unwrap(),
        "--output-dir",
        ws.out().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(ws.out().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"candidate_costs\""), "{manifest}");
    // the truth is one of the candidates, so it must win with J ~ 0
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let costs = parsed["candidate_costs"].as_array().unwrap();
    assert_eq!(costs.len(), 3);
    assert!(parsed["cost_final"].as_f64().unwrap() < 1e-12);
    assert!(ws.out().join("cost_history.csv").exists());
}

#[test]
fn empty_finite_set_exits_one_citing_nonempty() {
    let ws = Workspace::new("empty-set");
    let cfg = ws.config(&format!(
        "{BASE}\n[control]\nbasis_size = 2\nadmissible = ball\nradius = 0\n\
         lambda1 = 1.0\nlambda2 = 0.1\ntruth = 0.1,0.1\n"
    ));
    let out = run(&[
        "optimize",
        cfg.to_str().unwrap(),
        "--output-dir",
        ws.out().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nonempty"), "{err}");
}

#[test]
fn verify_filter_and_mutation_flag() {
    let ok = run(&["verify", "--filter", "monotonicity", "--quiet"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = run(&["verify", "--filter", "energy", "--flip-yield-sign"]);
    assert_eq!(bad.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&bad.stdout);
    assert!(stdout.contains("FAIL"), "{stdout}");
    let none = run(&["verify", "--filter", "no-such-check"]);
    assert_eq!(none.status.code(), Some(1));
}

#[test]
fn output_directory_lock_blocks_second_run() {
    let ws = Workspace::new("lock");
    let cfg = ws.config(BASE);
    std::fs::create_dir_all(ws.out()).unwrap();
    std::fs::write(ws.out().join(".viscoflow.lock"), "").unwrap();
    let out = run_solve(&cfg, &ws.out(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("locked"), "{err}");
}

#[test]
fn unreadable_config_exits_one() {
    let out = run(&["solve", "/nonexistent/nope.ini", "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
}
