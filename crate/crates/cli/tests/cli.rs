use std::path::Path;
use std::process::{Command, Output};

fn qc1d(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qc1d"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn solve_commands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qc1d(&["solve-atomistic", "--n", "65"], dir.path())), 0);
    assert_eq!(code(&qc1d(&["solve-qc", "--n", "65", "--k-atoms", "4", "--seed", "3"], dir.path())), 0);
    assert_eq!(code(&qc1d(&["estimate", "--n", "65", "--k-atoms", "4"], dir.path())), 0);
    for f in ["atomistic.txt", "mesh.txt", "qc.txt", "estimator.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    // a saved mesh can be fed back in
    let mesh = dir.path().join("mesh.txt");
    let o = qc1d(&["estimate", "--n", "65", "--mesh", mesh.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = qc1d(&["sweep", "--n", "65"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.starts_with("scheme,level,dof"));
    for scheme in ["optimal", "gradient", "energy"] {
        assert!(csv.lines().any(|l| l.starts_with(scheme)), "{scheme} missing");
    }
    std::fs::remove_file(dir.path().join("relative_error_energy.svg")).unwrap();
    assert_eq!(code(&qc1d(&["plot"], dir.path())), 0);
    let svg = std::fs::read_to_string(dir.path().join("relative_error_energy.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("polyline"));
}

#[test]
fn refine_dumps_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let o = qc1d(&["refine", "--n", "129", "--scheme", "energy", "--max-dof", "40"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap().lines().count() - 1;
    assert!(rows >= 2);
    for i in 0..rows {
        assert!(dir.path().join(format!("level_{i:03}_mesh.txt")).is_file());
        assert!(dir.path().join(format!("level_{i:03}_estimator.csv")).is_file());
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small run\nn = 65\nk_atoms = 4\nscheme = optimal\n").unwrap();
    let o = qc1d(&["solve-qc", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("qc:"));
    // the flag overrides the file; 40 atoms per side do not fit into N = 65
    assert_eq!(code(&qc1d(&["solve-qc", "--config", cfg.to_str().unwrap(), "--k-atoms", "40"], dir.path())), 2);
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&qc1d(&["solve-qc", "--config", cfg.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // validation
    assert_eq!(code(&qc1d(&["solve-qc", "--n", "64"], dir.path())), 2);
    assert_eq!(code(&qc1d(&["sweep", "--scheme", "fastest"], dir.path())), 2);
    assert_eq!(code(&qc1d(&["solve-qc", "--bogus"], dir.path())), 2);
    // solver: the homogeneous start is already below the stretch floor
    assert_eq!(code(&qc1d(&["solve-qc", "--big-f", "0.05"], dir.path())), 3);
    // stability: the coarse initial adaptive mesh breaks at full scale
    let o = qc1d(&["estimate", "--full-scale", "--scheme", "gradient"], dir.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
