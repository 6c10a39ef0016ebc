use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hpsem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpsem")).args(args).output().expect("binary runs")
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

#[test]
fn list_prints_the_catalog() {
    let out = hpsem(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names, hpsem::problems::CATALOG.to_vec());
}

#[test]
fn condition_study_writes_kappa_table() {
    let out = hpsem(&["condition-study", "--degrees", "2,4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("W,kappa,kappa_display"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "2");
    let k4: f64 = rows[1][1].parse().unwrap();
    assert!((k4 - 4.904066).abs() < 1e-5, "{k4}");
}

#[test]
fn study_output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config_path("vertexedge-hp.toml");
    for dir in [&a, &b] {
        let out = hpsem(&["study", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["study.csv", "error_vs_degree.dat", "error_vs_dof.dat"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs between runs");
    }
    assert!(a.path().join("timing.csv").exists());
}

#[test]
fn unconverged_solve_exits_with_two() {
    let out = hpsem(&["solve", "--problem", "poisson-mixed", "--degree", "6", "--max-iter", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpsem(&[
        "solve",
        "--problem",
        "vertex-dirichlet",
        "--degree",
        "3",
        "--layers",
        "2",
        "--history",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let history = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.lines().count() > 2);
    assert!(dir.path().join("solve.csv").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "problem = \"\"\nsweep = \"p\"\nvalues = [2]\n").unwrap();
    assert_eq!(hpsem(&["study", "--config", empty.to_str().unwrap()]).status.code(), Some(1));

    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "problem = \"poisson-mixed\"\nsweep = \"p\"\nvalues = [2]\ndegre = 3\n").unwrap();
    assert_eq!(hpsem(&["study", "--config", typo.to_str().unwrap()]).status.code(), Some(1));

    assert_eq!(hpsem(&["solve", "--problem", "no-such-problem"]).status.code(), Some(1));
    assert_eq!(hpsem(&["study"]).status.code(), Some(1));
}

#[test]
fn mesh_dump_lists_every_element() {
    let out = hpsem(&["mesh-dump", "--problem", "vertex-dirichlet", "--layers", "2", "--degree", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let p = hpsem::problems::catalog("vertex-dirichlet").unwrap();
    let mesh = hpsem::mesh::build_mesh(&hpsem::mesh::MeshSpec::new(p.geometry.domain(None).unwrap(), 2, 2)).unwrap();
    assert_eq!(text.lines().count(), mesh.elements.len() + 1);
}
