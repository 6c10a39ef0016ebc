use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hpsem_ffi::*;

const CONFIG: &str = "problem = \"poisson-mixed\"\nsweep = \"p\"\nvalues = [2, 3]\n";

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { hpsem_last_error_message(buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn new_solver(text: &str) -> (HpsemStatus, *mut HpsemSolver) {
    let c = CString::new(text).unwrap();
    let mut s = ptr::null_mut();
    let code = unsafe { hpsem_solver_new(c.as_ptr(), &mut s) };
    (code, s)
}

fn empty_report() -> HpsemReport {
    HpsemReport {
        param: 0.0,
        degree: 0,
        layers: 0,
        elements: 0,
        dof: 0,
        iterations: 0,
        status: -1,
        rel_error_percent: 0.0,
        functional_final: 0.0,
        wall_time: 0.0,
    }
}

#[test]
fn solve_matches_the_library() {
    let (code, s) = new_solver(CONFIG);
    assert_eq!(code, HpsemStatus::Ok);
    let mut rep = empty_report();
    assert_eq!(unsafe { hpsem_solver_solve(s, 3, 0, &mut rep) }, HpsemStatus::Ok);

    let p = hpsem::problems::catalog("poisson-mixed").unwrap();
    let d = hpsem::functional::discretize(&p, 1, 3).unwrap();
    let (_, want) = hpsem::solver::pcg_solve(&p, &d, &hpsem::solver::PcgOptions::default()).unwrap();
    assert_eq!(rep.status, 0);
    assert_eq!(rep.degree, 3);
    assert_eq!(rep.dof, want.dof);
    assert_eq!(rep.iterations, want.iterations);
    assert!((rep.rel_error_percent - want.rel_error_h1.unwrap()).abs() < 1e-12);

    let mut len = 0;
    assert_eq!(unsafe { hpsem_solver_history(s, 0, ptr::null_mut(), 0, &mut len) }, HpsemStatus::Ok);
    assert_eq!(len, want.residual_history.len());
    let mut short = vec![0.0; len - 1];
    assert_eq!(
        unsafe { hpsem_solver_history(s, 0, short.as_mut_ptr(), short.len(), &mut len) },
        HpsemStatus::BufferTooSmall
    );
    let mut hist = vec![0.0; len];
    assert_eq!(unsafe { hpsem_solver_history(s, 0, hist.as_mut_ptr(), len, &mut len) }, HpsemStatus::Ok);
    assert_eq!(hist, want.residual_history);
    unsafe { hpsem_solver_free(s) };
}

#[test]
fn study_rows_are_reported_in_order() {
    let (_, s) = new_solver(CONFIG);
    let mut n = 0;
    assert_eq!(unsafe { hpsem_solver_run_study(s, &mut n) }, HpsemStatus::Ok);
    assert_eq!(n, 2);
    let mut errors = Vec::new();
    for i in 0..n {
        let mut rep = empty_report();
        assert_eq!(unsafe { hpsem_solver_row(s, i, &mut rep) }, HpsemStatus::Ok);
        assert_eq!(rep.degree, i + 2);
        errors.push(rep.rel_error_percent);
    }
    assert!(errors[1] < errors[0]);
    let mut rep = empty_report();
    assert_eq!(unsafe { hpsem_solver_row(s, n, &mut rep) }, HpsemStatus::OutOfRange);
    assert!(last_error().contains("row 2"));
    unsafe { hpsem_solver_free(s) };
}

#[test]
fn errors_map_to_codes_and_messages() {
    let (code, s) = new_solver("problem = \"no-such\"\n");
    assert_eq!(code, HpsemStatus::Config);
    assert!(s.is_null());
    assert!(last_error().contains("no-such"));

    assert_eq!(new_solver("problem = \"poisson-mixed\"\ndegre = 2\n").0, HpsemStatus::Config);
    assert_eq!(new_solver("problem = ").0, HpsemStatus::Config);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hpsem_solver_new(ptr::null(), &mut out) }, HpsemStatus::NullPointer);
    let bad = [0xffu8 as std::ffi::c_char, 0];
    assert_eq!(unsafe { hpsem_solver_new(bad.as_ptr(), &mut out) }, HpsemStatus::InvalidUtf8);

    let mut rep = empty_report();
    assert_eq!(unsafe { hpsem_solver_solve(ptr::null_mut(), 2, 1, &mut rep) }, HpsemStatus::NullPointer);
    let (_, s) = new_solver("problem = \"poisson-mixed\"\n");
    let mut n = 0;
    assert_eq!(unsafe { hpsem_solver_run_study(s, &mut n) }, HpsemStatus::Config);
    unsafe { hpsem_solver_free(s) };
    unsafe { hpsem_solver_free(ptr::null_mut()) };

    let mut k = 0.0;
    assert_eq!(unsafe { hpsem_condition_number(0, &mut k) }, HpsemStatus::OutOfRange);
    assert_eq!(unsafe { hpsem_condition_number(2, &mut k) }, HpsemStatus::Ok);
    assert!((k - 3.7).abs() < 1e-6);
    assert_eq!(last_error(), "");
}

#[test]
fn error_message_truncates_and_reports_length() {
    new_solver("problem = \"no-such\"\n");
    let full = last_error();
    let mut needed = 0;
    let mut buf = [1 as std::ffi::c_char; 5];
    let code = unsafe { hpsem_last_error_message(buf.as_mut_ptr(), buf.len(), &mut needed) };
    assert_eq!(code, HpsemStatus::BufferTooSmall);
    assert_eq!(needed, full.len() + 1);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes(), &full.as_bytes()[..4]);
}

#[test]
fn gll_rule_copies_nodes_and_weights() {
    let mut x = [0.0; 4];
    let mut w = [0.0; 4];
    assert_eq!(unsafe { hpsem_gll_rule(2, x.as_mut_ptr(), w.as_mut_ptr(), 4) }, HpsemStatus::Ok);
    assert!((x[0] + 1.0).abs() < 1e-15 && x[1].abs() < 1e-15 && (x[2] - 1.0).abs() < 1e-15);
    assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 4.0 / 3.0).abs() < 1e-15);
    assert_eq!(unsafe { hpsem_gll_rule(4, x.as_mut_ptr(), w.as_mut_ptr(), 4) }, HpsemStatus::BufferTooSmall);
    assert_eq!(unsafe { hpsem_gll_rule(0, x.as_mut_ptr(), w.as_mut_ptr(), 4) }, HpsemStatus::InvalidArgument);
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(hpsem_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn generated_header_declares_every_entry_point() {
    let header = std::fs::read_to_string(manifest().join("include/hpsem.h")).unwrap();
    for f in [
        "hpsem_version",
        "hpsem_last_error_message",
        "hpsem_solver_new",
        "hpsem_solver_free",
        "hpsem_solver_solve",
        "hpsem_solver_run_study",
        "hpsem_solver_row",
        "hpsem_solver_history",
        "hpsem_condition_number",
        "hpsem_gll_rule",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct HpsemSolver HpsemSolver;"));
}

/// Directory holding the static library built alongside this test binary.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_compiles_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let lib = artifact_dir().join("libhpsem_ffi.a");
    if Command::new(&cc).arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(manifest().join("include"))
        .arg(manifest().join("tests/c_smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
