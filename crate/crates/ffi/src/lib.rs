//! C interface to the `hpsem` solver.
//!
//! Every function returns an [`HpsemStatus`] code; zero means success. On
//! failure a message is stored per thread and can be copied out with
//! [`hpsem_last_error_message`]. Solvers are opaque handles created by
//! [`hpsem_solver_new`] and released with [`hpsem_solver_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hpsem::problems::catalog;
use hpsem::study::{self, RowStatus, StudyConfig, StudyRow};
use hpsem::Error;

/// Result codes.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpsemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    UnknownProblem = 4,
    InvalidArgument = 5,
    Mesh = 6,
    Breakdown = 7,
    BufferTooSmall = 8,
    OutOfRange = 9,
    Panic = 10,
    Internal = 11,
}

/// Outcome of one solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpsemReport {
    /// Sweep parameter of the row (degree, mesh size or hp degree).
    pub param: f64,
    pub degree: usize,
    pub layers: usize,
    pub elements: usize,
    pub dof: usize,
    pub iterations: usize,
    /// 0 converged, 1 iteration limit reached, 2 breakdown.
    pub status: i32,
    /// Relative H¹ error in percent; NaN when unavailable.
    pub rel_error_percent: f64,
    pub functional_final: f64,
    pub wall_time: f64,
}

/// Opaque solver handle.
pub struct HpsemSolver {
    config: StudyConfig,
    rows: Vec<StudyRow>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn code_of(e: &Error) -> HpsemStatus {
    match e {
        Error::Config(_) => HpsemStatus::Config,
        Error::UnknownProblem(_) => HpsemStatus::UnknownProblem,
        Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::TooLarge { .. }
        | Error::MissingData(_) => HpsemStatus::InvalidArgument,
        Error::InvalidMesh(_) | Error::SemiInfinite(_) => HpsemStatus::Mesh,
        Error::OutOfRange(_) => HpsemStatus::OutOfRange,
        Error::Breakdown { .. } => HpsemStatus::Breakdown,
        Error::Io(_) => HpsemStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (HpsemStatus, String)>) -> HpsemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HpsemStatus::Ok
        }
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            HpsemStatus::Panic
        }
    }
}

fn lib<T>(r: hpsem::Result<T>) -> Result<T, (HpsemStatus, String)> {
    r.map_err(|e| (code_of(&e), e.to_string()))
}

fn null(what: &str) -> (HpsemStatus, String) {
    (HpsemStatus::NullPointer, format!("{what} is null"))
}

fn report_of(row: &StudyRow) -> HpsemReport {
    HpsemReport {
        param: row.point.param,
        degree: row.point.degree,
        layers: row.point.layers,
        elements: row.elements,
        dof: row.dof,
        iterations: row.iterations,
        status: match row.status {
            RowStatus::Converged => 0,
            RowStatus::MaxIter => 1,
            RowStatus::Breakdown => 2,
        },
        rel_error_percent: row.rel_error_percent,
        functional_final: row.functional_final,
        wall_time: row.wall_time,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hpsem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). `needed`, when non-null, receives the full
/// length including the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn hpsem_last_error_message(buf: *mut c_char, len: usize, needed: *mut usize) -> HpsemStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let bytes = msg.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if len == 0 {
        return if bytes.is_empty() { HpsemStatus::Ok } else { HpsemStatus::BufferTooSmall };
    }
    if buf.is_null() {
        return HpsemStatus::NullPointer;
    }
    let n = bytes.len().min(len - 1);
    std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
    *buf.add(n) = 0;
    if n < bytes.len() {
        HpsemStatus::BufferTooSmall
    } else {
        HpsemStatus::Ok
    }
}

/// Creates a solver from TOML configuration text (same keys as the CLI
/// configuration files). The sweep keys may be omitted for single solves.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpsem_solver_new(config: *const c_char, out: *mut *mut HpsemSolver) -> HpsemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        if config.is_null() {
            return Err(null("config"));
        }
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|e| (HpsemStatus::InvalidUtf8, format!("config is not UTF-8: {e}")))?;
        let cfg = lib(StudyConfig::from_toml(text))?;
        lib(cfg.validate(false))?;
        *out = Box::into_raw(Box::new(HpsemSolver { config: cfg, rows: Vec::new() }));
        Ok(())
    })
}

/// Releases a solver. Null is ignored.
///
/// # Safety
/// `solver` must come from [`hpsem_solver_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hpsem_solver_free(solver: *mut HpsemSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}

/// Solves the configured problem at `degree` and `layers` (the configured
/// values when zero). The residual history of the solve is kept on the handle.
///
/// # Safety
/// `solver` and `report` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hpsem_solver_solve(
    solver: *mut HpsemSolver,
    degree: usize,
    layers: usize,
    report: *mut HpsemReport,
) -> HpsemStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        if report.is_null() {
            return Err(null("report"));
        }
        let mut cfg = s.config.clone();
        if degree > 0 {
            cfg.degree = degree;
        }
        if layers > 0 {
            cfg.layers = layers;
        }
        lib(cfg.validate(false))?;
        let problem = lib(catalog(&cfg.problem))?;
        let row = lib(study::solve_point(&cfg, &problem, &cfg.single_point(), cfg.sweep))?;
        *report = report_of(&row);
        s.rows = vec![row];
        Ok(())
    })
}

/// Runs the configured sweep. Afterwards `hpsem_solver_row` returns each row.
///
/// # Safety
/// `solver` and `n_rows` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hpsem_solver_run_study(solver: *mut HpsemSolver, n_rows: *mut usize) -> HpsemStatus {
    guard(|| {
        let s = solver.as_mut().ok_or_else(|| null("solver"))?;
        if n_rows.is_null() {
            return Err(null("n_rows"));
        }
        lib(s.config.validate(true))?;
        s.rows = lib(study::run_study(&s.config))?;
        *n_rows = s.rows.len();
        Ok(())
    })
}

/// Report of row `index` of the last solve or study.
///
/// # Safety
/// `solver` and `report` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hpsem_solver_row(
    solver: *const HpsemSolver,
    index: usize,
    report: *mut HpsemReport,
) -> HpsemStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        if report.is_null() {
            return Err(null("report"));
        }
        let row =
            s.rows.get(index).ok_or_else(|| (HpsemStatus::OutOfRange, format!("row {index} of {}", s.rows.len())))?;
        *report = report_of(row);
        Ok(())
    })
}

/// Copies the residual history `sqrt(<r_k, P r_k>)` of row `index` into
/// `buf`. `len_out` receives the history length; pass a null `buf` to query it.
///
/// # Safety
/// `buf` must point to `cap` writable doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn hpsem_solver_history(
    solver: *const HpsemSolver,
    index: usize,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> HpsemStatus {
    guard(|| {
        let s = solver.as_ref().ok_or_else(|| null("solver"))?;
        if len_out.is_null() {
            return Err(null("len_out"));
        }
        let row =
            s.rows.get(index).ok_or_else(|| (HpsemStatus::OutOfRange, format!("row {index} of {}", s.rows.len())))?;
        let h = &row.residual_history;
        *len_out = h.len();
        if buf.is_null() {
            return Ok(());
        }
        if cap < h.len() {
            return Err((HpsemStatus::BufferTooSmall, format!("history has {} entries, buffer {cap}", h.len())));
        }
        std::ptr::copy_nonoverlapping(h.as_ptr(), buf, h.len());
        Ok(())
    })
}

/// Spectral condition number of the preconditioned single-element form at degree `w`.
///
/// # Safety
/// `kappa` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpsem_condition_number(w: usize, kappa: *mut f64) -> HpsemStatus {
    guard(|| {
        if kappa.is_null() {
            return Err(null("kappa"));
        }
        *kappa = lib(hpsem::precond::condition_number_study(w))?;
        Ok(())
    })
}

/// Gauss-Lobatto-Legendre rule of order `n`: writes `n + 1` nodes and weights.
///
/// # Safety
/// `nodes` and `weights` must each point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hpsem_gll_rule(n: usize, nodes: *mut f64, weights: *mut f64, cap: usize) -> HpsemStatus {
    guard(|| {
        if nodes.is_null() || weights.is_null() {
            return Err(null("nodes or weights"));
        }
        if cap < n + 1 {
            return Err((HpsemStatus::BufferTooSmall, format!("order {n} needs {} entries, buffer {cap}", n + 1)));
        }
        let rule = lib(hpsem::basis::gll_rule(n))?;
        std::ptr::copy_nonoverlapping(rule.nodes.as_ptr(), nodes, n + 1);
        std::ptr::copy_nonoverlapping(rule.weights.as_ptr(), weights, n + 1);
        Ok(())
    })
}
