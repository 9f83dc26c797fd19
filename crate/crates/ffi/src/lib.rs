//! C ABI over `chemotaxis-id`.
//!
//! Objects are opaque handles created by `cid_*_new`/`cid_solve_*` and
//! released with the matching `cid_*_free`. Every fallible call returns a
//! [`CidStatus`]; on failure, `cid_last_error` describes the most recent
//! error on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chemotaxis_id::config::RunConfig;
use chemotaxis_id::experiments;
use chemotaxis_id::pde::{self, ForwardDiagnostics, SolverOptions};
use chemotaxis_id::{Error, PhysicalParams, Sensitivity, SensitivityFunction, SimulationGrid, StateTrajectory};

/// Status codes. The nonzero values match the command-line exit codes
/// where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CidStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Solver = 3,
    Stagnation = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Coefficients of the model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CidParams {
    pub m: f64,
    pub d: f64,
    pub b: f64,
    pub h: f64,
    pub mu: f64,
}

/// Space-time grid.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CidGrid {
    pub x_left: f64,
    pub x_right: f64,
    pub n_nodes: usize,
    pub t_final: f64,
    pub n_steps: usize,
}

/// Opaque piecewise-linear sensitivity.
pub struct CidSensitivity(SensitivityFunction);

/// Opaque forward solution.
pub struct CidTrajectory {
    traj: StateTrajectory,
    params: PhysicalParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CidStatus {
    if e.is_config() { CidStatus::Config } else { CidStatus::Solver }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (CidStatus, String)>) -> CidStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CidStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CidStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CidStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CidStatus, String) {
    (CidStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (CidStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CidStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (CidStatus::Config, format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The limb-bud parameter set (M = 0.25, D = 1, h = 1, b = mu = 50).
#[no_mangle]
pub extern "C" fn cid_params_myerscough() -> CidParams {
    let p = PhysicalParams::myerscough();
    CidParams { m: p.m, d: p.d, b: p.b, h: p.h, mu: p.mu }
}

/// Sensitivity with `n` coefficients on uniform knots of `[c_min, c_max]`.
///
/// # Safety
/// `coeffs` must point to `n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn cid_sensitivity_new(
    c_min: f64,
    c_max: f64,
    coeffs: *const f64,
    n: usize,
    out: *mut *mut CidSensitivity,
) -> CidStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = slice(coeffs, n, "coeffs")?;
        let a = SensitivityFunction::new(c_min, c_max, c.to_vec()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CidSensitivity(a)));
        Ok(())
    })
}

/// # Safety
/// `a` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cid_sensitivity_eval(a: *const CidSensitivity, c: f64, out: *mut f64) -> CidStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("sensitivity"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = a.0.eval(c).map_err(lib_err)?;
        Ok(())
    })
}

/// Number of coefficients, or 0 for a null handle.
///
/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cid_sensitivity_n_basis(a: *const CidSensitivity) -> usize {
    a.as_ref().map_or(0, |a| a.0.n_basis())
}

/// Copy the coefficients into `buf`, which holds `len` doubles.
///
/// # Safety
/// `a` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cid_sensitivity_coeffs(a: *const CidSensitivity, buf: *mut f64, len: usize) -> CidStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("sensitivity"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let c = a.0.coeffs();
        if len < c.len() {
            return Err((CidStatus::OutOfRange, format!("buffer holds {len}, need {}", c.len())));
        }
        ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len());
        Ok(())
    })
}

/// Read a sensitivity CSV written by the library.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cid_sensitivity_read_csv(path: *const c_char, out: *mut *mut CidSensitivity) -> CidStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = string(path, "path")?;
        let a = SensitivityFunction::read_csv(Path::new(p)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CidSensitivity(a)));
        Ok(())
    })
}

/// # Safety
/// `a` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cid_sensitivity_free(a: *mut CidSensitivity) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Solve the forward problem. `u0` and `c0` hold `grid.n_nodes` values;
/// `substeps` is the minimum number of internal steps per grid step.
///
/// # Safety
/// All pointers must be valid; `out` receives a new handle on success.
#[no_mangle]
pub unsafe extern "C" fn cid_solve_forward(
    params: *const CidParams,
    grid: *const CidGrid,
    u0: *const f64,
    c0: *const f64,
    a: *const CidSensitivity,
    substeps: usize,
    out: *mut *mut CidTrajectory,
) -> CidStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        let a = a.as_ref().ok_or_else(|| null("sensitivity"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let params = PhysicalParams::new(p.m, p.d, p.b, p.h, p.mu).map_err(lib_err)?;
        let grid = SimulationGrid::new(g.x_left, g.x_right, g.n_nodes, g.t_final, g.n_steps).map_err(lib_err)?;
        let u0 = slice(u0, grid.n_nodes(), "u0")?;
        let c0 = slice(c0, grid.n_nodes(), "c0")?;
        let opts = SolverOptions { min_substeps: substeps.max(1), ..Default::default() };
        let traj = pde::solve_forward_with(u0, c0, &params, &a.0 as &dyn Sensitivity, &grid, &opts, None)
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CidTrajectory { traj, params }));
        Ok(())
    })
}

/// Number of stored frames (n_steps + 1), or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cid_trajectory_n_frames(t: *const CidTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.traj.frames().len())
}

/// Nodes per frame, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cid_trajectory_n_nodes(t: *const CidTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.traj.grid().n_nodes())
}

/// Copy frame `j` into `u` and `c`, each holding `len` doubles. Either
/// output may be null to skip it.
///
/// # Safety
/// `t` must be a live handle; non-null buffers must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cid_trajectory_frame(
    t: *const CidTrajectory,
    j: usize,
    u: *mut f64,
    c: *mut f64,
    len: usize,
) -> CidStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        let n_frames = t.traj.frames().len();
        if j >= n_frames {
            return Err((CidStatus::OutOfRange, format!("frame {j} of {n_frames}")));
        }
        let f = t.traj.frame(j);
        if len < f.u.len() {
            return Err((CidStatus::OutOfRange, format!("buffer holds {len}, need {}", f.u.len())));
        }
        if !u.is_null() {
            ptr::copy_nonoverlapping(f.u.as_ptr(), u, f.u.len());
        }
        if !c.is_null() {
            ptr::copy_nonoverlapping(f.c.as_ptr(), c, f.c.len());
        }
        Ok(())
    })
}

/// Invariant diagnostics of a forward solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CidDiagnostics {
    pub mass_drift: f64,
    pub min_u: f64,
    pub min_c: f64,
    /// Smallest ratio of min c to its exponential lower bound.
    pub c_bound_ratio: f64,
}

/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cid_trajectory_diagnostics(t: *const CidTrajectory, out: *mut CidDiagnostics) -> CidStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = ForwardDiagnostics::compute(&t.traj, &t.params);
        *out = CidDiagnostics { mass_drift: d.mass_drift, min_u: d.min_u, min_c: d.min_c, c_bound_ratio: d.c_bound_ratio };
        Ok(())
    })
}

/// Write the trajectory as `t,x,u,c` CSV.
///
/// # Safety
/// `t` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cid_trajectory_write_csv(t: *const CidTrajectory, path: *const c_char) -> CidStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        let p = string(path, "path")?;
        t.traj.write_csv(Path::new(p)).map_err(lib_err)
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cid_trajectory_free(t: *mut CidTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Run one of the command-line commands (`forward`, `make-data`, `invert`,
/// `lcurve`, `rates`) from a TOML config file, writing into `out_dir`.
/// `config_path` may be null to use only the `myerscough` preset.
///
/// # Safety
/// String arguments must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cid_run_command(
    command: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
) -> CidStatus {
    let mut stagnated = false;
    let status = guard(|| {
        let cmd = string(command, "command")?;
        let out = Path::new(string(out_dir, "out_dir")?);
        let (cfg, base) = if config_path.is_null() {
            (RunConfig { preset: Some("myerscough".into()), ..Default::default() }, Path::new(".").to_path_buf())
        } else {
            let p = Path::new(string(config_path, "config_path")?);
            (RunConfig::from_file(p).map_err(lib_err)?, p.parent().unwrap_or(Path::new(".")).to_path_buf())
        };
        let s = cfg.resolve(&base).map_err(lib_err)?;
        let outcome = match cmd {
            "forward" => experiments::cmd_forward(&s, out),
            "make-data" => experiments::cmd_make_data(&s, out),
            "invert" => experiments::cmd_invert(&s, out),
            "lcurve" => experiments::cmd_lcurve(&s, out),
            "rates" => experiments::cmd_rates(&s, out),
            other => return Err((CidStatus::Config, format!("unknown command '{other}'"))),
        }
        .map_err(lib_err)?;
        stagnated = outcome.stagnated;
        Ok(())
    });
    if status == CidStatus::Ok && stagnated {
        set_error("optimizer stagnated before convergence");
        return CidStatus::Stagnation;
    }
    status
}
