//! C interface to the solver.
//!
//! Handles are opaque and owned by the caller once returned; free them with the
//! matching `*_free` function. Every fallible call returns a [`VbStatus`] and
//! leaves a message retrievable with [`vb_last_error_message`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use vem_bddc::bddc::PrimalKind;
use vem_bddc::harness::{run_cell, CellRun, MeshContext, Method};
use vem_bddc::krylov::SolverConfig;
use vem_bddc::mesh::{MeshFamily, PolygonalMesh};
use vem_bddc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Geometry = 6,
    Partition = 7,
    DegenerateEdge = 8,
    Singular = 9,
    Dimension = 10,
    Breakdown = 11,
    NotConverged = 12,
    SolveFailed = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VbFamily {
    Quad = 0,
    Hexa = 1,
    Tri = 2,
    Cvt = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VbMethod {
    Gmres = 0,
    PcgVertices = 1,
    PcgVerticesNormal = 2,
    PcgVerticesFull = 3,
}

/// Generated or loaded mesh together with its assembled Stokes system.
pub struct VbMesh {
    ctx: MeshContext,
}

/// Recovered fields and statistics of one solve.
pub struct VbSolution {
    run: CellRun,
}

/// Scalar results of a solve. Quantities that were not computed are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VbSummary {
    pub iterations: usize,
    pub converged: bool,
    pub indefinite_steps: usize,
    pub interface_dofs: usize,
    pub kappa: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub velocity_h1_error: f64,
    pub pressure_l2_error: f64,
    pub div_max: f64,
    pub wall_time_s: f64,
}

/// Solver settings; obtain defaults from [`vb_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VbSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// keep iterating through indefinite PCG steps
    pub allow_indefinite: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> VbStatus {
    match e {
        Error::InvalidArgument(_) => VbStatus::InvalidArgument,
        Error::Io { .. } => VbStatus::Io,
        Error::Parse { .. } => VbStatus::Parse,
        Error::Validation(_) => VbStatus::Validation,
        Error::Geometry { .. } => VbStatus::Geometry,
        Error::Partition(_) => VbStatus::Partition,
        Error::DegenerateEdge { .. } => VbStatus::DegenerateEdge,
        Error::Singular { .. } => VbStatus::Singular,
        Error::Dimension(_) => VbStatus::Dimension,
        Error::Breakdown { .. } => VbStatus::Breakdown,
    }
}

fn fail(status: VbStatus, msg: impl Into<String>) -> VbStatus {
    set_error(msg);
    status
}

fn fail_with(e: Error) -> VbStatus {
    fail(status_of(&e), e.to_string())
}

fn guard(f: impl FnOnce() -> VbStatus) -> VbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(VbStatus::Panic, format!("panic: {msg}"))
        }
    }
}

impl From<VbFamily> for MeshFamily {
    fn from(f: VbFamily) -> Self {
        match f {
            VbFamily::Quad => MeshFamily::Quad,
            VbFamily::Hexa => MeshFamily::Hexa,
            VbFamily::Tri => MeshFamily::Tri,
            VbFamily::Cvt => MeshFamily::Cvt,
        }
    }
}

impl From<VbMethod> for Method {
    fn from(m: VbMethod) -> Self {
        match m {
            VbMethod::Gmres => Method::Gmres,
            VbMethod::PcgVertices => Method::Pcg(PrimalKind::VerticesOnly),
            VbMethod::PcgVerticesNormal => Method::Pcg(PrimalKind::VerticesPlusNormalAvg),
            VbMethod::PcgVerticesFull => Method::Pcg(PrimalKind::VerticesPlusFullAvg),
        }
    }
}

/// Null-terminated version string with static lifetime.
#[no_mangle]
pub extern "C" fn vb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always null-terminated) and returns the full message length without the
/// terminator. Returns 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Generates a mesh of `n × n` cells (power of two) and assembles the system.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn vb_mesh_generate(
    family: VbFamily,
    n: usize,
    seed: u64,
    lloyd_iters: usize,
    out: *mut *mut VbMesh,
) -> VbStatus {
    guard(|| {
        if out.is_null() {
            return fail(VbStatus::NullPointer, "out is null");
        }
        match MeshContext::generate(family.into(), n, seed, lloyd_iters) {
            Ok(ctx) => {
                *out = Box::into_raw(Box::new(VbMesh { ctx }));
                VbStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Reads a mesh in the text format written by the CLI and assembles the system.
///
/// # Safety
/// `path` must be a null-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vb_mesh_read(path: *const c_char, out: *mut *mut VbMesh) -> VbStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(VbStatus::NullPointer, "path or out is null");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(VbStatus::InvalidArgument, "path is not valid UTF-8");
        };
        let t = Instant::now();
        match PolygonalMesh::read(path).and_then(|m| MeshContext::from_mesh(m, None, t)) {
            Ok(ctx) => {
                *out = Box::into_raw(Box::new(VbMesh { ctx }));
                VbStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// # Safety
/// `mesh` must be null or a handle from `vb_mesh_generate`/`vb_mesh_read`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn vb_mesh_free(mesh: *mut VbMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vb_mesh_num_cells(mesh: *const VbMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.ctx.mesh.num_cells())
}

/// # Safety
/// `mesh` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vb_mesh_num_vertices(mesh: *const VbMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.ctx.mesh.num_vertices())
}

#[no_mangle]
pub extern "C" fn vb_solve_options_default() -> VbSolveOptions {
    let d = SolverConfig::default();
    VbSolveOptions {
        tol: d.tol,
        max_iter: d.max_iter,
        allow_indefinite: d.allow_indefinite,
    }
}

/// Splits the mesh into `inv_big_h × inv_big_h` subdomains and solves the
/// interface problem with `method`. A solution handle is returned for
/// `VB_STATUS_OK` and `VB_STATUS_NOT_CONVERGED`; on other statuses `*out` is
/// set to null.
///
/// # Safety
/// `mesh` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vb_solve(
    mesh: *const VbMesh,
    inv_big_h: usize,
    method: VbMethod,
    options: *const VbSolveOptions,
    out: *mut *mut VbSolution,
) -> VbStatus {
    guard(|| {
        if mesh.is_null() || out.is_null() {
            return fail(VbStatus::NullPointer, "mesh or out is null");
        }
        *out = std::ptr::null_mut();
        let o = options.as_ref().copied().unwrap_or_else(|| vb_solve_options_default());
        let cfg = SolverConfig {
            tol: o.tol,
            max_iter: o.max_iter,
            allow_indefinite: o.allow_indefinite,
            ..SolverConfig::default()
        };
        if let Err(e) = cfg.validate() {
            return fail_with(e);
        }
        let run = run_cell(&(*mesh).ctx, inv_big_h, &[method.into()], &cfg)
            .pop()
            .expect("one run per method");
        let status = run.row.status.clone();
        let code = if status == "ok" {
            VbStatus::Ok
        } else if status == "not converged" {
            set_error(status.clone());
            VbStatus::NotConverged
        } else if status.starts_with("breakdown") {
            return fail(VbStatus::Breakdown, status);
        } else {
            return fail(VbStatus::SolveFailed, status);
        };
        *out = Box::into_raw(Box::new(VbSolution { run }));
        code
    })
}

/// # Safety
/// `solution` must be null or a live handle from `vb_solve`.
#[no_mangle]
pub unsafe extern "C" fn vb_solution_free(solution: *mut VbSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vb_solution_summary(solution: *const VbSolution, out: *mut VbSummary) -> VbStatus {
    guard(|| {
        let (Some(s), false) = (solution.as_ref(), out.is_null()) else {
            return fail(VbStatus::NullPointer, "solution or out is null");
        };
        let r = &s.run.row;
        let nan = |x: Option<f64>| x.unwrap_or(f64::NAN);
        *out = VbSummary {
            iterations: r.iterations,
            converged: r.converged,
            indefinite_steps: r.indefinite_steps,
            interface_dofs: r.interface_dofs,
            kappa: nan(r.kappa),
            lambda_min: nan(r.lambda_min),
            lambda_max: nan(r.lambda_max),
            velocity_h1_error: nan(r.velocity_h1_error),
            pressure_l2_error: nan(r.pressure_l2_error),
            div_max: nan(r.div_max),
            wall_time_s: r.wall_time_s,
        };
        VbStatus::Ok
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, written: *mut usize) -> VbStatus {
    if !written.is_null() {
        *written = src.len();
    }
    if buf.is_null() {
        return VbStatus::Ok;
    }
    if len < src.len() {
        return fail(
            VbStatus::Dimension,
            format!("buffer holds {len} values, {} needed", src.len()),
        );
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    VbStatus::Ok
}

/// Copies the cell pressures (zero mean) into `buf`. With `buf` null only the
/// required length is written to `written`.
///
/// # Safety
/// `solution` must be live; `buf` null or `len` writable doubles; `written`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn vb_solution_pressure(
    solution: *const VbSolution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> VbStatus {
    guard(|| match solution.as_ref() {
        Some(s) => copy_out(&s.run.p, buf, len, written),
        None => fail(VbStatus::NullPointer, "solution is null"),
    })
}

/// Copies the velocity degrees of freedom not fixed by the boundary condition.
///
/// # Safety
/// Same contract as [`vb_solution_pressure`].
#[no_mangle]
pub unsafe extern "C" fn vb_solution_velocity(
    solution: *const VbSolution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> VbStatus {
    guard(|| match solution.as_ref() {
        Some(s) => copy_out(&s.run.u, buf, len, written),
        None => fail(VbStatus::NullPointer, "solution is null"),
    })
}

/// Relative residual history of the solve (index 0 is the initial residual).
///
/// # Safety
/// Same contract as [`vb_solution_pressure`].
#[no_mangle]
pub unsafe extern "C" fn vb_solution_residuals(
    solution: *const VbSolution,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> VbStatus {
    guard(|| match solution.as_ref() {
        Some(s) => {
            let h = s.run.report.as_ref().map_or(&[][..], |r| &r.residual_history[..]);
            copy_out(h, buf, len, written)
        }
        None => fail(VbStatus::NullPointer, "solution is null"),
    })
}
