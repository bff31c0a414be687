use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use vem_bddc_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 512];
    unsafe { vb_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn quad(n: usize) -> *mut VbMesh {
    let mut mesh = ptr::null_mut();
    assert_eq!(unsafe { vb_mesh_generate(VbFamily::Quad, n, 1, 0, &mut mesh) }, VbStatus::Ok);
    assert!(!mesh.is_null());
    mesh
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(vb_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn solve_round_trip() {
    let mesh = quad(8);
    assert_eq!(unsafe { vb_mesh_num_cells(mesh) }, 64);
    let opts = vb_solve_options_default();
    let mut sol = ptr::null_mut();
    let st = unsafe { vb_solve(mesh, 2, VbMethod::PcgVerticesFull, &opts, &mut sol) };
    assert_eq!(st, VbStatus::Ok, "{}", last_error());

    let mut s = std::mem::MaybeUninit::<VbSummary>::uninit();
    assert_eq!(unsafe { vb_solution_summary(sol, s.as_mut_ptr()) }, VbStatus::Ok);
    let s = unsafe { s.assume_init() };
    assert!(s.converged && s.iterations > 0 && s.iterations < 20);
    assert!(s.kappa >= 1.0 && s.kappa < 5.0);
    assert!(s.div_max < 1e-10);

    let mut n = 0;
    assert_eq!(unsafe { vb_solution_pressure(sol, ptr::null_mut(), 0, &mut n) }, VbStatus::Ok);
    assert_eq!(n, 64);
    let mut p = vec![0.0; n];
    assert_eq!(unsafe { vb_solution_pressure(sol, p.as_mut_ptr(), n, &mut n) }, VbStatus::Ok);
    assert!(p.iter().all(|x| x.is_finite()));

    let mut short = vec![0.0; 3];
    assert_eq!(
        unsafe { vb_solution_velocity(sol, short.as_mut_ptr(), 3, ptr::null_mut()) },
        VbStatus::Dimension
    );
    assert!(last_error().contains("needed"));

    let mut nr = 0;
    unsafe { vb_solution_residuals(sol, ptr::null_mut(), 0, &mut nr) };
    assert_eq!(nr, s.iterations + 1);

    unsafe {
        vb_solution_free(sol);
        vb_mesh_free(mesh);
    }
}

#[test]
fn gmres_without_options() {
    let mesh = quad(8);
    let mut sol = ptr::null_mut();
    let st = unsafe { vb_solve(mesh, 2, VbMethod::Gmres, ptr::null(), &mut sol) };
    assert_eq!(st, VbStatus::Ok, "{}", last_error());
    let mut s = std::mem::MaybeUninit::<VbSummary>::uninit();
    unsafe { vb_solution_summary(sol, s.as_mut_ptr()) };
    let s = unsafe { s.assume_init() };
    assert!(s.converged);
    assert!(s.kappa.is_nan());
    unsafe {
        vb_solution_free(sol);
        vb_mesh_free(mesh);
    }
}

#[test]
fn errors_are_reported() {
    let mut mesh = ptr::null_mut();
    assert_eq!(
        unsafe { vb_mesh_generate(VbFamily::Quad, 1, 1, 0, &mut mesh) },
        VbStatus::InvalidArgument
    );
    assert!(mesh.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(
        unsafe { vb_mesh_generate(VbFamily::Quad, 8, 1, 0, ptr::null_mut()) },
        VbStatus::NullPointer
    );

    let mesh = quad(8);
    let mut sol = ptr::null_mut();
    let st = unsafe { vb_solve(mesh, 1, VbMethod::PcgVerticesNormal, ptr::null(), &mut sol) };
    assert_eq!(st, VbStatus::SolveFailed);
    assert!(sol.is_null());
    assert!(last_error().starts_with("setup failed"));

    let opts = VbSolveOptions { tol: -1.0, ..vb_solve_options_default() };
    let st = unsafe { vb_solve(mesh, 2, VbMethod::Gmres, &opts, &mut sol) };
    assert_eq!(st, VbStatus::InvalidArgument);

    let opts = VbSolveOptions { max_iter: 2, ..vb_solve_options_default() };
    let st = unsafe { vb_solve(mesh, 4, VbMethod::Gmres, &opts, &mut sol) };
    assert_eq!(st, VbStatus::NotConverged);
    assert!(!sol.is_null());
    unsafe {
        vb_solution_free(sol);
        vb_mesh_free(mesh);
        vb_mesh_free(ptr::null_mut());
    }
}

#[test]
fn strict_vertex_only_pcg_breaks_down() {
    let mesh = quad(16);
    let opts = VbSolveOptions { allow_indefinite: false, ..vb_solve_options_default() };
    let mut sol = ptr::null_mut();
    let st = unsafe { vb_solve(mesh, 4, VbMethod::PcgVertices, &opts, &mut sol) };
    assert_eq!(st, VbStatus::Breakdown);
    assert!(sol.is_null());
    unsafe { vb_mesh_free(mesh) };
}

#[test]
fn read_missing_file() {
    let mut mesh = ptr::null_mut();
    let st = unsafe { vb_mesh_read(c"/nonexistent/mesh.txt".as_ptr(), &mut mesh) };
    assert_eq!(st, VbStatus::Io);
}

#[test]
fn c_program_links_against_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libvem_bddc_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ffi_smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status();
    let Ok(status) = status else {
        eprintln!("skipping: no C compiler");
        return;
    };
    assert!(status.success(), "C smoke program failed to compile");
    let run = Command::new(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")));
}
