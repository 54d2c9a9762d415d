//! C ABI over `finsler_plap`.
//!
//! Objects are opaque heap handles created by `fp_*_new`/`fp_mesh_*`
//! constructors and released with the matching `fp_*_free`. Every fallible
//! call returns an [`FpStatus`]; on failure the message is kept per thread
//! and can be read with [`fp_last_error`]. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use finsler_plap::config::load_config_str;
use finsler_plap::finsler::{sample_vectors, verify_duality_identities};
use finsler_plap::mesh::{build_domain, Domain, Mesh2D};
use finsler_plap::radial::{shoot, RadialMode, RadialProblem};
use finsler_plap::solver::zero_dirichlet;
use finsler_plap::{
    solve, Error, FinslerNorm, MaterialProfile, ProfileKind, ScalarField, ScalarFn, SolveOptions,
    SourceTerm,
};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Admissibility = 4,
    Domain = 5,
    Numeric = 6,
    NonConvergence = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpProfileKind {
    Power = 0,
    Shifted = 1,
}

/// Opaque Finsler norm on ℝ².
pub struct FpNorm(FinslerNorm);
/// Opaque material profile.
pub struct FpMaterial(MaterialProfile);
/// Opaque triangle mesh.
pub struct FpMesh(Arc<Mesh2D>);
/// Opaque nodal field with its mesh.
pub struct FpField(ScalarField);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(e: &Error) -> FpStatus {
    match e {
        Error::InvalidArgument(_) => FpStatus::InvalidArgument,
        Error::Domain(_) => FpStatus::Domain,
        Error::Numeric { .. } => FpStatus::Numeric,
        Error::Admissibility { .. } => FpStatus::Admissibility,
        Error::NonConvergence { .. } => FpStatus::NonConvergence,
        Error::Config(_) | Error::Json(_) => FpStatus::Config,
        Error::Io(_) => FpStatus::Io,
    }
}

fn fail(status: FpStatus, msg: &str) -> FpStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), FpStatus>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FpStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(FpStatus::Panic, "internal panic"),
    }
}

fn lib<T>(r: finsler_plap::Result<T>) -> Result<T, FpStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, FpStatus> {
    p.as_ref()
        .ok_or_else(|| fail(FpStatus::NullPointer, &format!("{what} is null")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), FpStatus> {
    if out.is_null() {
        return Err(fail(FpStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn store<T>(out: *mut T, value: T) -> Result<(), FpStatus> {
    if out.is_null() {
        return Err(fail(FpStatus::NullPointer, "output pointer is null"));
    }
    *out = value;
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`) and returns its full length in bytes.
#[no_mangle]
pub unsafe extern "C" fn fp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_norm_euclidean(out: *mut *mut FpNorm) -> FpStatus {
    guard(|| emit(out, FpNorm(lib(FinslerNorm::euclidean(2))?)))
}

/// `H(ξ) = sqrt(a ξ₁² + b ξ₂²)`.
#[no_mangle]
pub unsafe extern "C" fn fp_norm_diagonal(a: f64, b: f64, out: *mut *mut FpNorm) -> FpStatus {
    guard(|| emit(out, FpNorm(lib(FinslerNorm::diagonal(&[a, b]))?)))
}

/// `H(ξ) = sqrt(ξᵀAξ)` with `A` given row-major (2×2, symmetric positive
/// definite).
#[no_mangle]
pub unsafe extern "C" fn fp_norm_ellipsoidal(
    matrix: *const f64,
    out: *mut *mut FpNorm,
) -> FpStatus {
    guard(|| {
        let m = std::slice::from_raw_parts(deref(matrix, "matrix")?, 4);
        emit(
            out,
            FpNorm(lib(FinslerNorm::ellipsoidal(DMatrix::from_row_slice(
                2, 2, m,
            )))?),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_norm_lp(q: f64, out: *mut *mut FpNorm) -> FpStatus {
    guard(|| emit(out, FpNorm(lib(FinslerNorm::lp(2, q))?)))
}

#[no_mangle]
pub unsafe extern "C" fn fp_norm_free(norm: *mut FpNorm) {
    if !norm.is_null() {
        drop(Box::from_raw(norm));
    }
}

/// `H(ξ)` for `xi` of length 2.
#[no_mangle]
pub unsafe extern "C" fn fp_norm_eval(
    norm: *const FpNorm,
    xi: *const f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let h = deref(norm, "norm")?;
        let xi = std::slice::from_raw_parts(deref(xi, "xi")?, 2);
        store(out, lib(h.0.eval(xi))?)
    })
}

/// `H°(x)` for `x` of length 2.
#[no_mangle]
pub unsafe extern "C" fn fp_norm_dual(
    norm: *const FpNorm,
    x: *const f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let h = deref(norm, "norm")?;
        let x = std::slice::from_raw_parts(deref(x, "x")?, 2);
        store(out, lib(h.0.dual(x))?)
    })
}

/// Worst duality residual over `samples` seeded random vectors.
#[no_mangle]
pub unsafe extern "C" fn fp_norm_duality_residual(
    norm: *const FpNorm,
    samples: usize,
    seed: u64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let h = deref(norm, "norm")?;
        store(
            out,
            lib(verify_duality_identities(
                &h.0,
                &sample_vectors(2, samples, seed),
            ))?,
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_material_new(
    kind: FpProfileKind,
    p: f64,
    k: f64,
    out: *mut *mut FpMaterial,
) -> FpStatus {
    let kind = match kind {
        FpProfileKind::Power => ProfileKind::Power,
        FpProfileKind::Shifted => ProfileKind::Shifted,
    };
    guard(|| emit(out, FpMaterial(lib(MaterialProfile::new(kind, p, k))?)))
}

#[no_mangle]
pub unsafe extern "C" fn fp_material_free(material: *mut FpMaterial) {
    if !material.is_null() {
        drop(Box::from_raw(material));
    }
}

unsafe fn mesh_of(domain: Domain, h: f64, out: *mut *mut FpMesh) -> FpStatus {
    guard(|| emit(out, FpMesh(Arc::new(lib(build_domain(&domain, h))?))))
}

#[no_mangle]
pub unsafe extern "C" fn fp_mesh_disk(radius: f64, h: f64, out: *mut *mut FpMesh) -> FpStatus {
    mesh_of(Domain::Disk { radius }, h, out)
}

/// `[0, a] × [0, b]`.
#[no_mangle]
pub unsafe extern "C" fn fp_mesh_rectangle(
    a: f64,
    b: f64,
    h: f64,
    out: *mut *mut FpMesh,
) -> FpStatus {
    mesh_of(Domain::Rectangle { a, b }, h, out)
}

/// Dual-norm ball of radius `radius` centered at the origin.
#[no_mangle]
pub unsafe extern "C" fn fp_mesh_wulff_ball(
    norm: *const FpNorm,
    radius: f64,
    h: f64,
    out: *mut *mut FpMesh,
) -> FpStatus {
    match deref(norm, "norm") {
        Ok(n) => mesh_of(
            Domain::WulffBall {
                norm: n.0.clone(),
                radius,
            },
            h,
            out,
        ),
        Err(s) => s,
    }
}

#[no_mangle]
pub unsafe extern "C" fn fp_mesh_free(mesh: *mut FpMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fp_mesh_num_vertices(mesh: *const FpMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.num_vertices())
}

/// Writes `2·num_vertices` interleaved coordinates into `xy`.
#[no_mangle]
pub unsafe extern "C" fn fp_mesh_vertices(
    mesh: *const FpMesh,
    xy: *mut f64,
    len: usize,
) -> FpStatus {
    guard(|| {
        let m = deref(mesh, "mesh")?;
        let need = 2 * m.0.num_vertices();
        if xy.is_null() {
            return Err(fail(FpStatus::NullPointer, "xy is null"));
        }
        if len < need {
            return Err(fail(
                FpStatus::BufferTooSmall,
                &format!("need {need} entries, got {len}"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(xy, need);
        for (chunk, x) in out.chunks_exact_mut(2).zip(m.0.vertices()) {
            chunk.copy_from_slice(x);
        }
        Ok(())
    })
}

/// Solves with a constant source `f` and zero boundary values. On
/// nonconvergence the last iterate is still returned in `out` together with
/// `FP_STATUS_NON_CONVERGENCE`.
#[no_mangle]
pub unsafe extern "C" fn fp_solve(
    mesh: *const FpMesh,
    material: *const FpMaterial,
    norm: *const FpNorm,
    f: f64,
    out: *mut *mut FpField,
) -> FpStatus {
    guard(|| {
        let mesh = deref(mesh, "mesh")?;
        let m = deref(material, "material")?;
        let h = deref(norm, "norm")?;
        if out.is_null() {
            return Err(fail(FpStatus::NullPointer, "output pointer is null"));
        }
        let source = lib(SourceTerm::constant(f))?;
        let bc = zero_dirichlet(&mesh.0);
        match solve(
            mesh.0.clone(),
            &m.0,
            &h.0,
            &source,
            &bc,
            &SolveOptions::default(),
        ) {
            Ok((u, _)) => emit(out, FpField(u)),
            Err(Error::NonConvergence {
                iterations,
                residual,
                last_iterate,
            }) => {
                let u = lib(ScalarField::new(mesh.0.clone(), *last_iterate))?;
                emit(out, FpField(u))?;
                Err(fail(
                    FpStatus::NonConvergence,
                    &format!(
                        "no convergence after {iterations} iterations (residual {residual:e})"
                    ),
                ))
            }
            Err(e) => lib(Err(e)),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fp_field_free(field: *mut FpField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fp_field_len(field: *const FpField) -> usize {
    field.as_ref().map_or(0, |u| u.0.values().len())
}

#[no_mangle]
pub unsafe extern "C" fn fp_field_values(
    field: *const FpField,
    values: *mut f64,
    len: usize,
) -> FpStatus {
    guard(|| {
        let u = deref(field, "field")?;
        let v = u.0.values();
        if values.is_null() {
            return Err(fail(FpStatus::NullPointer, "values is null"));
        }
        if len < v.len() {
            return Err(fail(
                FpStatus::BufferTooSmall,
                &format!("need {} entries, got {len}", v.len()),
            ));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), values, v.len());
        Ok(())
    })
}

/// Shoots the radial barrier in dimension `n` with `g ≡ g_const` and height
/// `m` at `radius/2`; writes the initial slope.
#[no_mangle]
pub unsafe extern "C" fn fp_barrier_slope(
    material: *const FpMaterial,
    n: usize,
    radius: f64,
    m: f64,
    g_const: f64,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let mat = deref(material, "material")?;
        let g = if g_const == 0.0 {
            ScalarFn::Zero {}
        } else {
            ScalarFn::Constant { value: g_const }
        };
        let problem = lib(RadialProblem::new(
            mat.0,
            n,
            RadialMode::Barrier { radius, m },
            g,
        ))?;
        store(out, lib(shoot(&problem, 1e-12))?.shoot_slope)
    })
}

/// Parses and checks a JSON configuration and writes the admissibility
/// report as JSON into `buf`. `needed` receives the report length including
/// the terminating NUL, also when the buffer is too small.
#[no_mangle]
pub unsafe extern "C" fn fp_config_admissibility(
    json: *const c_char,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FpStatus {
    guard(|| {
        if json.is_null() {
            return Err(fail(FpStatus::NullPointer, "json is null"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fail(FpStatus::InvalidArgument, "config is not UTF-8"))?;
        let setup = lib(load_config_str(text, &[], None))?;
        let report = lib(serde_json::to_string(&setup.admissibility).map_err(Error::from))?;
        if !needed.is_null() {
            *needed = report.len() + 1;
        }
        if buf.is_null() || len < report.len() + 1 {
            return Err(fail(
                FpStatus::BufferTooSmall,
                &format!("need {} bytes", report.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(report.as_ptr(), buf.cast::<u8>(), report.len());
        *buf.add(report.len()) = 0;
        Ok(())
    })
}
