//! C ABI for `hitchin-limits`.
//!
//! Every function returns a status code (`HL_OK` on success) and writes
//! results through out-pointers. On failure the thread-local message from
//! [`hl_last_error_message`] describes the cause. Handles are opaque and
//! must be released with their `*_free` function; strings returned by the
//! library are released with [`hl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hitchin_limits::building;
use hitchin_limits::cli::CliError;
use hitchin_limits::polygon;
use hitchin_limits::surface::{self, CubicSurface, GeodesicPath};
use hitchin_limits::tropical;
use hitchin_limits::trigroup;
use hitchin_limits::wang::{self, GridSpec, WangSolution};
use nalgebra::Matrix3;
use num_complex::Complex64;

pub const HL_OK: c_int = 0;
/// A required pointer argument was null.
pub const HL_ERR_NULL: c_int = 1;
/// Input failed validation.
pub const HL_ERR_INVALID: c_int = 2;
/// A numerical stage failed.
pub const HL_ERR_NUMERICAL: c_int = 3;
/// A string argument was not UTF-8.
pub const HL_ERR_UTF8: c_int = 4;
/// Internal panic caught at the boundary.
pub const HL_ERR_PANIC: c_int = 5;

/// Flat surface with cubic differential.
pub struct HlSurface(CubicSurface);
/// Geodesic path of saddle connections.
pub struct HlPath(GeodesicPath);
/// Solution of Wang's equation on a polynomial disk.
pub struct HlWangSolution(WangSolution);

thread_local! {
    static LAST: RefCell<(c_int, CString)> = RefCell::new((HL_OK, CString::default()));
}

struct Failure(c_int, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = if e.numerical { HL_ERR_NUMERICAL } else { HL_ERR_INVALID };
        Failure(status, format!("{}: {}", e.code, e.message))
    }
}

macro_rules! from_module_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                CliError::from(e).into()
            }
        }
    )*};
}
from_module_error!(
    surface::SurfaceError,
    tropical::TropicalError,
    polygon::PolygonError,
    building::BuildingError,
    trigroup::TrigroupError,
    wang::WangError
);

fn set_last(status: c_int, msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST.with(|l| *l.borrow_mut() = (status, msg));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last(HL_OK, "");
            HL_OK
        }
        Ok(Err(Failure(status, msg))) => {
            set_last(status, &msg);
            status
        }
        Err(_) => {
            set_last(HL_ERR_PANIC, "internal panic");
            HL_ERR_PANIC
        }
    }
}

fn null() -> Failure {
    Failure(HL_ERR_NULL, "null pointer argument".into())
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(HL_ERR_UTF8, e.to_string()))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(null)
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

fn boxed<T>(x: T) -> *mut T {
    Box::into_raw(Box::new(x))
}

/// Status of the last call on this thread.
#[no_mangle]
pub extern "C" fn hl_last_error_code() -> c_int {
    LAST.with(|l| l.borrow().0)
}

/// Message of the last failed call on this thread; empty after success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn hl_last_error_message() -> *const c_char {
    LAST.with(|l| l.borrow().1.as_ptr())
}

/// # Safety
/// `s` is null or was returned by this library.
#[no_mangle]
pub unsafe extern "C" fn hl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Surfaces

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_surface_from_json(json: *const c_char, out_surface: *mut *mut HlSurface) -> c_int {
    guard(|| {
        let o = out(out_surface)?;
        let s = CubicSurface::from_json(text(json)?)?;
        *o = boxed(HlSurface(s));
        Ok(())
    })
}

/// Bordered disk with a single zero of order `k`.
///
/// # Safety
/// `out_surface` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_surface_polynomial_disk(k: i64, radius: f64, out_surface: *mut *mut HlSurface) -> c_int {
    guard(|| {
        let o = out(out_surface)?;
        *o = boxed(HlSurface(surface::build_polynomial_disk(k, radius)?));
        Ok(())
    })
}

/// Closed surface covering the `(p, q, r)` triangle orbifold.
///
/// # Safety
/// `out_surface` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_surface_triangle_orbifold(p: u32, q: u32, r: u32, out_surface: *mut *mut HlSurface) -> c_int {
    guard(|| {
        let o = out(out_surface)?;
        *o = boxed(HlSurface(trigroup::build_orbifold(p, q, r)?.surface));
        Ok(())
    })
}

/// Number of invariant violations; the first one's code is left in the
/// last-error message.
///
/// # Safety
/// `surface` is a live handle; `out_count` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_surface_validate(surface: *const HlSurface, out_count: *mut usize) -> c_int {
    let mut first = None;
    let status = guard(|| {
        let s = handle(surface)?;
        let o = out(out_count)?;
        let v = surface::validate(&s.0);
        *o = v.len();
        first = v.first().map(|x| x.code());
        Ok(())
    });
    if let Some(code) = first {
        set_last(HL_OK, code);
    }
    status
}

/// # Safety
/// `surface` is a live handle; `out_json` is writable. Free the result
/// with [`hl_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hl_surface_to_json(surface: *const HlSurface, out_json: *mut *mut c_char) -> c_int {
    guard(|| {
        let s = handle(surface)?;
        let o = out(out_json)?;
        *o = CString::new(s.0.to_json()).map_err(|e| Failure(HL_ERR_INVALID, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `surface` is a live handle; `out_x` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_surface_euler_characteristic(surface: *const HlSurface, out_x: *mut i64) -> c_int {
    guard(|| {
        let s = handle(surface)?;
        *out(out_x)? = s.0.euler_characteristic();
        Ok(())
    })
}

/// # Safety
/// `surface` is null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hl_surface_free(surface: *mut HlSurface) {
    if !surface.is_null() {
        drop(Box::from_raw(surface));
    }
}

// ---------------------------------------------------------------------------
// Paths and tropical exponents

/// Parse a path file. `surface` may be null (all vertices regular).
///
/// # Safety
/// `json` is NUL-terminated; `surface` is null or live; `out_path` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hl_path_from_json(json: *const c_char, surface: *const HlSurface, out_path: *mut *mut HlPath) -> c_int {
    guard(|| {
        let o = out(out_path)?;
        let s = surface.as_ref().map(|s| &s.0);
        *o = boxed(HlPath(GeodesicPath::from_json(text(json)?, s)?));
        Ok(())
    })
}

/// # Safety
/// `path` is null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hl_path_free(path: *mut HlPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Sorted exponents `ν₁ ≥ ν₂ ≥ ν₃` of one period.
///
/// # Safety
/// `out3` points to three doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_segment_exponents(re: f64, im: f64, out3: *mut f64) -> c_int {
    guard(|| {
        if out3.is_null() {
            return Err(null());
        }
        let e = tropical::segment_exponents(Complex64::new(re, im))?;
        ptr::copy_nonoverlapping(e.sorted.as_array().as_ptr(), out3, 3);
        Ok(())
    })
}

/// Sum of the segment exponents of a path.
///
/// # Safety
/// `path` is live; `out3` points to three doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_path_singular_exponents(path: *const HlPath, out3: *mut f64) -> c_int {
    guard(|| {
        let p = handle(path)?;
        if out3.is_null() {
            return Err(null());
        }
        let v = tropical::path_singular_exponents(&p.0)?;
        ptr::copy_nonoverlapping(v.as_array().as_ptr(), out3, 3);
        Ok(())
    })
}

/// Log spectral radius exponent of a closed path.
///
/// # Safety
/// `path` is live; `out_value` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_path_spectral_exponent(path: *const HlPath, out_value: *mut f64) -> c_int {
    guard(|| {
        let p = handle(path)?;
        *out(out_value)? = tropical::spectral_exponent(&p.0)?;
        Ok(())
    })
}

/// 1 when the path's vector distance is the sum of its segment vectors.
///
/// # Safety
/// `path` is live; `out_flag` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_path_weak_convexity(path: *const HlPath, out_flag: *mut c_int) -> c_int {
    guard(|| {
        let p = handle(path)?;
        *out(out_flag)? = c_int::from(building::weak_convexity_check(&p.0));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Polygon and building

/// Row-major unipotent transition of the regular `n`-gon between two
/// chart angles.
///
/// # Safety
/// `out9` points to nine doubles.
#[no_mangle]
pub unsafe extern "C" fn hl_polygon_arc_unipotent(n: usize, theta_in: f64, theta_out: f64, out9: *mut f64) -> c_int {
    guard(|| {
        if out9.is_null() {
            return Err(null());
        }
        let lifts = polygon::regular_lifts(n)?;
        let u = polygon::arc_unipotent(&lifts, theta_in, theta_out)?;
        let rows: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| u[(i, j)])).collect();
        ptr::copy_nonoverlapping(rows.as_ptr(), out9, 9);
        Ok(())
    })
}

/// Vector distance of `SL(3)` element `m` (row-major) from the origin.
///
/// # Safety
/// `m9` points to nine doubles, `out3` to three.
#[no_mangle]
pub unsafe extern "C" fn hl_building_vector_distance(m9: *const f64, out3: *mut f64) -> c_int {
    guard(|| {
        if m9.is_null() || out3.is_null() {
            return Err(null());
        }
        let m = Matrix3::from_row_slice(std::slice::from_raw_parts(m9, 9));
        let v = building::vector_distance(&m)?;
        ptr::copy_nonoverlapping(v.as_array().as_ptr(), out3, 3);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Wang's equation

/// # Safety
/// `out_solution` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_wang_solve(k: u32, s: f64, radius: f64, nr: usize, ntheta: usize, out_solution: *mut *mut HlWangSolution) -> c_int {
    guard(|| {
        let o = out(out_solution)?;
        let grid = GridSpec {
            ntheta,
            ..GridSpec::with_nr(nr)
        };
        *o = boxed(HlWangSolution(wang::solve_disk(k, s, radius, grid)?));
        Ok(())
    })
}

/// `φ` at `z = re + i·im`.
///
/// # Safety
/// `solution` is live; `out_phi` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_wang_phi_at(solution: *const HlWangSolution, re: f64, im: f64, out_phi: *mut f64) -> c_int {
    guard(|| {
        let w = handle(solution)?;
        *out(out_phi)? = w.0.phi_at(Complex64::new(re, im))?.0;
        Ok(())
    })
}

/// 1 when `e^φ` exceeds the flat bound at every interior node.
///
/// # Safety
/// `solution` is live; `out_flag` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_wang_lower_bound_holds(solution: *const HlWangSolution, out_flag: *mut c_int) -> c_int {
    guard(|| {
        let w = handle(solution)?;
        *out(out_flag)? = c_int::from(wang::pointwise_lower_bound_check(&w.0).holds);
        Ok(())
    })
}

/// # Safety
/// `solution` is null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hl_wang_free(solution: *mut HlWangSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

// ---------------------------------------------------------------------------
// Triangle groups

/// Minimum projective distance between rotated spectra of the default
/// two-class family over `nthetas` equally spaced angles.
///
/// # Safety
/// `out_distance` is writable.
#[no_mangle]
pub unsafe extern "C" fn hl_trigroup_boundary_probe(
    p: u32,
    q: u32,
    r: u32,
    max_length: f64,
    max_segments: usize,
    nthetas: usize,
    out_distance: *mut f64,
) -> c_int {
    guard(|| {
        let o = out(out_distance)?;
        let orb = trigroup::build_orbifold(p, q, r)?;
        let classes = trigroup::closed_geodesics(&orb.surface, max_length, max_segments)?;
        let family = trigroup::default_family(&classes).ok_or(trigroup::TrigroupError::InsufficientFamily)?;
        *o = trigroup::boundary_injectivity_probe(&family, &trigroup::theta_grid(nthetas))?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_are_caught() {
        assert_eq!(guard(|| panic!("boom")), HL_ERR_PANIC);
        assert_eq!(hl_last_error_code(), HL_ERR_PANIC);
        assert_eq!(guard(|| Ok(())), HL_OK);
        assert_eq!(hl_last_error_code(), HL_OK);
    }

    #[test]
    fn numerical_errors_map_to_numerical_status() {
        let f: Failure = wang::WangError::NewtonDiverged { trace: vec![1.0] }.into();
        assert_eq!(f.0, HL_ERR_NUMERICAL);
        assert!(f.1.starts_with("NewtonDiverged: "));
        let f: Failure = surface::SurfaceError::BadRadius.into();
        assert_eq!(f.0, HL_ERR_INVALID);
    }

    #[test]
    fn interior_nul_does_not_lose_the_message() {
        set_last(HL_ERR_INVALID, "a\0b");
        let m = unsafe { CStr::from_ptr(hl_last_error_message()) };
        assert_eq!(m.to_str().unwrap(), "a b");
    }

    #[test]
    fn bad_utf8_rejected() {
        let bytes = [0xffu8, 0xfe, 0];
        let mut out = ptr::null_mut();
        let st = unsafe { hl_surface_from_json(bytes.as_ptr() as *const c_char, &mut out) };
        assert_eq!(st, HL_ERR_UTF8);
        assert!(out.is_null());
    }
}
