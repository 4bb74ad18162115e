use std::ffi::{CStr, CString};
use std::ptr;

use hitchin_limits_ffi::*;

fn message() -> String {
    unsafe { CStr::from_ptr(hl_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn disk_round_trips_through_json() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(hl_surface_polynomial_disk(2, 1.0, &mut s), HL_OK);
        let mut n = usize::MAX;
        assert_eq!(hl_surface_validate(s, &mut n), HL_OK);
        assert_eq!(n, 0);
        let mut json = ptr::null_mut();
        assert_eq!(hl_surface_to_json(s, &mut json), HL_OK);
        let mut t = ptr::null_mut();
        assert_eq!(hl_surface_from_json(json, &mut t), HL_OK);
        let (mut a, mut b) = (0i64, 1i64);
        assert_eq!(hl_surface_euler_characteristic(s, &mut a), HL_OK);
        assert_eq!(hl_surface_euler_characteristic(t, &mut b), HL_OK);
        assert_eq!(a, b);
        hl_string_free(json);
        hl_surface_free(s);
        hl_surface_free(t);
    }
}

#[test]
fn orbifold_cover_is_genus_two() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(hl_surface_triangle_orbifold(3, 3, 4, &mut s), HL_OK);
        let mut x = 0i64;
        assert_eq!(hl_surface_euler_characteristic(s, &mut x), HL_OK);
        assert_eq!(x, -2);
        hl_surface_free(s);
    }
}

#[test]
fn errors_set_code_and_message() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(hl_surface_polynomial_disk(-1, 1.0, &mut s), HL_ERR_INVALID);
        assert!(s.is_null());
        assert_eq!(hl_last_error_code(), HL_ERR_INVALID);
        assert!(message().starts_with("NegativeOrder"), "{}", message());
        assert_eq!(hl_surface_polynomial_disk(0, 1.0, ptr::null_mut()), HL_ERR_NULL);
        let bad = CString::new("{not json").unwrap();
        assert_eq!(hl_surface_from_json(bad.as_ptr(), &mut s), HL_ERR_INVALID);
        assert_eq!(hl_segment_exponents(0.0, 0.0, [0.0; 3].as_mut_ptr()), HL_ERR_INVALID);
        let mut ok = [0.0; 3];
        assert_eq!(hl_segment_exponents(1.0, 0.0, ok.as_mut_ptr()), HL_OK);
        assert!(message().is_empty());
        assert_eq!(hl_last_error_code(), HL_OK);
    }
}

#[test]
fn unit_segment_exponents() {
    let mut v = [0.0; 3];
    assert_eq!(unsafe { hl_segment_exponents(1.0, 0.0, v.as_mut_ptr()) }, HL_OK);
    let a = 2f64.powf(-1.0 / 3.0);
    assert!((v[0] - a).abs() < 1e-14 && (v[1] - a).abs() < 1e-14 && (v[2] + 2.0 * a).abs() < 1e-14);
}

#[test]
fn path_exponents_and_convexity() {
    let json = CString::new(r#"{"segments":[{"start":0,"end":1,"period":[1.0,0.5]}],"closed":false}"#).unwrap();
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(hl_path_from_json(json.as_ptr(), ptr::null(), &mut p), HL_OK);
        let mut v = [0.0; 3];
        assert_eq!(hl_path_singular_exponents(p, v.as_mut_ptr()), HL_OK);
        let mut seg = [0.0; 3];
        assert_eq!(hl_segment_exponents(1.0, 0.5, seg.as_mut_ptr()), HL_OK);
        assert_eq!(v, seg);
        let mut flag = -1;
        assert_eq!(hl_path_weak_convexity(p, &mut flag), HL_OK);
        assert_eq!(flag, 1);
        let mut x = 0.0;
        assert_eq!(hl_path_spectral_exponent(p, &mut x), HL_ERR_INVALID);
        hl_path_free(p);
    }
}

#[test]
fn unipotent_is_unipotent() {
    let mut u = [0.0; 9];
    assert_eq!(unsafe { hl_polygon_arc_unipotent(5, 0.1, 1.0, u.as_mut_ptr()) }, HL_OK);
    let m = nalgebra::Matrix3::from_row_slice(&u);
    let n = m - nalgebra::Matrix3::identity();
    assert!((n * n * n).amax() < 1e-9);
    assert!((m.determinant() - 1.0).abs() < 1e-9);
}

#[test]
fn vector_distance_of_diagonal() {
    let m = [4.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5];
    let mut v = [0.0; 3];
    assert_eq!(unsafe { hl_building_vector_distance(m.as_ptr(), v.as_mut_ptr()) }, HL_OK);
    let l = 2f64.ln();
    assert!((v[0] - 2.0 * l).abs() < 1e-12 && (v[1] + l).abs() < 1e-12 && (v[2] + l).abs() < 1e-12);
}

#[test]
fn wang_solution_above_flat_bound() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(hl_wang_solve(1, 100.0, 1.0, 400, 4, &mut w), HL_OK);
        let mut flag = 0;
        assert_eq!(hl_wang_lower_bound_holds(w, &mut flag), HL_OK);
        assert_eq!(flag, 1);
        let mut phi = 0.0;
        assert_eq!(hl_wang_phi_at(w, 0.3, 0.2, &mut phi), HL_OK);
        let flat = (2f64.cbrt() * (100.0 * 0.13f64.sqrt()).powf(2.0 / 3.0)).ln();
        assert!(phi > flat);
        assert_eq!(hl_wang_phi_at(w, 2.0, 0.0, &mut phi), HL_ERR_INVALID);
        hl_wang_free(w);
        assert_eq!(hl_wang_solve(1, -1.0, 1.0, 400, 4, &mut w), HL_ERR_INVALID);
    }
}

#[test]
fn boundary_probe_positive() {
    let mut d = 0.0;
    assert_eq!(unsafe { hl_trigroup_boundary_probe(3, 3, 4, 10.0, 6, 12, &mut d) }, HL_OK);
    assert!(d > 0.0);
    // the hexagonal torus has a half-turn symmetry swapping the family
    assert_eq!(unsafe { hl_trigroup_boundary_probe(3, 3, 3, 10.0, 6, 12, &mut d) }, HL_OK);
    assert!(d < 1e-12);
}

#[test]
fn free_accepts_null() {
    unsafe {
        hl_surface_free(ptr::null_mut());
        hl_path_free(ptr::null_mut());
        hl_wang_free(ptr::null_mut());
        hl_string_free(ptr::null_mut());
    }
}
