use hitchin_limits::building::{self, vector_distance};
use hitchin_limits::frame::{self, ChartPiece, FlatModel};
use hitchin_limits::surface::{self, CubicSurface, GeodesicPath, SaddleConnection};
use hitchin_limits::tropical;
use hitchin_limits::trigroup;
use hitchin_limits::Complex64;

#[test]
fn disk_json_round_trip_validates() {
    for k in 0..4 {
        let s = surface::build_polynomial_disk(k, 1.5).unwrap();
        let t = CubicSurface::from_json(&s.to_json()).unwrap();
        assert!(surface::validate(&t).is_empty());
        assert_eq!(t.to_json(), s.to_json());
    }
}

#[test]
fn flat_transport_distance_is_the_segment_vector() {
    for (re, im) in [(1.0, 0.0), (0.3, 0.8), (-0.5, 0.2), (0.1, -1.1)] {
        let x = Complex64::new(re, im);
        // transport is the inverse of the holonomy along the segment
        let v = vector_distance(&frame::titeica_transport(x)).unwrap();
        let e = tropical::segment_exponents(x).unwrap().sorted.opposite();
        assert!(v.max_abs_diff(&e) < 1e-12, "{v:?} {e:?}");
    }
}

#[test]
fn numeric_flat_transport_recovers_exponents() {
    let s = 200.0;
    let path = [ChartPiece::Segment {
        from: Complex64::new(0.1, 0.1),
        to: Complex64::new(0.7, -0.2),
    }];
    let l = frame::integrate_transport(&FlatModel { k: 0, s }, &path).unwrap();
    let x = (path[0].point(1.0) - path[0].point(0.0)) * s.cbrt();
    let target = tropical::segment_exponents(x).unwrap().sorted.as_array();
    let mut got = l.inverse_log_singular_values();
    got.sort_by(|a, b| b.total_cmp(a));
    for j in 0..3 {
        assert!((got[j] - target[j]).abs() < 1e-8 * s.cbrt(), "{got:?} {target:?}");
    }
}

#[test]
fn path_file_round_trip_keeps_spectrum() {
    let o = trigroup::build_orbifold(3, 3, 4).unwrap();
    let classes = trigroup::closed_geodesics(&o.surface, 4.0, 6).unwrap();
    assert!(!classes.is_empty());
    for c in &classes {
        let back = GeodesicPath::from_json(&c.to_json(), Some(&o.surface)).unwrap();
        assert_eq!(
            tropical::path_singular_exponents(&back).unwrap(),
            tropical::path_singular_exponents(c).unwrap()
        );
        assert!(building::weak_convexity_check(c));
    }
}

#[test]
fn rotated_orbifold_still_validates() {
    let o = trigroup::build_orbifold(3, 3, 4).unwrap();
    for th in trigroup::theta_grid(7) {
        assert!(surface::validate(&trigroup::rotate_differential(&o.surface, th)).is_empty());
    }
}

#[test]
fn reversal_opposes_the_vector() {
    let seg = SaddleConnection::new(0, 1, Complex64::new(0.4, 1.3)).unwrap();
    let p = GeodesicPath::single(seg);
    let a = tropical::path_singular_exponents(&p).unwrap();
    let b = tropical::path_singular_exponents(&p.reversed()).unwrap();
    assert!(a.opposite().max_abs_diff(&b) < 1e-14);
    assert!(building::path_vector_distance(&p).unwrap().max_abs_diff(&a) < 1e-12);
}
