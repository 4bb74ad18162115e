//! Asymptotic holonomy of SL(3,R) Hitchin representations along rays of
//! cubic differentials.
//!
//! The crate has two halves. The tropical half ([`tropical`], [`polygon`],
//! [`building`], [`trigroup`]) evaluates closed-form limits from flat
//! cone geometry ([`surface`]). The numerical half ([`wang`], [`frame`])
//! solves Wang's equation on model disks and integrates the frame field so
//! the limits can be checked against honest finite-`s` data.

pub mod building;
pub mod cli;
pub mod frame;
pub mod polygon;
pub mod surface;
pub mod tropical;
pub mod trigroup;
pub mod wang;

pub use num_complex::Complex64;

/// Primitive cube root of unity `e^{2πi/3}`.
pub fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// `2^{2/3}`, the normalisation constant in every exponent formula.
pub const TWO_23: f64 = 1.587_401_051_968_199_5;

/// Integer power of `omega()` computed from exact table values.
pub fn omega_pow(m: i64) -> Complex64 {
    let h = 3f64.sqrt() / 2.0;
    match m.rem_euclid(3) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(-0.5, h),
        _ => Complex64::new(-0.5, -h),
    }
}

/// Reduce an angle into `[0, 2π)`.
pub fn wrap_2pi(a: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let r = a.rem_euclid(t);
    if r >= t {
        0.0
    } else {
        r
    }
}
