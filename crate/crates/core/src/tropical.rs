//! Weyl-chamber exponents of saddle connections and geodesic paths.
//!
//! A segment with period `p` (the integral of the first cube root of the
//! differential along it) contributes the triple
//! `ν_j = -2^{2/3} Re(ω^{j-1} p)`. Path exponents are sums of the sorted
//! per-segment triples.

use std::ops::{Add, Neg};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::surface::GeodesicPath;
use crate::{omega_pow, TWO_23};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TropicalError {
    #[error("segment period is zero")]
    ZeroPeriod,
    #[error("spectral exponent requires a closed loop")]
    OpenPath,
}

/// Sorted trace-free triple `x1 >= x2 >= x3`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeylVector([f64; 3]);

impl WeylVector {
    pub const ZERO: WeylVector = WeylVector([0.0; 3]);

    /// Sort an arbitrary triple into decreasing order.
    pub fn from_unsorted(mut x: [f64; 3]) -> Self {
        x.sort_by(|a, b| b.total_cmp(a));
        WeylVector(x)
    }

    pub fn x1(&self) -> f64 {
        self.0[0]
    }
    pub fn x2(&self) -> f64 {
        self.0[1]
    }
    pub fn x3(&self) -> f64 {
        self.0[2]
    }
    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }
    pub fn trace(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `-reverse(x)`: the vector of the inverse element.
    pub fn opposite(&self) -> Self {
        WeylVector([-self.0[2], -self.0[1], -self.0[0]])
    }

    pub fn scale(&self, c: f64) -> Self {
        debug_assert!(c >= 0.0);
        WeylVector(self.0.map(|v| v * c))
    }

    /// Euclidean norm in the apartment.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &WeylVector) -> f64 {
        (0..3)
            .map(|i| (self.0[i] - other.0[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Componentwise sum. Sums of sorted triples stay sorted.
impl Add for WeylVector {
    type Output = WeylVector;
    fn add(self, rhs: WeylVector) -> WeylVector {
        WeylVector([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

impl Neg for WeylVector {
    type Output = WeylVector;
    fn neg(self) -> WeylVector {
        self.opposite()
    }
}

impl std::iter::Sum for WeylVector {
    fn sum<I: Iterator<Item = WeylVector>>(iter: I) -> WeylVector {
        iter.fold(WeylVector::ZERO, |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentExponents {
    /// `ν_j` in the chart of the period, `j = 1, 2, 3`.
    pub unsorted: [f64; 3],
    pub sorted: WeylVector,
    /// Number of indices attaining the maximum (1 or 2).
    pub multiplicity_top: u8,
}

/// Relative tolerance used to decide coincident exponents.
const TIE_TOL: f64 = 1e-12;

/// Unsorted triple `-2^{2/3} Re(ω^{j-1} p)`.
pub fn unsorted_exponents(period: Complex64) -> [f64; 3] {
    let mut nu = [0.0; 3];
    for (j, v) in nu.iter_mut().enumerate() {
        *v = -TWO_23 * (omega_pow(j as i64) * period).re;
    }
    // exact trace zero: the three values cancel analytically
    let tr = nu.iter().sum::<f64>() / 3.0;
    nu.iter_mut().for_each(|v| *v -= tr);
    nu
}

pub fn segment_exponents(period: Complex64) -> Result<SegmentExponents, TropicalError> {
    if period.norm() == 0.0 || !period.re.is_finite() || !period.im.is_finite() {
        return Err(TropicalError::ZeroPeriod);
    }
    let unsorted = unsorted_exponents(period);
    let sorted = WeylVector::from_unsorted(unsorted);
    let tol = TIE_TOL * TWO_23 * period.norm();
    let multiplicity_top = unsorted
        .iter()
        .filter(|&&v| (sorted.x1() - v).abs() <= tol)
        .count() as u8;
    Ok(SegmentExponents {
        unsorted,
        sorted,
        multiplicity_top,
    })
}

/// Sum over segments of each segment's sorted exponent triple.
pub fn path_singular_exponents(path: &GeodesicPath) -> Result<WeylVector, TropicalError> {
    path.segments()
        .iter()
        .map(|seg| segment_exponents(seg.period).map(|e| e.sorted))
        .sum::<Result<WeylVector, _>>()
}

/// Limit of `s^{-1/3} log ||Hol||` along the path.
pub fn path_norm_exponent(path: &GeodesicPath) -> Result<f64, TropicalError> {
    Ok(path_singular_exponents(path)?.x1())
}

/// Limit of `s^{-1/3} log` of the spectral radius for a closed loop.
pub fn spectral_exponent(path: &GeodesicPath) -> Result<f64, TropicalError> {
    if !path.is_closed() {
        return Err(TropicalError::OpenPath);
    }
    path_norm_exponent(path)
}

/// Per-segment rows `(ν sorted, running sum)` used by the CLI.
pub fn spectrum_rows(
    path: &GeodesicPath,
) -> Result<Vec<(SegmentExponents, WeylVector)>, TropicalError> {
    let mut acc = WeylVector::ZERO;
    path.segments()
        .iter()
        .map(|seg| {
            let e = segment_exponents(seg.period)?;
            acc = acc + e.sorted;
            Ok((e, acc))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unit_period() {
        let e = segment_exponents(c(1.0, 0.0)).unwrap();
        let a = 2f64.powf(-1.0 / 3.0);
        assert!((e.sorted.x1() - a).abs() < 1e-14);
        assert!((e.sorted.x2() - a).abs() < 1e-14);
        assert!((e.sorted.x3() + 2.0 * a).abs() < 1e-14);
        assert_eq!(e.multiplicity_top, 2);
        assert!((e.sorted.x1() - 0.79370).abs() < 1e-5);
    }

    #[test]
    fn stokes_period() {
        let e = segment_exponents(c(0.0, 1.0)).unwrap();
        let a = 3f64.sqrt() * 2f64.powf(-1.0 / 3.0);
        assert!((e.sorted.x1() - a).abs() < 1e-14);
        assert!(e.sorted.x2().abs() < 1e-14);
        assert!((e.sorted.x3() + a).abs() < 1e-14);
        assert_eq!(e.multiplicity_top, 1);
    }

    #[test]
    fn zero_period_rejected() {
        assert_eq!(segment_exponents(c(0.0, 0.0)), Err(TropicalError::ZeroPeriod));
    }

    #[test]
    fn generic_matches_quadrature() {
        // integrate Re(ω^{j-1} dz) along the segment with the midpoint rule
        let l = 1.7;
        let th = 0.4321;
        let p = Complex64::from_polar(l, th);
        let e = segment_exponents(p).unwrap();
        let n = 1000;
        for j in 0..3 {
            let w = omega_pow(j);
            let mut acc = 0.0;
            for _ in 0..n {
                acc += (w * p / n as f64).re;
            }
            assert!((e.unsorted[j as usize] + TWO_23 * acc).abs() < 1e-12);
            let closed = -TWO_23 * l * (th + 2.0 * PI * j as f64 / 3.0).cos();
            assert!((e.unsorted[j as usize] - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetries() {
        let p = Complex64::from_polar(0.8, 1.1);
        let base = segment_exponents(p).unwrap().sorted;
        let rot = segment_exponents(p * omega_pow(1)).unwrap().sorted;
        let conj = segment_exponents(p.conj()).unwrap().sorted;
        assert!(base.max_abs_diff(&rot) < 1e-14);
        assert!(base.max_abs_diff(&conj) < 1e-14);
        let rev = segment_exponents(-p).unwrap().sorted;
        assert!(rev.max_abs_diff(&base.opposite()) < 1e-14);
    }

    #[test]
    fn trace_free() {
        for i in 0..200 {
            let p = Complex64::from_polar(0.1 + i as f64 * 0.03, i as f64 * 0.377);
            let e = segment_exponents(p).unwrap();
            assert!(e.sorted.trace().abs() < 1e-12);
        }
    }

    #[test]
    fn wall_doubles_an_extreme_entry() {
        for m in 0..6 {
            let e = segment_exponents(Complex64::from_polar(1.0, m as f64 * PI / 3.0)).unwrap();
            let x = e.sorted;
            let doubled = (x.x1() - x.x2()).abs() < 1e-12 || (x.x2() - x.x3()).abs() < 1e-12;
            assert!(doubled);
            assert_eq!(e.multiplicity_top, if m % 2 == 0 { 2 } else { 1 });
        }
    }
}
