//! Regular-polygon models of zeros.
//!
//! Around a zero of order `k` the frame field is asymptotically described
//! by the vertices `r_j` and edge-line intersections `q_j` of a regular
//! `n`-gon, `n = k + 3`. Each open sector between Stokes directions
//! carries a basis of three such lifts; crossing a Stokes direction
//! replaces one vector, and the change of basis is unipotent.
//!
//! Basis convention. Natural angles are unwrapped around the zero. Sector
//! `m = floor((θ + π/6) / (π/3))`, written `m = 6a + b`, uses (indices
//! shifted by `3a`, mod `n`)
//!
//! ```text
//! b = 0: (r₋₁, r₀, r₁)   b = 1: (q₀, r₀, r₁)   b = 2: (r₂, r₀, r₁)
//! b = 3: (r₂, q₁, r₁)    b = 4: (r₂, r₃, r₁)   b = 5: (r₂, r₃, q₂)
//! ```
//!
//! Slot `j` (0-based) carries the frame eigenvalue proportional to
//! `cos(θ - 2π(j-1)/3)`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::frame::titeica_conjugator;
use crate::surface::{classify_direction, DirectionTag, GeodesicPath};
use crate::tropical::segment_exponents;
use crate::TWO_23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolygonError {
    #[error("polygon needs at least 3 sides, got {0}")]
    SideCount(usize),
    #[error("arc endpoint {0} is a Stokes direction")]
    StokesEndpoint(f64),
    #[error("invalid configuration: {0}")]
    ConfigurationInvalid(String),
    #[error("pairing entry ({row}, {col}) is not positive: {value}")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },
    #[error("ray parameter must be positive and finite")]
    BadScale,
    #[error("singular basis")]
    Singular,
}

/// Vertex lifts `r_j` and edge-intersection lifts `q_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonLifts {
    pub n: usize,
    pub r: Vec<Vector3<f64>>,
    pub q: Vec<Vector3<f64>>,
}

/// Closed-form lifts of the regular `n`-gon.
pub fn regular_lifts(n: usize) -> Result<PolygonLifts, PolygonError> {
    if n < 3 {
        return Err(PolygonError::SideCount(n));
    }
    let step = 2.0 * PI / n as f64;
    let r = (0..n)
        .map(|j| {
            let a = step * j as f64;
            Vector3::new(a.cos(), a.sin(), 1.0)
        })
        .collect();
    let q0 = Vector3::new(-step.cos() - 1.0, -step.sin(), -2.0 * step.cos());
    let q = (0..n)
        .map(|j| {
            let (s, c) = (step * j as f64).sin_cos();
            Vector3::new(c * q0.x - s * q0.y, s * q0.x + c * q0.y, q0.z)
        })
        .collect();
    Ok(PolygonLifts { n, r, q })
}

impl PolygonLifts {
    /// User-supplied lifts (testing hook for non-regular polygons).
    pub fn from_vectors(r: Vec<Vector3<f64>>, q: Vec<Vector3<f64>>) -> Result<Self, PolygonError> {
        if r.len() < 3 || r.len() != q.len() {
            return Err(PolygonError::SideCount(r.len()));
        }
        Ok(PolygonLifts { n: r.len(), r, q })
    }

    pub fn vector(&self, l: Lift) -> Vector3<f64> {
        let n = self.n as i64;
        match l {
            Lift::R(i) => self.r[i.rem_euclid(n) as usize],
            Lift::Q(i) => self.q[i.rem_euclid(n) as usize],
        }
    }

    pub fn matrix(&self, basis: [Lift; 3]) -> Matrix3<f64> {
        Matrix3::from_columns(&basis.map(|l| self.vector(l)))
    }

    /// Basis matrix at natural angle `theta`.
    pub fn basis_at(&self, theta: f64) -> Matrix3<f64> {
        self.matrix(basis_for_sector(sector_of(theta), self.n))
    }
}

/// A lift label: vertex `r_i` or edge intersection `q_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lift {
    R(i64),
    Q(i64),
}

impl Lift {
    fn reduce(self, n: i64) -> Lift {
        match self {
            Lift::R(i) => Lift::R(i.rem_euclid(n)),
            Lift::Q(i) => Lift::Q(i.rem_euclid(n)),
        }
    }
}

impl fmt::Display for Lift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lift::R(i) => write!(f, "r{i}"),
            Lift::Q(i) => write!(f, "q{i}"),
        }
    }
}

/// Sector index of a natural angle; Stokes directions are the sector
/// boundaries.
pub fn sector_of(theta: f64) -> i64 {
    ((theta + PI / 6.0) / (PI / 3.0)).floor() as i64
}

/// Basis labels for sector `m`, indices reduced mod `n`.
pub fn basis_for_sector(m: i64, n: usize) -> [Lift; 3] {
    let a = m.div_euclid(6);
    let b = m.rem_euclid(6);
    let o = 3 * a;
    let base = match b {
        0 => [Lift::R(-1), Lift::R(0), Lift::R(1)],
        1 => [Lift::Q(0), Lift::R(0), Lift::R(1)],
        2 => [Lift::R(2), Lift::R(0), Lift::R(1)],
        3 => [Lift::R(2), Lift::Q(1), Lift::R(1)],
        4 => [Lift::R(2), Lift::R(3), Lift::R(1)],
        _ => [Lift::R(2), Lift::R(3), Lift::Q(2)],
    };
    base.map(|l| {
        match l {
            Lift::R(i) => Lift::R(i + o),
            Lift::Q(i) => Lift::Q(i + o),
        }
        .reduce(n as i64)
    })
}

/// Which eigenvalue (small, middle, large) each slot carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenTag {
    S,
    M,
    L,
}

impl fmt::Display for EigenTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EigenTag::S => "s",
            EigenTag::M => "m",
            EigenTag::L => "l",
        })
    }
}

/// Slot weights `cos(θ - 2π(j-1)/3)`.
pub fn slot_weights(theta: f64) -> [f64; 3] {
    [0, 1, 2].map(|j| (theta - 2.0 * PI * (j as f64 - 1.0) / 3.0).cos())
}

pub fn eigen_order(theta: f64) -> [EigenTag; 3] {
    let w = slot_weights(theta);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
    let mut out = [EigenTag::M; 3];
    out[idx[0]] = EigenTag::S;
    out[idx[2]] = EigenTag::L;
    out
}

/// Position between consecutive special directions: half-sector `h`
/// covers natural angles `(hπ/6, (h+1)π/6)`; odd boundaries are Stokes
/// directions, even ones walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipState {
    pub n: usize,
    pub half: i64,
}

impl FlipState {
    pub fn new(n: usize) -> Result<Self, PolygonError> {
        if n < 3 {
            return Err(PolygonError::SideCount(n));
        }
        Ok(FlipState { n, half: 0 })
    }
    pub fn at_angle(n: usize, theta: f64) -> Result<Self, PolygonError> {
        let mut s = FlipState::new(n)?;
        s.half = (theta / (PI / 6.0)).floor() as i64;
        Ok(s)
    }
    /// Representative angle inside the half-sector.
    pub fn sector_angle(&self) -> f64 {
        (self.half as f64 + 0.5) * PI / 6.0
    }
    pub fn sector(&self) -> i64 {
        sector_of(self.sector_angle())
    }
    pub fn basis(&self) -> [Lift; 3] {
        basis_for_sector(self.sector(), self.n)
    }
    pub fn eigen_order(&self) -> [EigenTag; 3] {
        eigen_order(self.sector_angle())
    }
    /// Move across the next special direction (wall or Stokes).
    pub fn step(&self) -> FlipState {
        FlipState {
            n: self.n,
            half: self.half + 1,
        }
    }
}

/// Advance past the next Stokes direction; any wall crossed on the way
/// only permutes the eigenvalue order.
pub fn flip(state: FlipState) -> FlipState {
    let mut s = state.step();
    while s.sector() == state.sector() {
        s = s.step();
    }
    s
}

/// Change of basis for a single flip out of sector `m`.
pub fn flip_matrix(lifts: &PolygonLifts, m: i64) -> Result<Matrix3<f64>, PolygonError> {
    let b0 = lifts.matrix(basis_for_sector(m, lifts.n));
    let b1 = lifts.matrix(basis_for_sector(m + 1, lifts.n));
    Ok(b1.try_inverse().ok_or(PolygonError::Singular)? * b0)
}

fn check_endpoint(theta: f64) -> Result<(), PolygonError> {
    if classify_direction(theta).tag == DirectionTag::Stokes {
        Err(PolygonError::StokesEndpoint(theta))
    } else {
        Ok(())
    }
}

/// `U(θ_in, θ_out)⁻¹ = B(θ_out)⁻¹ B(θ_in)`: the product of the flip
/// matrices for every Stokes direction crossed, in crossing order. Angles
/// are natural angles unwrapped around the zero; `θ_out < θ_in` runs the
/// arc clockwise. Entries that vanish by incidence are returned as exact
/// zeros, so they stay zero against large segment factors.
pub fn arc_unipotent(lifts: &PolygonLifts, theta_in: f64, theta_out: f64) -> Result<Matrix3<f64>, PolygonError> {
    check_endpoint(theta_in)?;
    check_endpoint(theta_out)?;
    let b_in = lifts.basis_at(theta_in);
    let b_out = lifts.basis_at(theta_out);
    let mut u = b_out.try_inverse().ok_or(PolygonError::Singular)? * b_in;
    let tol = 1e-12 * u.amax();
    u.apply(|x| {
        if x.abs() < tol {
            *x = 0.0;
        }
    });
    Ok(u)
}

/// Number of Stokes directions strictly between the endpoints.
pub fn stokes_crossings(theta_in: f64, theta_out: f64) -> i64 {
    (sector_of(theta_out) - sector_of(theta_in)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Entry of `U⁻¹` pairing the largest slot at `θ_in` (column) with the
/// smallest slot at `θ_out` (row); positive for every arc of at least `π`.
pub fn check_entry_nonzero(lifts: &PolygonLifts, theta_in: f64, theta_out: f64) -> Result<PairingEntry, PolygonError> {
    let sweep = theta_out - theta_in;
    if sweep < PI - 1e-9 {
        return Err(PolygonError::ConfigurationInvalid(format!(
            "arc subtends {sweep}, less than π"
        )));
    }
    let u = arc_unipotent(lifts, theta_in, theta_out)?;
    let win = slot_weights(theta_in);
    let wout = slot_weights(theta_out);
    let col = (0..3).max_by(|&a, &b| win[a].total_cmp(&win[b])).unwrap_or(0);
    let row = (0..3).min_by(|&a, &b| wout[a].total_cmp(&wout[b])).unwrap_or(0);
    let value = u[(row, col)];
    if !(value > 0.0) {
        return Err(PolygonError::NonPositiveEntry { row, col, value });
    }
    Ok(PairingEntry { row, col, value })
}

// ---------------------------------------------------------------------------
// Log-scaled products

/// `exp(log_scale) * matrix` with `max |matrix_ij| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMatrix {
    pub log_scale: f64,
    pub matrix: Matrix3<f64>,
}

impl LogMatrix {
    pub fn identity() -> Self {
        LogMatrix {
            log_scale: 0.0,
            matrix: Matrix3::identity(),
        }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        LogMatrix {
            log_scale: 0.0,
            matrix: m,
        }
        .normalized()
    }

    /// `diag(exp(d_j))`.
    pub fn diag_exp(d: [f64; 3]) -> Self {
        let top = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        LogMatrix {
            log_scale: top,
            matrix: Matrix3::from_diagonal(&Vector3::from(d.map(|x| (x - top).exp()))),
        }
    }

    fn normalized(mut self) -> Self {
        let m = self.matrix.amax();
        if m > 0.0 && m.is_finite() {
            self.matrix /= m;
            self.log_scale += m.ln();
        }
        self
    }

    pub fn mul(&self, rhs: &LogMatrix) -> LogMatrix {
        LogMatrix {
            log_scale: self.log_scale + rhs.log_scale,
            matrix: self.matrix * rhs.matrix,
        }
        .normalized()
    }

    /// `log σ1`.
    pub fn log_norm(&self) -> f64 {
        let sv = self.matrix.singular_values();
        self.log_scale + sv.max().ln()
    }

    /// `log` of the spectral radius.
    pub fn log_spectral_radius(&self) -> f64 {
        let ev = self.matrix.complex_eigenvalues();
        let r = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.log_scale + r.ln()
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        self.matrix * self.log_scale.exp()
    }
}

/// One factor in the symbolic expression of a leading term.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Conjugation by the Ţiţeica eigenbasis (or its inverse).
    S { inverse: bool },
    /// Segment factor with the given period.
    Segment { period: Complex64 },
    /// Arc unipotent at a zero of order `k`.
    Arc { k: u32, theta_in: f64, theta_out: f64 },
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::S { inverse: false } => write!(f, "S"),
            Factor::S { inverse: true } => write!(f, "S^-1"),
            Factor::Segment { period } => write!(f, "D({:.6}{:+.6}i)", period.re, period.im),
            Factor::Arc { k, theta_in, theta_out } => {
                write!(f, "U_{k}({theta_in:.6},{theta_out:.6})^-1")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LeadingTerm {
    pub s: f64,
    pub value: LogMatrix,
    pub expression: Vec<Factor>,
    /// Some segment direction sits on a wall where the largest slot of its
    /// factor is doubled; the product then carries several top terms.
    pub wall_ambiguity: bool,
    /// Arc endpoints moved off Stokes directions.
    pub perturbed: usize,
}

impl LeadingTerm {
    pub fn log_norm(&self) -> f64 {
        self.value.log_norm()
    }
    pub fn expression_string(&self) -> String {
        self.expression.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" ")
    }
}

/// Default Stokes-endpoint perturbation, radians.
pub const ETA: f64 = 1e-3;

/// Slot exponents of a segment factor: `2^{2/3} s^{1/3} Re(p ω^{-(j-1)})`.
fn segment_slots(period: Complex64, s13: f64) -> [f64; 3] {
    [0, 1, 2].map(|j| {
        let c = 2.0 * PI * (j as f64 - 1.0) / 3.0;
        TWO_23 * s13 * (period * Complex64::from_polar(1.0, -c)).re
    })
}

struct Arc {
    k: u32,
    theta_in: f64,
    theta_out: f64,
}

/// Periods re-continued around the counterclockwise side of each zero,
/// and the arcs joining them. Stokes endpoints are nudged by `eta` so the
/// arc widens.
fn continued_arcs(path: &GeodesicPath, eta: f64) -> (Vec<Complex64>, Vec<Arc>, usize) {
    let segs = path.segments();
    let turns = path.turns();
    let mut dir = segs[0].period.arg();
    let mut periods = Vec::with_capacity(segs.len());
    for (i, seg) in segs.iter().enumerate() {
        if i > 0 {
            dir += PI + turns[i - 1].right;
        }
        periods.push(Complex64::from_polar(seg.length(), dir));
    }
    let mut perturbed = 0;
    let arcs = turns
        .iter()
        .zip(&periods)
        .map(|(t, p)| {
            let mut theta_in = p.arg() + PI;
            let mut theta_out = theta_in + t.right;
            if classify_direction(theta_in).tag == DirectionTag::Stokes {
                theta_in -= eta;
                perturbed += 1;
            }
            if classify_direction(theta_out).tag == DirectionTag::Stokes {
                theta_out += eta;
                perturbed += 1;
            }
            Arc {
                k: t.order,
                theta_in,
                theta_out,
            }
        })
        .collect();
    (periods, arcs, perturbed)
}

/// Product `D(p_n)⁻¹·U_{n−1}⁻¹·…·U_1⁻¹·D(p_1)⁻¹` in the frame basis, with
/// `D(p) = diag(exp(slots(p)))` and `U_i⁻¹` the arc unipotent sweeping
/// counterclockwise from the reversed incoming ray to the outgoing ray.
fn transport(path: &GeodesicPath, s: f64, eta: f64) -> Result<LeadingTerm, PolygonError> {
    let s13 = s.cbrt();
    let (periods, arcs, perturbed) = continued_arcs(path, eta);
    let mut value = LogMatrix::identity();
    let mut expression = Vec::new();
    let mut wall_ambiguity = false;
    for (i, &p) in periods.iter().enumerate().rev() {
        value = value.mul(&LogMatrix::diag_exp(segment_slots(-p, s13)));
        expression.push(Factor::Segment { period: -p });
        let e = segment_exponents(p).map_err(|_| PolygonError::ConfigurationInvalid("zero period".into()))?;
        if e.multiplicity_top > 1 {
            wall_ambiguity = true;
        }
        if i > 0 {
            let arc = &arcs[i - 1];
            let lifts = regular_lifts(arc.k as usize + 3)?;
            let u = arc_unipotent(&lifts, arc.theta_in, arc.theta_out)?;
            value = value.mul(&LogMatrix::from_matrix(u));
            expression.push(Factor::Arc {
                k: arc.k,
                theta_in: arc.theta_in,
                theta_out: arc.theta_out,
            });
        }
    }
    Ok(LeadingTerm {
        s,
        value,
        expression,
        wall_ambiguity,
        perturbed,
    })
}

/// Leading-order holonomy `A(s)` of a geodesic path, in the real
/// orthonormal frame: the transport product conjugated by `S`.
/// For a single segment this is exactly the Ţiţeica transport.
pub fn leading_term(path: &GeodesicPath, s: f64) -> Result<LeadingTerm, PolygonError> {
    leading_term_with(path, s, ETA)
}

pub fn leading_term_with(path: &GeodesicPath, s: f64, eta: f64) -> Result<LeadingTerm, PolygonError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(PolygonError::BadScale);
    }
    let mut t = transport(path, s, eta)?;
    let sm = titeica_conjugator();
    let st = sm.transpose();
    t.value = LogMatrix::from_matrix(sm)
        .mul(&t.value)
        .mul(&LogMatrix::from_matrix(st));
    t.expression.insert(0, Factor::S { inverse: false });
    t.expression.push(Factor::S { inverse: true });
    Ok(t)
}

/// Max-plus evaluation of the transport: the largest achievable
/// `Σ slot exponents` over index sequences through nonzero arc entries,
/// per unit `s^{1/3}`. Equals the top exponent when no cancellation occurs.
pub fn tropical_top_exponent(path: &GeodesicPath) -> Result<f64, PolygonError> {
    let (periods, arcs, _) = continued_arcs(path, ETA);
    let last = periods.len() - 1;
    let mut best = segment_slots(-periods[last], 1.0);
    for i in (0..last).rev() {
        let arc = &arcs[i];
        let lifts = regular_lifts(arc.k as usize + 3)?;
        let u = arc_unipotent(&lifts, arc.theta_in, arc.theta_out)?;
        let w = segment_slots(-periods[i], 1.0);
        let mut next = [f64::NEG_INFINITY; 3];
        for (col, nx) in next.iter_mut().enumerate() {
            for (row, &b) in best.iter().enumerate() {
                if u[(row, col)].abs() > 1e-9 {
                    *nx = nx.max(b);
                }
            }
            *nx += w[col];
        }
        best = next;
    }
    Ok(best.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{SaddleConnection, Turn};
    use crate::tropical::path_norm_exponent;
    use approx::assert_abs_diff_eq;

    fn det(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> f64 {
        Matrix3::from_columns(&[a, b, c]).determinant()
    }

    #[test]
    fn small_polygons() {
        let l = regular_lifts(3).unwrap();
        assert_abs_diff_eq!(l.r[0], Vector3::new(1.0, 0.0, 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(l.q[0], Vector3::new(-0.5, -(3f64.sqrt()) / 2.0, 1.0), epsilon = 1e-15);
        let l = regular_lifts(4).unwrap();
        assert_abs_diff_eq!(l.q[0], Vector3::new(-1.0, -1.0, 0.0), epsilon = 1e-15);
        assert_eq!(regular_lifts(2), Err(PolygonError::SideCount(2)));
    }

    #[test]
    fn incidences() {
        for n in 3..=12 {
            let l = regular_lifts(n).unwrap();
            let ni = n as i64;
            let r = |i: i64| l.r[i.rem_euclid(ni) as usize];
            let q = |i: i64| l.q[i.rem_euclid(ni) as usize];
            for i in 0..ni {
                assert!(det(r(i - 1), r(i), q(i)).abs() < 1e-10);
                assert!(det(r(i + 1), r(i + 2), q(i)).abs() < 1e-10);
                for j in 0..ni {
                    let d = det(r(i), r(i + 1), r(j)).abs();
                    let on = j == i || j == (i + 1).rem_euclid(ni);
                    assert_eq!(d < 1e-10, on, "n={n} i={i} j={j}");
                    if !on {
                        assert!(det(r(i), r(i + 1), r(j)) > 0.0);
                    }
                    let d = det(r(i), r(i + 1), q(j)).abs();
                    let on = j == (i - 1).rem_euclid(ni) || j == (i + 1).rem_euclid(ni);
                    if n > 3 {
                        assert_eq!(d < 1e-10, on, "n={n} i={i} j={j} q");
                    }
                }
            }
        }
    }

    #[test]
    fn scheme_arrows() {
        let s0 = FlipState::new(5).unwrap();
        assert_eq!(s0.basis(), [Lift::R(4), Lift::R(0), Lift::R(1)]);
        let s1 = flip(s0);
        assert_eq!(s1.basis(), [Lift::Q(0), Lift::R(0), Lift::R(1)]);
        let s2 = flip(s1);
        assert_eq!(s2.basis(), [Lift::R(2), Lift::R(0), Lift::R(1)]);
        let mut s = FlipState::new(7).unwrap();
        for _ in 0..5 {
            s = flip(s);
        }
        assert_eq!(s.basis(), [Lift::R(2), Lift::R(3), Lift::Q(2)]);
        s = flip(s);
        assert_eq!(s.basis(), [Lift::R(2), Lift::R(3), Lift::R(4)]);
        assert_eq!(flip(s).basis(), [Lift::Q(3), Lift::R(3), Lift::R(4)]);
    }

    #[test]
    fn flips_are_unipotent_and_bases_positive() {
        for n in 3..=12 {
            let l = regular_lifts(n).unwrap();
            for m in -12..(4 * n as i64) {
                let u = flip_matrix(&l, m).unwrap();
                let e = u - Matrix3::identity();
                assert!((e * e * e).amax() < 1e-9);
                assert!((e * e).amax() < 1e-9);
                let off = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .filter(|&(i, j)| i != j && u[(i, j)].abs() > 1e-12)
                    .count();
                assert!(off <= 1, "n={n} m={m}");
                assert!(l.matrix(basis_for_sector(m, n)).determinant() > 0.0);
            }
        }
    }

    #[test]
    fn one_stokes_ray_gives_one_entry() {
        let l = regular_lifts(5).unwrap();
        let u = arc_unipotent(&l, 0.1, 0.1 + PI / 3.0).unwrap();
        let off = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && u[(i, j)].abs() > 1e-12)
            .count();
        assert_eq!(off, 1);
        assert_abs_diff_eq!(arc_unipotent(&l, 0.1, 0.2).unwrap(), Matrix3::identity(), epsilon = 1e-14);
        assert!(matches!(arc_unipotent(&l, PI / 6.0, 1.0), Err(PolygonError::StokesEndpoint(_))));
    }

    #[test]
    fn full_turn_relabels_slots() {
        // a full turn about the zero returns the same lifts, with slots
        // permuted by the rotation of the natural chart
        for n in 3..=9 {
            let l = regular_lifts(n).unwrap();
            let th = 0.05;
            let u = arc_unipotent(&l, th, th + 2.0 * PI * n as f64 / 3.0).unwrap();
            for i in 0..3 {
                assert_eq!(u.row(i).iter().filter(|x| **x != 0.0).count(), 1);
                assert_eq!(u.column(i).iter().filter(|x| **x != 0.0).count(), 1);
            }
            assert_abs_diff_eq!(u.map(f64::abs).sum(), 3.0, epsilon = 1e-9);
            let id = (u - Matrix3::identity()).amax() < 1e-9;
            assert_eq!(id, n % 3 == 0, "n = {n}");
        }
    }

    #[test]
    fn pairing_entries() {
        let l = regular_lifts(6).unwrap();
        let e = check_entry_nonzero(&l, 0.05, 0.05 + PI).unwrap();
        assert!(e.value > 0.0);
        let l3 = regular_lifts(3).unwrap();
        let e = check_entry_nonzero(&l3, 0.1, 0.1 + PI + 0.2).unwrap();
        assert_eq!(e.row, e.col);
        assert!(matches!(check_entry_nonzero(&l3, 0.1, 2.0), Err(PolygonError::ConfigurationInvalid(_))));
        // Stokes insensitivity: moving the outgoing end across one more
        // Stokes direction keeps the pairing entry
        let l7 = regular_lifts(7).unwrap();
        let a = check_entry_nonzero(&l7, 0.1, 0.1 + 3.4).unwrap();
        let b = check_entry_nonzero(&l7, 0.1, 0.1 + 3.4 + PI / 3.0).unwrap();
        assert!(a.value > 0.0 && b.value > 0.0);
    }

    #[test]
    fn random_turns_positive() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let n = rng.gen_range(3..=12);
            let l = regular_lifts(n).unwrap();
            let total = 2.0 * PI * n as f64 / 3.0;
            let th = rng.gen_range(-10.0..10.0);
            let tau = rng.gen_range(PI..(total - PI).max(PI + 1e-12));
            if classify_direction(th).tag == DirectionTag::Stokes || classify_direction(th + tau).tag == DirectionTag::Stokes {
                continue;
            }
            let e = check_entry_nonzero(&l, th, th + tau).unwrap();
            assert!(e.value > 0.5, "{e:?}");
        }
    }

    #[test]
    fn eigen_order_changes_only_at_walls() {
        let mut s = FlipState::at_angle(4, 0.01).unwrap();
        for _ in 0..24 {
            let next = s.step();
            let boundary = (s.half + 1) as f64 * PI / 6.0;
            let stokes = classify_direction(boundary).tag == DirectionTag::Stokes;
            if stokes {
                assert_eq!(s.eigen_order(), next.eigen_order());
                assert_ne!(s.basis(), next.basis());
            } else {
                assert_ne!(s.eigen_order(), next.eigen_order());
                assert_eq!(s.basis(), next.basis());
            }
            s = next;
        }
    }

    #[test]
    fn single_segment_is_titeica() {
        let p = Complex64::from_polar(0.7, 0.3);
        let path = GeodesicPath::single(SaddleConnection::new(0, 1, p).unwrap());
        let s = 8.0;
        let a = leading_term(&path, s).unwrap().value.to_matrix();
        let want = crate::frame::titeica_transport(-p * s.cbrt());
        assert!((a - want).amax() < 1e-10 * want.amax());
    }

    #[test]
    fn leading_term_matches_tropical_growth() {
        // two segments through a k = 1 zero, generic directions
        let turn = Turn::with_left(PI + 0.4, 1);
        let path = GeodesicPath::from_turns(&[0, 1, 2], Complex64::from_polar(1.0, 0.2), &[1.0, 0.8], &[turn], false).unwrap();
        let want = path_norm_exponent(&path).unwrap();
        let t1 = leading_term(&path, 1e9).unwrap();
        let t2 = leading_term(&path, 8e9).unwrap();
        let slope = (t2.log_norm() - t1.log_norm()) / (8e9f64.cbrt() - 1e9f64.cbrt());
        assert!((slope - want).abs() < 1e-6, "slope {slope} want {want}");
        let top = tropical_top_exponent(&path).unwrap();
        assert!((top - want).abs() < 1e-12, "top {top} want {want}");
    }

    #[test]
    fn random_geodesics_reach_tropical_norm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let nseg = rng.gen_range(2..5);
            let turns: Vec<Turn> = (0..nseg - 1)
                .map(|_| {
                    let k = rng.gen_range(1..4u32);
                    let total = 2.0 * PI * (k as f64 + 3.0) / 3.0;
                    Turn::with_left(rng.gen_range(PI + 0.01..total - PI - 0.01), k)
                })
                .collect();
            let lengths: Vec<f64> = (0..nseg).map(|_| rng.gen_range(0.2..1.5)).collect();
            let zeros: Vec<usize> = (0..=nseg).collect();
            let p0 = Complex64::from_polar(lengths[0], rng.gen_range(0.0..2.0 * PI));
            let path = GeodesicPath::from_turns(&zeros, p0, &lengths, &turns, false).unwrap();
            let want = path_norm_exponent(&path).unwrap();
            let top = tropical_top_exponent(&path).unwrap();
            assert!((top - want).abs() < 1e-9, "top {top} want {want}");
            let a = leading_term(&path, 1e12).unwrap().log_norm();
            let b = leading_term(&path, 8e12).unwrap().log_norm();
            assert!(((b - a) / 1e4 - want).abs() < 1e-4, "slope {} want {want}", (b - a) / 1e4);
        }
    }
}
