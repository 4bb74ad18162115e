//! Frame fields of the affine spheres attached to `q_s = s z^k dz³`.
//!
//! The structure equations are integrated in the real gauge
//! `(f, e^{−φ/2}f_x, e^{−φ/2}f_y)`, where the connection is
//! `A_x dx + A_y dy` with real `3×3` coefficients. Transports are
//! composed on the right, `P' = P·A`, so `P(γ) = Φ(a)⁻¹Φ(b)`.
//!
//! Growth is tracked by a `Q·D·N` factorisation of `Pᵀ`, renormalised
//! every few steps, so that all three singular values survive even when
//! the condition number far exceeds double range.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::polygon::{arc_unipotent, regular_lifts, PolygonError};
use crate::tropical::{segment_exponents, TropicalError};
use crate::wang::{phi_flat, solve_disk, GridSpec, WangError, WangSolution};
use crate::TWO_23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("step unstable at parameter {at} after repeated halving")]
    StepUnstable { at: f64 },
    #[error("path passes within {distance} of the zero")]
    NearZero { distance: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Wang(#[from] WangError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error(transparent)]
    Tropical(#[from] TropicalError),
}

// ---------------------------------------------------------------------------
// Ţiţeica closed form

/// Eigenbasis of the flat connection, orthogonal. Column `j` belongs to
/// the eigenvalue `2^{2/3} Re(x e^{−ic_j})`, `c_j = 2π(j−1)/3`, and has
/// positive first component, which matches the orientation of the
/// regular-polygon lifts.
pub fn titeica_conjugator() -> Matrix3<f64> {
    let r = (2.0f64).sqrt();
    let n = (3.0f64).sqrt();
    let col = |c: f64| Vector3::new(1.0, r * c.cos(), r * c.sin()) / n;
    Matrix3::from_columns(&[col(-2.0 * PI / 3.0), col(0.0), col(2.0 * PI / 3.0)])
}

/// Log-eigenvalues of the flat transport over natural displacement `x`.
pub fn slot_exponents(x: Complex64) -> [f64; 3] {
    [-2.0 * PI / 3.0, 0.0, 2.0 * PI / 3.0].map(|c| TWO_23 * (x * Complex64::from_polar(1.0, -c)).re)
}

/// Flat-connection coefficients `(A_x, A_y)` of `dw³` in the real gauge.
pub fn titeica_connection() -> (Matrix3<f64>, Matrix3<f64>) {
    let a = 2f64.powf(1.0 / 6.0);
    let b = 2f64.powf(-1.0 / 3.0);
    (
        Matrix3::new(0.0, a, 0.0, a, b, 0.0, 0.0, 0.0, -b),
        Matrix3::new(0.0, 0.0, a, 0.0, 0.0, -b, a, -b, 0.0),
    )
}

/// Transport of the flat model over natural displacement `x`.
pub fn titeica_transport(x: Complex64) -> Matrix3<f64> {
    let s = titeica_conjugator();
    let d = Vector3::from(slot_exponents(x).map(f64::exp));
    s * Matrix3::from_diagonal(&d) * s.transpose()
}

// ---------------------------------------------------------------------------
// Structure equations

/// `Ψ⁻¹dΨ = U dz + V dz̄` for the frame `(f, f_z, f_z̄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureCoefficients {
    pub u: Matrix3<Complex64>,
    pub v: Matrix3<Complex64>,
}

impl StructureCoefficients {
    pub fn at(phi: f64, dz_phi: Complex64, q: Complex64) -> Self {
        let z0 = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let h = Complex64::new(phi.exp() / 2.0, 0.0);
        let qe = q * (-phi).exp();
        StructureCoefficients {
            u: Matrix3::new(z0, z0, h, one, dz_phi, z0, z0, qe, z0),
            v: Matrix3::new(z0, h, z0, z0, z0, qe.conj(), one, z0, dz_phi.conj()),
        }
    }
}

/// Change of frame `(f, f_z, f_z̄) → (f, e^{−φ/2}f_x, e^{−φ/2}f_y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthonormalGauge {
    pub c: Matrix3<Complex64>,
}

impl OrthonormalGauge {
    pub fn new(phi: f64) -> Self {
        let e = Complex64::new((-phi / 2.0).exp(), 0.0);
        let i = Complex64::new(0.0, 1.0);
        let z0 = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        OrthonormalGauge {
            c: Matrix3::new(one, z0, z0, z0, e, i * e, z0, e, -i * e),
        }
    }

    pub fn inverse(&self) -> Matrix3<Complex64> {
        let e = self.c[(1, 1)].re;
        let h = Complex64::new(0.5 / e, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let z0 = Complex64::new(0.0, 0.0);
        Matrix3::new(Complex64::new(1.0, 0.0), z0, z0, z0, h, h, z0, -i * h, i * h)
    }
}

/// Real-gauge connection coefficients `(A_x, A_y)`.
pub fn real_connection(phi: f64, dz_phi: Complex64, q: Complex64) -> (Matrix3<f64>, Matrix3<f64>) {
    connection_from(
        (phi / 2.0).exp(),
        q * (-phi).exp(),
        dz_phi,
    )
}

fn connection_from(e: f64, qe: Complex64, p: Complex64) -> (Matrix3<f64>, Matrix3<f64>) {
    (
        Matrix3::new(0.0, e, 0.0, e, qe.re, -(p.im + qe.im), 0.0, p.im - qe.im, -qe.re),
        Matrix3::new(0.0, 0.0, e, 0.0, -qe.im, -(p.re + qe.re), e, p.re - qe.re, qe.im),
    )
}

/// Conformal data along which frames are integrated.
pub trait ConformalFactor: Sync {
    fn k(&self) -> u32;
    fn s(&self) -> f64;
    /// `F = φ − φ_flat` and `dF/dr` at radius `r`.
    fn correction(&self, r: f64) -> Result<(f64, f64), FrameError>;
    fn inner_radius(&self) -> f64 {
        0.0
    }
    fn outer_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn phi_at(&self, z: Complex64) -> Result<(f64, Complex64), FrameError> {
        let r = z.norm();
        let (f, fr) = self.correction(r)?;
        let phi = phi_flat(self.k(), self.s(), r) + f;
        let mut dz = Complex64::new(0.0, 0.0);
        if self.k() > 0 {
            dz += Complex64::new(self.k() as f64 / 3.0, 0.0) / z;
        }
        if fr != 0.0 {
            dz += z.conj() / (2.0 * r) * fr;
        }
        Ok((phi, dz))
    }

    fn q_at(&self, z: Complex64) -> Complex64 {
        self.s() * z.powu(self.k())
    }
}

/// The flat metric `(2|q_s|²)^{1/3}|dz|²`; exact for `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatModel {
    pub k: u32,
    pub s: f64,
}

impl ConformalFactor for FlatModel {
    fn k(&self) -> u32 {
        self.k
    }
    fn s(&self) -> f64 {
        self.s
    }
    fn correction(&self, _r: f64) -> Result<(f64, f64), FrameError> {
        Ok((0.0, 0.0))
    }
}

impl ConformalFactor for WangSolution {
    fn k(&self) -> u32 {
        self.k
    }
    fn s(&self) -> f64 {
        self.s
    }
    fn correction(&self, r: f64) -> Result<(f64, f64), FrameError> {
        let (f, ft) = self.f_and_slope(r)?;
        Ok((f, ft / r))
    }
    fn inner_radius(&self) -> f64 {
        self.r[1]
    }
    fn outer_radius(&self) -> f64 {
        self.radius
    }
}

// ---------------------------------------------------------------------------
// Paths in the chart

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartPiece {
    Segment { from: Complex64, to: Complex64 },
    /// Counterclockwise when `theta1 > theta0`.
    Arc { radius: f64, theta0: f64, theta1: f64 },
}

impl ChartPiece {
    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            ChartPiece::Segment { from, to } => from + (to - from) * t,
            ChartPiece::Arc { radius, theta0, theta1 } => {
                Complex64::from_polar(radius, theta0 + (theta1 - theta0) * t)
            }
        }
    }

    /// `dz/dt`.
    pub fn velocity(&self, t: f64) -> Complex64 {
        match *self {
            ChartPiece::Segment { from, to } => to - from,
            ChartPiece::Arc { theta0, theta1, .. } => {
                Complex64::new(0.0, theta1 - theta0) * self.point(t)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            ChartPiece::Segment { from, to } => (to - from).norm(),
            ChartPiece::Arc { radius, theta0, theta1 } => radius * (theta1 - theta0).abs(),
        }
    }

    pub fn reversed(&self) -> ChartPiece {
        match *self {
            ChartPiece::Segment { from, to } => ChartPiece::Segment { from: to, to: from },
            ChartPiece::Arc { radius, theta0, theta1 } => ChartPiece::Arc {
                radius,
                theta0: theta1,
                theta1: theta0,
            },
        }
    }

    fn min_radius(&self) -> f64 {
        match *self {
            ChartPiece::Segment { from, to } => {
                let d = to - from;
                let t = if d.norm_sqr() == 0.0 {
                    0.0
                } else {
                    (-(from.conj() * d).re / d.norm_sqr()).clamp(0.0, 1.0)
                };
                (from + d * t).norm()
            }
            ChartPiece::Arc { radius, .. } => radius,
        }
    }

    fn max_radius(&self) -> f64 {
        match *self {
            ChartPiece::Segment { from, to } => from.norm().max(to.norm()),
            ChartPiece::Arc { radius, .. } => radius,
        }
    }
}

pub fn reverse_path(path: &[ChartPiece]) -> Vec<ChartPiece> {
    path.iter().rev().map(ChartPiece::reversed).collect()
}

// ---------------------------------------------------------------------------
// Transport with log-domain accumulation

/// `Pᵀ = Q·diag(e^{qr_log})·N` with `Q` orthogonal and `N` unit upper
/// triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTransport {
    pub log_scale: f64,
    /// `P / e^{log_scale}`, entries of modulus at most one.
    pub core: Matrix3<f64>,
    pub qr_log: [f64; 3],
    q: Matrix3<f64>,
    n: Matrix3<f64>,
    pub steps: usize,
}

impl FrameTransport {
    fn identity() -> Self {
        FrameTransport {
            log_scale: 0.0,
            core: Matrix3::identity(),
            qr_log: [0.0; 3],
            q: Matrix3::identity(),
            n: Matrix3::identity(),
            steps: 0,
        }
    }

    /// Absorb `Bᵀ` from the left, i.e. `P ← P·B`.
    fn absorb(&mut self, b: &Matrix3<f64>) {
        let qr = (b.transpose() * self.q).qr();
        let (mut q, mut r) = qr.unpack();
        for i in 0..3 {
            if r[(i, i)] < 0.0 {
                for j in 0..3 {
                    r[(i, j)] = -r[(i, j)];
                    q[(j, i)] = -q[(j, i)];
                }
            }
        }
        let d = self.qr_log;
        let mut m = Matrix3::identity();
        for i in 0..3 {
            for j in i + 1..3 {
                m[(i, j)] = r[(i, j)] / r[(i, i)] * (d[j] - d[i]).exp();
            }
        }
        self.n = m * self.n;
        for i in 0..3 {
            self.qr_log[i] += r[(i, i)].ln();
        }
        self.q = q;
    }

    fn finish(&mut self) {
        // P = Nᵀ D Qᵀ; stored as a log-scaled matrix
        let top = self.qr_log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut dn = self.n;
        for i in 0..3 {
            for j in 0..3 {
                dn[(i, j)] *= (self.qr_log[i] - top).exp();
            }
        }
        let p = (self.q * dn).transpose();
        let m = p.amax();
        self.log_scale = top + m.ln();
        self.core = p / m;
    }

    /// `log σ₁ ≥ log σ₂ ≥ log σ₃` of the transport.
    pub fn log_singular_values(&self) -> [f64; 3] {
        let d = self.qr_log;
        let n = &self.n;
        let mut l1 = [[f64::NEG_INFINITY; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if n[(i, j)] != 0.0 {
                    l1[i][j] = d[i] + n[(i, j)].abs().ln();
                }
            }
        }
        let s1 = log_norm_of(&l1, |i, j| n[(i, j)].signum());
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        let mut minor = [[0.0f64; 3]; 3];
        let mut l2 = [[f64::NEG_INFINITY; 3]; 3];
        for (a, &(i, i2)) in pairs.iter().enumerate() {
            for (b, &(j, j2)) in pairs.iter().enumerate() {
                let v = Matrix2::new(n[(i, j)], n[(i, j2)], n[(i2, j)], n[(i2, j2)]).determinant();
                minor[a][b] = v;
                if v != 0.0 {
                    l2[a][b] = d[i] + d[i2] + v.abs().ln();
                }
            }
        }
        let s12 = log_norm_of(&l2, |a, b| minor[a][b].signum());
        let total: f64 = d.iter().sum();
        [s1, s12 - s1, total - s12]
    }

    /// Log singular values of `P⁻¹`.
    pub fn inverse_log_singular_values(&self) -> [f64; 3] {
        let l = self.log_singular_values();
        [-l[2], -l[1], -l[0]]
    }

    pub fn log_det(&self) -> f64 {
        self.qr_log.iter().sum()
    }

    /// The transport itself; overflows for large growth.
    pub fn matrix(&self) -> Matrix3<f64> {
        self.core * self.log_scale.exp()
    }
}

fn log_norm_of(l: &[[f64; 3]; 3], sign: impl Fn(usize, usize) -> f64) -> f64 {
    let top = l.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = Matrix3::from_fn(|i, j| sign(i, j) * (l[i][j] - top).exp());
    top + m.singular_values().max().ln()
}

const RENORM_EVERY: usize = 10;
const MAX_HALVINGS: u32 = 8;
/// Target `h·‖A‖` per RK4 step.
const STEP_GAIN: f64 = 0.005;

fn connection_at<C: ConformalFactor + ?Sized>(cf: &C, z: Complex64) -> Result<(Matrix3<f64>, Matrix3<f64>), FrameError> {
    let (phi, dz) = cf.phi_at(z)?;
    Ok(real_connection(phi, dz, cf.q_at(z)))
}

fn generator<C: ConformalFactor + ?Sized>(cf: &C, piece: &ChartPiece, t: f64) -> Result<Matrix3<f64>, FrameError> {
    let (ax, ay) = connection_at(cf, piece.point(t))?;
    let v = piece.velocity(t);
    Ok(ax * v.re + ay * v.im)
}

fn rk4_step(a0: &Matrix3<f64>, am: &Matrix3<f64>, a1: &Matrix3<f64>, h: f64) -> Matrix3<f64> {
    let id = Matrix3::identity();
    let k1 = *a0;
    let k2 = (id + k1 * (h / 2.0)) * am;
    let k3 = (id + k2 * (h / 2.0)) * am;
    let k4 = (id + k3 * h) * a1;
    id + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn check_path<C: ConformalFactor + ?Sized>(cf: &C, path: &[ChartPiece]) -> Result<(), FrameError> {
    if path.is_empty() {
        return Err(FrameError::InvalidPath("empty path".into()));
    }
    for w in path.windows(2) {
        if (w[0].point(1.0) - w[1].point(0.0)).norm() > 1e-9 {
            return Err(FrameError::InvalidPath("pieces do not join".into()));
        }
    }
    for p in path {
        let rmin = p.min_radius();
        if (cf.k() > 0 && rmin <= cf.inner_radius()) || rmin == 0.0 && cf.k() > 0 {
            return Err(FrameError::NearZero { distance: rmin });
        }
        if p.max_radius() > cf.outer_radius() * (1.0 + 1e-12) {
            return Err(FrameError::InvalidPath("path leaves the solved disk".into()));
        }
    }
    Ok(())
}

/// RK4 transport along a chart path.
pub fn integrate_transport<C: ConformalFactor + ?Sized>(cf: &C, path: &[ChartPiece]) -> Result<FrameTransport, FrameError> {
    check_path(cf, path)?;
    let s13 = cf.s().cbrt();
    let h_cap = 0.01f64.min(0.5 / s13);
    let mut out = FrameTransport::identity();
    let mut block = Matrix3::identity();
    let mut since = 0usize;
    for piece in path {
        let len = piece.length();
        if len == 0.0 {
            continue;
        }
        let probe = [0.0, 0.5, 1.0]
            .iter()
            .map(|&t| generator(cf, piece, t).map(|a| a.norm()))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let dt_cap = (h_cap / len).min(if probe > 0.0 { STEP_GAIN / probe } else { 1.0 });
        let base = (1.0 / dt_cap).ceil().max(1.0) as usize;
        let mut halvings = 0u32;
        'retry: loop {
            let nsteps = base << halvings;
            let dt = 1.0 / nsteps as f64;
            let mut trial = out.clone();
            let mut tblock = block;
            let mut tsince = since;
            let mut a0 = generator(cf, piece, 0.0)?;
            for i in 0..nsteps {
                let t = i as f64 * dt;
                let am = generator(cf, piece, t + dt / 2.0)?;
                let a1 = generator(cf, piece, t + dt)?;
                let e = rk4_step(&a0, &am, &a1, dt);
                let grow = e.norm();
                if !grow.is_finite() || grow > 10f64.exp() {
                    if halvings == MAX_HALVINGS {
                        return Err(FrameError::StepUnstable { at: t });
                    }
                    halvings += 1;
                    continue 'retry;
                }
                tblock *= e;
                tsince += 1;
                trial.steps += 1;
                if tsince == RENORM_EVERY {
                    trial.absorb(&tblock);
                    tblock = Matrix3::identity();
                    tsince = 0;
                }
                a0 = a1;
            }
            out = trial;
            block = tblock;
            since = tsince;
            break;
        }
    }
    out.absorb(&block);
    out.finish();
    Ok(out)
}

/// Frame transport `(f, f_z, f_z̄)` integrated directly from `U, V`
/// without renormalisation. Only meaningful for moderate growth.
pub fn integrate_complex_frame<C: ConformalFactor + ?Sized>(cf: &C, path: &[ChartPiece], steps_per_piece: usize) -> Result<Matrix3<Complex64>, FrameError> {
    check_path(cf, path)?;
    let gen = |piece: &ChartPiece, t: f64| -> Result<Matrix3<Complex64>, FrameError> {
        let z = piece.point(t);
        let (phi, dz) = cf.phi_at(z)?;
        let sc = StructureCoefficients::at(phi, dz, cf.q_at(z));
        let v = piece.velocity(t);
        Ok(sc.u * v + sc.v * v.conj())
    };
    let id = Matrix3::<Complex64>::identity();
    let mut p = id;
    for piece in path {
        let dt = 1.0 / steps_per_piece as f64;
        let half = Complex64::new(dt / 2.0, 0.0);
        let full = Complex64::new(dt, 0.0);
        for i in 0..steps_per_piece {
            let t = i as f64 * dt;
            let (a0, am, a1) = (gen(piece, t)?, gen(piece, t + dt / 2.0)?, gen(piece, t + dt)?);
            let k1 = a0;
            let k2 = (id + k1 * half) * am;
            let k3 = (id + k2 * half) * am;
            let k4 = (id + k3 * full) * a1;
            p *= id + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
        }
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Arc unipotents

/// Natural coordinate `x = (3/(k+3)) s^{1/3} z^{(k+3)/3}` with the branch
/// fixed by the unwrapped angle `theta`.
fn natural_at(k: u32, s13: f64, r: f64, theta: f64) -> Complex64 {
    let e = (k as f64 + 3.0) / 3.0;
    Complex64::from_polar(s13 * r.powf(e) / e, theta * e)
}

fn rotation(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Correction `A(φ) − A(φ_flat)` along the arc at angle `theta`, rotated
/// into the natural frame and written in the eigenbasis of the flat model.
fn arc_generator<C: ConformalFactor + ?Sized>(cf: &C, radius: f64, theta: f64, sm: &Matrix3<f64>) -> Result<Matrix3<f64>, FrameError> {
    let k = cf.k();
    let s = cf.s();
    let z = Complex64::from_polar(radius, theta);
    let (f, fr) = cf.correction(radius)?;
    let phi0 = phi_flat(k, s, radius);
    let e0 = (phi0 / 2.0).exp();
    let qe0 = cf.q_at(z) * (-phi0).exp();
    let dp = Complex64::from_polar(0.5 * fr, -theta);
    let (dx, dy) = connection_from(e0 * (f / 2.0).exp_m1(), qe0 * (-f).exp_m1(), dp);
    let v = Complex64::new(0.0, 1.0) * z;
    let rot = rotation(k as f64 * theta / 3.0);
    let e = rot * (dx * v.re + dy * v.im) * rot.transpose();
    let lam = slot_exponents(natural_at(k, s.cbrt(), radius, theta));
    let mut out = sm.transpose() * e * sm;
    for i in 0..3 {
        for j in 0..3 {
            out[(i, j)] *= (lam[i] - lam[j]).exp();
        }
    }
    Ok(out)
}

/// `G_{θ0}⁻¹ G_{θ1}` along the circle of the given radius, where
/// `G_θ = Φ(z)·R(kθ/3)ᵀ·F_T(x(z))⁻¹`. Angles are chart angles, unwrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcUnipotent {
    pub frame: Matrix3<f64>,
    /// `Sᵀ·frame·S`.
    pub slots: Matrix3<f64>,
}

pub fn arc_unipotent_numeric<C: ConformalFactor + ?Sized>(cf: &C, theta0: f64, theta1: f64, radius: f64) -> Result<ArcUnipotent, FrameError> {
    check_path(cf, &[ChartPiece::Arc { radius, theta0, theta1 }])?;
    let sm = titeica_conjugator();
    let mut z = Matrix3::<f64>::identity();
    let span = theta1 - theta0;
    let done = |z: Matrix3<f64>| ArcUnipotent {
        frame: sm * z * sm.transpose(),
        slots: z,
    };
    if span == 0.0 {
        return Ok(done(z));
    }
    let dir = span.signum();
    let h_max = 1e-3 * span.abs().max(1e-3);
    let mut theta = theta0;
    let mut steps = 0usize;
    while (theta1 - theta) * dir > 0.0 {
        let k0 = arc_generator(cf, radius, theta, &sm)?;
        let mut h = h_max.min(STEP_GAIN / k0.norm().max(1e-300)).min((theta1 - theta).abs());
        if h < 1e-12 * span.abs() {
            h = 1e-12 * span.abs();
        }
        let hs = h * dir;
        let km = arc_generator(cf, radius, theta + hs / 2.0, &sm)?;
        let k1 = arc_generator(cf, radius, theta + hs, &sm)?;
        let e = rk4_step(&k0, &km, &k1, hs);
        if !e.norm().is_finite() {
            return Err(FrameError::StepUnstable { at: theta });
        }
        z *= e;
        theta += hs;
        steps += 1;
        if steps > 50_000_000 {
            return Err(FrameError::StepUnstable { at: theta });
        }
    }
    Ok(done(z))
}

/// Natural angle of a chart angle.
pub fn natural_angle(k: u32, theta: f64) -> f64 {
    theta * (k as f64 + 3.0) / 3.0
}

/// Limit of [`ArcUnipotent::slots`]: the transition `U(θ0, θ1)` between
/// the polygon bases, i.e. the inverse of [`arc_unipotent`].
pub fn arc_unipotent_target(k: u32, theta0: f64, theta1: f64) -> Result<Matrix3<f64>, FrameError> {
    let lifts = regular_lifts(k as usize + 3)?;
    Ok(arc_unipotent(&lifts, natural_angle(k, theta1), natural_angle(k, theta0))?)
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub s: f64,
    /// `s^{−1/3} log σ_j` of the holonomy.
    pub numeric: [f64; 3],
    pub target: [f64; 3],
    /// `max_j |numeric_j − target_j| / max_j |target_j|`.
    pub gap: f64,
}

/// Straight chart segment swept over `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub k: u32,
    pub from: Complex64,
    pub to: Complex64,
    pub radius: f64,
    pub grid: GridSpec,
}

/// Natural displacement of a straight chart segment that stays inside
/// one branch of `z^{(k+3)/3}`.
pub fn natural_displacement(k: u32, from: Complex64, to: Complex64) -> Complex64 {
    let e = (k as f64 + 3.0) / 3.0;
    let mut a = from.arg();
    let mut b = to.arg();
    if (b - a).abs() > PI {
        if b < a {
            b += 2.0 * PI;
        } else {
            a += 2.0 * PI;
        }
    }
    Complex64::from_polar(to.norm().powf(e) / e, b * e) - Complex64::from_polar(from.norm().powf(e) / e, a * e)
}

pub fn convergence_sweep(spec: &SweepSpec, s_list: &[f64]) -> Result<Vec<SweepRow>, FrameError> {
    let period = natural_displacement(spec.k, spec.from, spec.to);
    let target = segment_exponents(period)?.sorted.as_array();
    let path = [ChartPiece::Segment {
        from: spec.from,
        to: spec.to,
    }];
    s_list
        .par_iter()
        .map(|&s| {
            let l = if spec.k == 0 {
                integrate_transport(&FlatModel { k: 0, s }, &path)?
            } else {
                let sol = solve_disk(spec.k, s, spec.radius, spec.grid)?;
                integrate_transport(&sol, &path)?
            };
            let s13 = s.cbrt();
            let numeric = l.inverse_log_singular_values().map(|x| x / s13);
            let scale = target.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let gap = (0..3).map(|j| (numeric[j] - target[j]).abs()).fold(0.0, f64::max) / scale;
            Ok(SweepRow { s, numeric, target, gap })
        })
        .collect()
}
