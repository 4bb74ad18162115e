//! Wang's equation `Δφ = 2e^φ − 4e^{−2φ}|q_s|²` on the model disk
//! `q_s = s z^k dz³`, `|z| ≤ R`, with Dirichlet data equal to the flat
//! solution `(1/3)log(2|q_s|²)`.
//!
//! The unknown is the error `F = φ − (1/3)log(2|q_s|²)`. Both the equation
//! and the boundary data are invariant under rotation, so Newton iterates
//! started from the radial supersolution stay radial; the linear solves
//! are therefore tridiagonal in `t = log r`. The residual is still
//! evaluated with the full five-point polar stencil.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WangError {
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("Newton iteration diverged; residual trace {trace:?}")]
    NewtonDiverged { trace: Vec<f64> },
    #[error("grid too coarse: iterate left the sub/supersolution envelope at node {node}")]
    GridTooCoarse { node: usize },
    #[error("point outside the solved disk: |z| = {0}")]
    OutsideDisk(f64),
}

/// Radial grid: geometric spacing (ratio `ratio`) from `r_min_frac * R`,
/// capped at a uniform spacing chosen so that there are about `nr` nodes.
/// Angular nodes: `ntheta` per sector of angle `2π/(k+3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nr: usize,
    pub ntheta: usize,
    pub ratio: f64,
    pub r_min_frac: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nr: 2000,
            ntheta: 8,
            ratio: 1.05,
            r_min_frac: 1e-7,
        }
    }
}

impl GridSpec {
    pub fn with_nr(nr: usize) -> Self {
        GridSpec {
            nr,
            ..Default::default()
        }
    }
}

fn nodes_for(r_min: f64, radius: f64, ratio: f64, h_max: f64) -> Vec<f64> {
    let mut r = vec![r_min];
    loop {
        let cur = *r.last().unwrap();
        let step = ((ratio - 1.0) * cur).min(h_max);
        let next = cur + step;
        if next >= radius - 0.3 * step {
            break;
        }
        r.push(next);
    }
    r.push(radius);
    r
}

fn radial_nodes(spec: &GridSpec, radius: f64) -> Result<Vec<f64>, WangError> {
    let r_min = spec.r_min_frac * radius;
    let geometric = nodes_for(r_min, radius, spec.ratio, f64::INFINITY).len();
    if spec.nr <= geometric {
        return Ok(nodes_for(r_min, radius, spec.ratio, f64::INFINITY));
    }
    // bisection on the spacing cap
    let (mut lo, mut hi) = (radius * 1e-9, radius);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if nodes_for(r_min, radius, spec.ratio, mid).len() > spec.nr {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-12 {
            break;
        }
    }
    Ok(nodes_for(r_min, radius, spec.ratio, hi))
}

/// Solved conformal factor on the polar grid.
#[derive(Debug, Clone)]
pub struct WangSolution {
    pub k: u32,
    pub s: f64,
    pub radius: f64,
    /// Radial nodes, increasing, last equal to `radius`.
    pub r: Vec<f64>,
    /// Angular nodes in `[0, 2π)`.
    pub theta: Vec<f64>,
    /// `F = φ − φ_flat` at the radial nodes (the solution is radial).
    pub f: Vec<f64>,
    pub residual_norm: f64,
    /// Residual max-norm after each damped Newton step.
    pub newton_trace: Vec<f64>,
    spline: Spline,
}

fn forcing(k: u32, s: f64, t: f64) -> f64 {
    // r² · 2e^{φ_flat}
    2.0 * 2f64.cbrt() * s.powf(2.0 / 3.0) * ((2.0 + 2.0 * k as f64 / 3.0) * t).exp()
}

fn nonlinear(f: f64) -> f64 {
    // e^F − e^{−2F}, accurate for small F
    f.exp_m1() - (-2.0 * f).exp_m1()
}

fn nonlinear_d(f: f64) -> f64 {
    f.exp() + 2.0 * (-2.0 * f).exp()
}

/// Flat solution `(1/3)log(2 s² r^{2k})`.
pub fn phi_flat(k: u32, s: f64, r: f64) -> f64 {
    let c = (2.0 * s * s).ln() / 3.0;
    if k == 0 {
        c
    } else {
        c + 2.0 * k as f64 / 3.0 * r.ln()
    }
}

struct Radial<'a> {
    t: &'a [f64],
    g: Vec<f64>,
    slope_in: f64,
}

/// Radial second difference at node `i` and its diagonal weight.
fn radial_lap(t: &[f64], f: &[f64], slope_in: f64, i: usize) -> (f64, f64) {
    if i == 0 {
        let h = t[1] - t[0];
        (2.0 * (f[1] - f[0] - h * slope_in) / (h * h), 2.0 / (h * h))
    } else {
        let hm = t[i] - t[i - 1];
        let hp = t[i + 1] - t[i];
        (
            2.0 * ((f[i + 1] - f[i]) / hp - (f[i] - f[i - 1]) / hm) / (hp + hm),
            2.0 / (hp * hm),
        )
    }
}

impl Radial<'_> {
    /// Residual at each free node divided by the Jacobian diagonal, i.e.
    /// measured in units of `F`.
    /// Raw residual and its max-norm after scaling.
    fn residual(&self, f: &[f64]) -> (Vec<f64>, f64) {
        let n = self.t.len();
        let mut out = vec![0.0; n];
        let mut scaled: f64 = 0.0;
        for i in 0..n - 1 {
            let (lap, d) = radial_lap(self.t, f, self.slope_in, i);
            out[i] = lap - self.g[i] * nonlinear(f[i]);
            scaled = scaled.max((out[i] / (d + self.g[i] * nonlinear_d(f[i]))).abs());
        }
        (out, scaled)
    }

    /// Solve `J δ = rhs` for the Newton Jacobian at `f` (Thomas algorithm).
    fn solve(&self, f: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = self.t.len() - 1;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            let gd = self.g[i] * nonlinear_d(f[i]);
            if i == 0 {
                let h = self.t[1] - self.t[0];
                c[0] = 2.0 / (h * h);
                b[0] = -c[0] - gd;
            } else {
                let hm = self.t[i] - self.t[i - 1];
                let hp = self.t[i + 1] - self.t[i];
                a[i] = 2.0 / (hm * (hp + hm));
                c[i] = 2.0 / (hp * (hp + hm));
                b[i] = -(a[i] + c[i]) - gd;
            }
        }
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c[0] / b[0];
        dp[0] = rhs[0] / b[0];
        for i in 1..n {
            let m = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / m;
            dp[i] = (rhs[i] - a[i] * dp[i - 1]) / m;
        }
        let mut x = vec![0.0; n + 1];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub const RESIDUAL_TOL: f64 = 1e-10;

/// Damped Newton solve of the model disk problem.
pub fn solve_disk(k: u32, s: f64, radius: f64, grid: GridSpec) -> Result<WangSolution, WangError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(WangError::BadParameter("s must be positive".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(WangError::BadParameter("radius must be positive".into()));
    }
    if grid.nr < 8 || grid.ntheta == 0 || !(grid.ratio > 1.0) || !(grid.r_min_frac > 0.0 && grid.r_min_frac < 1.0) {
        return Err(WangError::BadParameter("grid specification".into()));
    }
    let r = radial_nodes(&grid, radius)?;
    let t: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let n = t.len();
    let radial = Radial {
        t: &t,
        g: t.iter().map(|&ti| forcing(k, s, ti)).collect(),
        // φ_t = 0 at the inner node, i.e. F_t = −2k/3
        slope_in: -2.0 * k as f64 / 3.0,
    };
    // supersolution: φ constant equal to its boundary value
    let upper: Vec<f64> = t.iter().map(|&ti| 2.0 * k as f64 / 3.0 * (radius.ln() - ti)).collect();
    let mut f = upper.clone();
    let (mut res, mut norm) = radial.residual(&f);
    let mut raw = max_abs(&res);
    let mut trace = vec![norm];
    let envelope_tol = |i: usize| 1e-9 * (1.0 + upper[i]);
    for _ in 0..200 {
        if norm <= RESIDUAL_TOL {
            break;
        }
        let rhs: Vec<f64> = res.iter().take(n - 1).map(|x| -x).collect();
        let delta = radial.solve(&f, &rhs);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = f.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let inside = trial
                .iter()
                .enumerate()
                .all(|(i, &x)| x >= -envelope_tol(i) && x <= upper[i] + envelope_tol(i));
            if inside {
                let (tr, tn) = radial.residual(&trial);
                let traw = max_abs(&tr);
                if traw <= (1.0 - 1e-4 * lambda) * raw || tn <= RESIDUAL_TOL {
                    f = trial;
                    res = tr;
                    raw = traw;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        trace.push(norm);
        if !accepted {
            if let Some(node) = f.iter().zip(&delta).enumerate().position(|(i, (a, d))| {
                let x = a + d;
                x < -envelope_tol(i) || x > upper[i] + envelope_tol(i)
            }) {
                return Err(WangError::GridTooCoarse { node });
            }
            return Err(WangError::NewtonDiverged { trace });
        }
    }
    if norm > RESIDUAL_TOL {
        return Err(WangError::NewtonDiverged { trace });
    }
    // polish: the far field is exponentially small, so keep taking full
    // steps until they are negligible relative to F itself
    for _ in 0..6 {
        let rhs: Vec<f64> = res.iter().take(n - 1).map(|x| -x).collect();
        let delta = radial.solve(&f, &rhs);
        let rel = f
            .iter()
            .zip(&delta)
            .map(|(a, d)| if *a == 0.0 { d.abs() } else { (d / a).abs() })
            .fold(0.0, f64::max);
        let trial: Vec<f64> = f.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let (tr, tn) = radial.residual(&trial);
        if tn > RESIDUAL_TOL || trial.iter().enumerate().any(|(i, &x)| x < -envelope_tol(i)) {
            break;
        }
        f = trial;
        res = tr;
        norm = tn;
        if rel <= 1e-12 {
            break;
        }
    }
    let ntheta_total = grid.ntheta * (k as usize + 3);
    let theta = (0..ntheta_total).map(|j| 2.0 * PI * j as f64 / ntheta_total as f64).collect();
    let spline = Spline::new(&t, &f);
    let mut sol = WangSolution {
        k,
        s,
        radius,
        r,
        theta,
        f,
        residual_norm: norm,
        newton_trace: trace,
        spline,
    };
    sol.residual_norm = sol.polar_residual();
    Ok(sol)
}

impl WangSolution {
    /// Max-norm of the five-point polar residual over all free nodes,
    /// scaled by the Jacobian diagonal as in the Newton solve.
    pub fn polar_residual(&self) -> f64 {
        (0..self.r.len() - 1)
            .flat_map(|i| (0..self.theta.len()).map(move |j| (i, j)))
            .map(|(i, j)| self.polar_node_residual(i, j).abs())
            .fold(0.0, f64::max)
    }

    fn polar_node_residual(&self, i: usize, j: usize) -> f64 {
        if i + 1 == self.r.len() {
            return 0.0;
        }
        let nt = self.theta.len();
        let ht = 2.0 * PI / nt as f64;
        // the stored field is radial; the angular stencil reads the same
        // ring at j ± 1
        let ring = |_j: usize| self.f[i];
        let ang = (ring((j + 1) % nt) - 2.0 * ring(j) + ring((j + nt - 1) % nt)) / (ht * ht);
        let t: Vec<f64> = self.r[i.saturating_sub(1)..=i + 1].iter().map(|r| r.ln()).collect();
        let f = &self.f[i.saturating_sub(1)..=i + 1];
        let local = if i == 0 { 0 } else { 1 };
        let (lap, d) = radial_lap(&t, f, -2.0 * self.k as f64 / 3.0, local);
        let g = forcing(self.k, self.s, self.r[i].ln());
        (lap + ang - g * nonlinear(self.f[i])) / (d + 2.0 / (ht * ht) + g * nonlinear_d(self.f[i]))
    }

    /// `F` at radius `r` (cubic spline in `log r`).
    pub fn f_at(&self, r: f64) -> Result<f64, WangError> {
        self.check(r)?;
        Ok(self.spline.eval(r.ln()).0)
    }

    /// `F` and `dF/d(log r)` at radius `r`.
    pub fn f_and_slope(&self, r: f64) -> Result<(f64, f64), WangError> {
        self.check(r)?;
        Ok(self.spline.eval(r.ln()))
    }

    fn check(&self, r: f64) -> Result<(), WangError> {
        if r < self.r[0] || r > self.radius * (1.0 + 1e-12) {
            Err(WangError::OutsideDisk(r))
        } else {
            Ok(())
        }
    }

    /// `φ(z)` and `∂_z φ(z)`.
    pub fn phi_at(&self, z: Complex64) -> Result<(f64, Complex64), WangError> {
        let r = z.norm();
        self.check(r)?;
        let (f, ft) = self.spline.eval(r.ln());
        let phi = phi_flat(self.k, self.s, r) + f;
        // ∂_z = (e^{−iθ}/2)(∂_r − (i/r)∂_θ); the solution is radial
        let dz = Complex64::new(self.k as f64 / 3.0, 0.0) / z + z.conj() / (2.0 * r * r) * ft;
        Ok((phi, dz))
    }

    /// Rows `(r, θ, φ, F, residual)` over the polar grid.
    pub fn grid_rows(&self) -> Vec<[f64; 5]> {
        let mut out = Vec::with_capacity(self.r.len() * self.theta.len());
        for (i, &r) in self.r.iter().enumerate() {
            for (j, &th) in self.theta.iter().enumerate() {
                let phi = phi_flat(self.k, self.s, r) + self.f[i];
                out.push([r, th, phi, self.f[i], self.polar_node_residual(i, j)]);
            }
        }
        out
    }
}

/// Outcome of the pointwise bound `e^φ > 2^{1/3}|q_s|^{2/3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub holds: bool,
    /// Nodes where the two sides agree to within `1e-13`.
    pub flagged: usize,
    pub min_margin: f64,
}

/// The bound reads `F > 0`; the Dirichlet circle (equality by
/// construction) is excluded.
pub fn pointwise_lower_bound_check(sol: &WangSolution) -> LowerBound {
    let interior = &sol.f[..sol.f.len() - 1];
    let min_margin = interior.iter().copied().fold(f64::INFINITY, f64::min);
    let flagged = interior.iter().filter(|x| x.abs() <= 1e-13).count();
    let holds = interior.iter().all(|&x| x > 0.0 || x.abs() <= 1e-13);
    LowerBound {
        holds,
        flagged,
        min_margin,
    }
}

#[derive(Debug, Clone)]
pub struct ErrorField {
    pub r: Vec<f64>,
    /// Distance from the zero in the flat metric `|z^k|^{2/3}|dz|²`.
    pub rho: Vec<f64>,
    pub f: Vec<f64>,
    /// Decay exponent from the linearised radial model
    /// `F ∝ K0(mρ) − K0(mρ_R)/I0(mρ_R)·I0(mρ)` on `[R/2, 0.9R]`.
    pub decay: f64,
    /// Plain least-squares slope of `−log F` against `ρ` on the same annulus.
    pub decay_loglinear: f64,
    pub positive: bool,
    /// `F` decreases along the outer annulus.
    pub monotone_outer: bool,
}

/// Flat distance from the zero.
pub fn natural_radius(k: u32, r: f64) -> f64 {
    let e = (k as f64 + 3.0) / 3.0;
    r.powf(e) / e
}

fn ln_k0(x: f64) -> f64 {
    if x < 600.0 {
        puruspe::bessel::Kn(0, x).ln()
    } else {
        -x + 0.5 * (PI / (2.0 * x)).ln() + (1.0 - 1.0 / (8.0 * x)).ln()
    }
}

fn ln_i0(x: f64) -> f64 {
    if x < 600.0 {
        puruspe::bessel::In(0, x).ln()
    } else {
        x - 0.5 * (2.0 * PI * x).ln() + (1.0 + 1.0 / (8.0 * x)).ln()
    }
}

fn ln_model(m: f64, rho: f64, rho_r: f64) -> f64 {
    let lk = ln_k0(m * rho);
    let ratio = (ln_k0(m * rho_r) - ln_i0(m * rho_r) + ln_i0(m * rho) - lk).exp();
    lk + (-ratio).ln_1p()
}

fn spread(m: f64, pts: &[(f64, f64)], rho_r: f64) -> f64 {
    let d: Vec<f64> = pts.iter().map(|&(rho, lf)| lf - ln_model(m, rho, rho_r)).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - mean).powi(2)).sum()
}

/// Error field and fitted decay exponents.
pub fn error_field(sol: &WangSolution) -> ErrorField {
    let cutoff = 10.0 * sol.r[0];
    let mut r = Vec::new();
    let mut rho = Vec::new();
    let mut f = Vec::new();
    for (i, &ri) in sol.r.iter().enumerate().take(sol.r.len() - 1) {
        if ri > cutoff {
            r.push(ri);
            rho.push(natural_radius(sol.k, ri));
            f.push(sol.f[i]);
        }
    }
    let positive = f.iter().all(|&x| x > 0.0);
    let rho_r = natural_radius(sol.k, sol.radius);
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(&rho)
        .zip(&f)
        .filter(|((ri, _), fi)| **ri >= 0.5 * sol.radius && **ri <= 0.9 * sol.radius && **fi > 0.0)
        .map(|((_, &p), &fi)| (p, fi.ln()))
        .collect();
    let monotone_outer = r
        .iter()
        .zip(&f)
        .filter(|(ri, _)| **ri >= 0.5 * sol.radius)
        .map(|(_, &fi)| fi)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] <= w[0]);
    let (decay, decay_loglinear) = if pts.len() >= 3 {
        let np = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let plain = -sxy / sxx;
        // golden-section search around the plain estimate
        let (mut a, mut b) = (0.3 * plain.max(1e-6), 1.5 * plain.max(1e-6));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (spread(c, &pts, rho_r), spread(d, &pts, rho_r));
        for _ in 0..200 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = spread(c, &pts, rho_r);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = spread(d, &pts, rho_r);
            }
            if (b - a).abs() < 1e-12 * b {
                break;
            }
        }
        (0.5 * (a + b), plain)
    } else {
        (f64::NAN, f64::NAN)
    };
    ErrorField {
        r,
        rho,
        f,
        decay,
        decay_loglinear,
        positive,
        monotone_outer,
    }
}

/// Natural cubic spline returning value and first derivative.
#[derive(Debug, Clone)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            b[0] = 1.0;
            b[n - 1] = 1.0;
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                a[i] = h0;
                b[i] = 2.0 * (h0 + h1);
                c[i] = h1;
                d[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..n {
                let w = a[i] / b[i - 1];
                b[i] -= w * c[i - 1];
                d[i] -= w * d[i - 1];
            }
            m[n - 1] = d[n - 1] / b[n - 1];
            for i in (0..n - 1).rev() {
                m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
            }
        }
        Spline {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        }
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dv = (self.y[i + 1] - self.y[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (v, dv)
    }
}
