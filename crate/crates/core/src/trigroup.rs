//! Flat structures of triangle orbifolds and their tropical length spectra.
//!
//! The orbifold `Σ^{p,q,r}` is the double of one unit equilateral triangle
//! `PQR`. Its cone points are not cone points of a translation-type
//! structure, so we pass to the regular cover attached to a finite
//! quotient `G = ⟨x, y⟩` with `ord x = p`, `ord y = q`, `ord xy = r`. Each
//! `g ∈ G` contributes a white triangle (chart `P=0, Q=1, R=e^{iπ/3}`) and
//! a black one (chart `P=0, R'=e^{-iπ/3}, Q=1`). White `g` meets black `g`
//! along `PQ`, black `g·y⁻¹` along `QR` and black `g·x` along `RP`, so the
//! stars of `P`, `Q`, `R` lifts have `2p`, `2q`, `2r` triangles.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::surface::{
    enumerate_saddle_connections, validate, CubicSurface, EdgeRef, GeodesicPath, Gluing, SaddleConnection,
    SurfaceError, Turn, ANGLE_TOL,
};
use crate::tropical::{path_singular_exponents, TropicalError, WeylVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrigroupError {
    #[error("({0},{1},{2}) has no projective deformations: an index equals 2")]
    NonDeformable(u32, u32, u32),
    #[error("invalid triangle type ({0},{1},{2})")]
    BadParameter(u32, u32, u32),
    #[error("no finite quotient with the required orders found up to characteristic {0}")]
    NoFiniteQuotient(u32),
    #[error("curve family is too small to separate the angles")]
    InsufficientFamily,
    #[error("surface failed validation: {0}")]
    Invalid(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Tropical(#[from] TropicalError),
}

// ---------------------------------------------------------------------------
// Finite quotients inside SL(2, ℓ) and PSL(2, ℓ)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Mat2([u32; 4]);

#[derive(Debug, Clone, Copy)]
struct Field {
    l: u32,
    projective: bool,
}

impl Field {
    fn canon(&self, m: Mat2) -> Mat2 {
        if !self.projective {
            return m;
        }
        let neg = Mat2(m.0.map(|v| (self.l - v) % self.l));
        m.min(neg)
    }
    fn mul(&self, a: Mat2, b: Mat2) -> Mat2 {
        let l = self.l as u64;
        let [a0, a1, a2, a3] = a.0.map(|v| v as u64);
        let [b0, b1, b2, b3] = b.0.map(|v| v as u64);
        self.canon(Mat2([
            ((a0 * b0 + a1 * b2) % l) as u32,
            ((a0 * b1 + a1 * b3) % l) as u32,
            ((a2 * b0 + a3 * b2) % l) as u32,
            ((a2 * b1 + a3 * b3) % l) as u32,
        ]))
    }
    fn one(&self) -> Mat2 {
        self.canon(Mat2([1, 0, 0, 1]))
    }
    /// Order of `m` if it is at most `cap`.
    fn order(&self, m: Mat2, cap: u32) -> Option<u32> {
        let one = self.one();
        let mut acc = m;
        for n in 1..=cap {
            if acc == one {
                return Some(n);
            }
            acc = self.mul(acc, m);
        }
        None
    }
    fn elements(&self) -> Vec<Mat2> {
        let l = self.l;
        let mut out = Vec::new();
        for a in 0..l {
            for b in 0..l {
                for c in 0..l {
                    for d in 0..l {
                        if (a * d + l * l - b * c) % l == 1 {
                            let m = self.canon(Mat2([a, b, c, d]));
                            if m == Mat2([a, b, c, d]) {
                                out.push(m);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A finite group presented through right multiplication by the two
/// generators.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub description: String,
    pub order: usize,
    /// `times_x[g]` is the index of `g·x`.
    pub times_x: Vec<usize>,
    pub times_y: Vec<usize>,
}

impl Quotient {
    pub fn times_y_inv(&self) -> Vec<usize> {
        let mut inv = vec![0; self.order];
        for (g, &h) in self.times_y.iter().enumerate() {
            inv[h] = g;
        }
        inv
    }
}

fn generated(f: &Field, x: Mat2, y: Mat2, limit: usize) -> Option<Quotient> {
    let one = f.one();
    let mut index: HashMap<Mat2, usize> = HashMap::new();
    let mut elems = vec![one];
    index.insert(one, 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for gen in [x, y] {
            let h = f.mul(elems[i], gen);
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(h) {
                e.insert(elems.len());
                elems.push(h);
                queue.push_back(elems.len() - 1);
                if elems.len() > limit {
                    return None;
                }
            }
        }
    }
    let look = |m: Mat2| index[&m];
    Some(Quotient {
        description: format!("{}SL(2,{})", if f.projective { "P" } else { "" }, f.l),
        order: elems.len(),
        times_x: elems.iter().map(|&g| look(f.mul(g, x))).collect(),
        times_y: elems.iter().map(|&g| look(f.mul(g, y))).collect(),
    })
}

const MAX_CHARACTERISTIC: u32 = 31;

fn primes_up_to(n: u32) -> impl Iterator<Item = u32> {
    (2..=n).filter(|&m| (2..m).take_while(|d| d * d <= m).all(|d| m % d != 0))
}

/// Smallest-characteristic quotient with generators of exact orders
/// `p`, `q` and product of exact order `r`.
pub fn find_quotient(p: u32, q: u32, r: u32) -> Result<Quotient, TrigroupError> {
    let cap = p.max(q).max(r);
    for l in primes_up_to(MAX_CHARACTERISTIC) {
        for projective in [false, true] {
            if projective && l == 2 {
                continue;
            }
            let f = Field { l, projective };
            let elems = f.elements();
            let xs: Vec<Mat2> = {
                // one representative per trace is enough up to conjugacy
                let mut seen = BTreeMap::new();
                for &m in &elems {
                    if f.order(m, cap) == Some(p) {
                        let tr = (m.0[0] + m.0[3]) % l;
                        let key = if projective { tr.min((l - tr) % l) } else { tr };
                        seen.entry(key).or_insert(m);
                    }
                }
                seen.into_values().collect()
            };
            let ys: Vec<Mat2> = elems.iter().copied().filter(|&m| f.order(m, cap) == Some(q)).collect();
            let mut best: Option<Quotient> = None;
            for &x in &xs {
                for &y in &ys {
                    if f.order(f.mul(x, y), cap) != Some(r) {
                        continue;
                    }
                    if let Some(g) = generated(&f, x, y, 200_000) {
                        if best.as_ref().is_none_or(|b| g.order < b.order) {
                            best = Some(g);
                        }
                    }
                }
            }
            if let Some(b) = best {
                return Ok(b);
            }
        }
    }
    Err(TrigroupError::NoFiniteQuotient(MAX_CHARACTERISTIC))
}

// ---------------------------------------------------------------------------
// The cover

#[derive(Debug, Clone)]
pub struct TriangleOrbifoldSurface {
    pub p: u32,
    pub q: u32,
    pub r: u32,
    /// `(3,3,3)`: the cover is a torus and the structure is a translation
    /// structure up to `ζ`.
    pub euclidean: bool,
    pub quotient: Quotient,
    pub surface: CubicSurface,
    /// Vertex classes over `P`, `Q`, `R`.
    pub vertices: [Vec<usize>; 3],
    /// Per vertex class, the angle positions of outgoing edges along which
    /// `q₀` is real and positive.
    pub canonical_marking: Vec<Vec<f64>>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn build_orbifold(p: u32, q: u32, r: u32) -> Result<TriangleOrbifoldSurface, TrigroupError> {
    if [p, q, r].contains(&2) {
        return Err(TrigroupError::NonDeformable(p, q, r));
    }
    if p < 3 || q < 3 || r < 3 {
        return Err(TrigroupError::BadParameter(p, q, r));
    }
    let euclidean = (p, q, r) == (3, 3, 3);
    let quotient = find_quotient(p, q, r)?;
    let n = quotient.order;
    let h = 3f64.sqrt() / 2.0;
    let white = [c(0.0, 0.0), c(1.0, 0.0), c(0.5, h)];
    let black = [c(0.0, 0.0), c(0.5, -h), c(1.0, 0.0)];
    let mut triangles = Vec::with_capacity(2 * n);
    for _ in 0..n {
        triangles.push(white);
        triangles.push(black);
    }
    let wt = |g: usize| 2 * g;
    let bt = |g: usize| 2 * g + 1;
    let y_inv = quotient.times_y_inv();
    let zeta = crate::omega_pow(1);
    let mut gluings = Vec::with_capacity(3 * n);
    for g in 0..n {
        // PQ: identity
        gluings.push(Gluing {
            edge_a: EdgeRef { tri: wt(g), side: 0 },
            edge_b: EdgeRef { tri: bt(g), side: 2 },
            rot: 0,
            trans: c(0.0, 0.0),
        });
        // QR: rotation about Q
        gluings.push(Gluing {
            edge_a: EdgeRef { tri: wt(g), side: 1 },
            edge_b: EdgeRef { tri: bt(y_inv[g]), side: 1 },
            rot: 1,
            trans: c(1.0, 0.0) - zeta,
        });
        // RP: rotation about P
        gluings.push(Gluing {
            edge_a: EdgeRef { tri: wt(g), side: 2 },
            edge_b: EdgeRef { tri: bt(quotient.times_x[g]), side: 0 },
            rot: 2,
            trans: c(0.0, 0.0),
        });
    }
    // every vertex is marked, regular lifts with order 0
    let probe = CubicSurface::new(triangles.clone(), gluings.clone(), BTreeMap::new())?;
    let mut orders = BTreeMap::new();
    let mut vertices: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (id, vc) in probe.classes().iter().enumerate() {
        let first = vc.corners[0];
        // white corner 0 is P, 1 is Q, 2 is R; black corner 0 is P, 1 is R', 2 is Q
        let kind = if first.tri % 2 == 0 {
            first.corner
        } else {
            [0, 2, 1][first.corner]
        };
        vertices[kind].push(id);
        let val = vc.corners.len() as u32;
        orders.insert(id, val / 2 - 3);
    }
    let surface = CubicSurface::new(triangles, gluings, orders)?;
    let violations = validate(&surface);
    if !violations.is_empty() {
        let codes: Vec<&str> = violations.iter().map(|v| v.code()).collect();
        return Err(TrigroupError::Invalid(codes.join(",")));
    }
    let canonical_marking = canonical_marking(&surface);
    Ok(TriangleOrbifoldSurface {
        p,
        q,
        r,
        euclidean,
        quotient,
        surface,
        vertices,
        canonical_marking,
    })
}

fn canonical_marking(s: &CubicSurface) -> Vec<Vec<f64>> {
    s.classes()
        .iter()
        .map(|vc| {
            vc.corners
                .iter()
                .filter_map(|&cr| {
                    let t = s.triangles()[cr.tri];
                    let d = t[(cr.corner + 1) % 3] - t[cr.corner];
                    let cube = d * d * d;
                    (cube.re > 0.0 && cube.im.abs() < 1e-9 * cube.re).then(|| s.angle_position(cr, d))
                })
                .collect()
        })
        .collect()
}

impl TriangleOrbifoldSurface {
    /// Valence of each class over `P`, `Q`, `R`.
    pub fn valences(&self) -> [Vec<usize>; 3] {
        self.vertices
            .clone()
            .map(|v| v.iter().map(|&id| self.surface.valence(id)).collect())
    }
    /// Zero orders over `P`, `Q`, `R` (constant on each fibre).
    pub fn zero_orders(&self) -> [u32; 3] {
        [self.p, self.q, self.r].map(|m| m - 3)
    }
    pub fn genus(&self) -> i64 {
        1 - self.surface.euler_characteristic() / 2
    }
}

/// Multiply the differential by `e^{iθ}`. Charts rotate by `e^{iθ/3}`; the
/// angle is reduced mod `2π` first since rotating charts by a cube root of
/// unity does not change the structure.
pub fn rotate_differential(surface: &CubicSurface, theta: f64) -> CubicSurface {
    let t = theta.rem_euclid(TAU);
    if t == 0.0 {
        return surface.clone();
    }
    surface.rotated_charts(Complex64::from_polar(1.0, t / 3.0))
}

/// The same rotation applied to curve representatives.
pub fn rotate_classes(classes: &[GeodesicPath], theta: f64) -> Vec<GeodesicPath> {
    let t = theta.rem_euclid(TAU);
    if t == 0.0 {
        return classes.to_vec();
    }
    let u = Complex64::from_polar(1.0, t / 3.0);
    classes.iter().map(|c| c.rotate_periods(u)).collect()
}

// ---------------------------------------------------------------------------
// Closed geodesics

#[derive(Debug, Clone, Copy)]
struct Oriented {
    conn: SaddleConnection,
    start_pos: f64,
    end_pos: f64,
}

/// Closed geodesics made of saddle connections between marked points,
/// of total length at most `max_length` and at most `max_segments`
/// segments, one per cyclic rotation, sorted by length.
pub fn closed_geodesics(
    surface: &CubicSurface,
    max_length: f64,
    max_segments: usize,
) -> Result<Vec<GeodesicPath>, TrigroupError> {
    let en = enumerate_saddle_connections(surface, max_length)?;
    let mut arcs = Vec::with_capacity(2 * en.records.len());
    for rec in &en.records {
        arcs.push(Oriented {
            conn: rec.connection,
            start_pos: rec.start_pos,
            end_pos: rec.end_pos,
        });
        arcs.push(Oriented {
            conn: SaddleConnection {
                start_zero: rec.connection.end_zero,
                end_zero: rec.connection.start_zero,
                period: rec.end_dir / rec.end_dir.norm() * rec.connection.length(),
            },
            start_pos: rec.end_pos,
            end_pos: rec.start_pos,
        });
    }
    let mut by_start: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, a) in arcs.iter().enumerate() {
        by_start.entry(a.conn.start_zero).or_default().push(i);
    }
    let left_of = |a: &Oriented, b: &Oriented| -> Option<Turn> {
        let class = a.conn.end_zero;
        let total = surface.classes()[class].angle;
        let left = (a.end_pos - b.start_pos).rem_euclid(total);
        let left = if total - left < 1e-9 { 0.0 } else { left };
        let right = total - left;
        (left >= PI - ANGLE_TOL && right >= PI - ANGLE_TOL).then(|| Turn {
            left,
            right,
            order: surface.order(class),
        })
    };
    let mut cycles: Vec<(Vec<usize>, Vec<Turn>)> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut turns: Vec<Turn> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn walk(
        arcs: &[Oriented],
        by_start: &BTreeMap<usize, Vec<usize>>,
        left_of: &dyn Fn(&Oriented, &Oriented) -> Option<Turn>,
        first: usize,
        len: f64,
        max_length: f64,
        max_segments: usize,
        stack: &mut Vec<usize>,
        turns: &mut Vec<Turn>,
        cycles: &mut Vec<(Vec<usize>, Vec<Turn>)>,
    ) {
        let last = arcs[*stack.last().unwrap()];
        if last.conn.end_zero == arcs[first].conn.start_zero {
            if let Some(t) = left_of(&last, &arcs[first]) {
                let mut tt = turns.clone();
                tt.push(t);
                cycles.push((stack.clone(), tt));
            }
        }
        if stack.len() == max_segments {
            return;
        }
        let Some(next) = by_start.get(&last.conn.end_zero) else {
            return;
        };
        for &j in next {
            // the first arc has the smallest index of the cycle
            if j < first {
                continue;
            }
            let l = len + arcs[j].conn.length();
            if l > max_length + 1e-9 {
                continue;
            }
            let Some(t) = left_of(&last, &arcs[j]) else {
                continue;
            };
            stack.push(j);
            turns.push(t);
            walk(arcs, by_start, left_of, first, l, max_length, max_segments, stack, turns, cycles);
            stack.pop();
            turns.pop();
        }
    }
    for first in 0..arcs.len() {
        stack.clear();
        turns.clear();
        stack.push(first);
        walk(
            &arcs,
            &by_start,
            &left_of,
            first,
            arcs[first].conn.length(),
            max_length,
            max_segments,
            &mut stack,
            &mut turns,
            &mut cycles,
        );
    }
    // drop cycles that repeat a shorter cycle
    cycles.retain(|(s, _)| {
        let n = s.len();
        !(1..n).any(|d| n % d == 0 && (0..n).all(|i| s[i] == s[(i + d) % n]))
    });
    let mut out = Vec::with_capacity(cycles.len());
    for (seq, tt) in cycles {
        let zeros: Vec<usize> = seq.iter().map(|&i| arcs[i].conn.start_zero).collect();
        let lengths: Vec<f64> = seq.iter().map(|&i| arcs[i].conn.length()).collect();
        out.push(GeodesicPath::from_turns(&zeros, arcs[seq[0]].conn.period, &lengths, &tt, true)?);
    }
    out.sort_by(|a, b| a.length().total_cmp(&b.length()));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Spectra

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumVector {
    pub values: Vec<WeylVector>,
    /// All coordinates, divided by their Euclidean norm.
    pub projectivized: Vec<f64>,
}

impl SpectrumVector {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn projective_distance(&self, other: &SpectrumVector) -> f64 {
        self.projectivized
            .iter()
            .zip(other.projectivized.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

fn projectivize(values: &[WeylVector]) -> Vec<f64> {
    let flat: Vec<f64> = values.iter().flat_map(|v| v.as_array()).collect();
    let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        flat
    } else {
        flat.iter().map(|v| v / norm).collect()
    }
}

/// Tropical length spectrum of a family of closed geodesics.
pub fn spectrum(classes: &[GeodesicPath]) -> Result<SpectrumVector, TrigroupError> {
    let values = classes
        .iter()
        .map(|c| {
            if !c.is_closed() {
                return Err(TrigroupError::Tropical(TropicalError::OpenPath));
            }
            Ok(path_singular_exponents(c)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let projectivized = projectivize(&values);
    Ok(SpectrumVector {
        values,
        projectivized,
    })
}

/// Spectrum of the family after multiplying the differential by `e^{iθ}`.
pub fn spectrum_at(classes: &[GeodesicPath], theta: f64) -> Result<SpectrumVector, TrigroupError> {
    spectrum(&rotate_classes(classes, theta))
}

/// Distinct chart angles of the family's segments, modulo `2π/3`.
fn chart_angles(classes: &[GeodesicPath]) -> Vec<f64> {
    let step = TAU / 3.0;
    let mut a: Vec<f64> = classes
        .iter()
        .flat_map(|c| c.segments().iter().map(|s| s.period.arg().rem_euclid(step)))
        .map(|x| if step - x < 1e-9 { 0.0 } else { x })
        .collect();
    a.sort_by(f64::total_cmp);
    a.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    a
}

/// Minimum projective distance between spectra at distinct grid angles.
pub fn boundary_injectivity_probe(classes: &[GeodesicPath], thetas: &[f64]) -> Result<f64, TrigroupError> {
    if thetas.len() < 2 {
        return Ok(f64::INFINITY);
    }
    if classes.len() < 2 || chart_angles(classes).len() < 2 {
        return Err(TrigroupError::InsufficientFamily);
    }
    let spectra = thetas
        .par_iter()
        .map(|&t| spectrum_at(classes, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut best = f64::INFINITY;
    for i in 0..spectra.len() {
        for j in (i + 1)..spectra.len() {
            best = best.min(spectra[i].projective_distance(&spectra[j]));
        }
    }
    Ok(best)
}

/// Equally spaced grid `2πj/n`, `j = 0..n`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

fn self_opposite(c: &GeodesicPath) -> bool {
    path_singular_exponents(c).map_or(true, |v| v.x2().abs() <= 1e-9 * (1.0 + v.x1().abs()))
}

fn same_angles(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-9)
}

/// A two-class family for the boundary probe. A class whose vector is its
/// own opposite has a spectrum that is `π`-periodic in `θ`, so both members
/// are taken among the shortest classes that are not, with different
/// chart-angle sets.
pub fn default_family(classes: &[GeodesicPath]) -> Option<Vec<GeodesicPath>> {
    let mut chiral = classes.iter().filter(|c| !self_opposite(c));
    let first = chiral.next()?;
    let base = chart_angles(std::slice::from_ref(first));
    let second = chiral.find(|c| !same_angles(&chart_angles(std::slice::from_ref(c)), &base))?;
    Some(vec![first.clone(), second.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_for_334() {
        let g = find_quotient(3, 3, 4).unwrap();
        assert_eq!(g.order, 24);
        assert_eq!(g.description, "SL(2,3)");
    }

    #[test]
    fn orbifold_334() {
        let o = build_orbifold(3, 3, 4).unwrap();
        assert!(validate(&o.surface).is_empty());
        let v = o.valences();
        assert!(v[0].iter().all(|&x| x == 6));
        assert!(v[1].iter().all(|&x| x == 6));
        assert!(v[2].iter().all(|&x| x == 8));
        assert_eq!(o.zero_orders(), [0, 0, 1]);
        assert_eq!(o.genus(), 2);
        assert!(!o.euclidean);
        // edges all have unit length
        for t in o.surface.triangles() {
            for i in 0..3 {
                assert!(((t[(i + 1) % 3] - t[i]).norm() - 1.0).abs() < 1e-15);
            }
        }
        // half of the outgoing edges carry a positive differential
        for (id, m) in o.canonical_marking.iter().enumerate() {
            assert_eq!(2 * m.len(), o.surface.valence(id));
        }
    }

    #[test]
    fn zero_orders_match_euler_characteristic() {
        for (p, q, r) in [(3, 3, 4), (3, 3, 5), (3, 4, 4)] {
            let o = build_orbifold(p, q, r).unwrap();
            let total: i64 = o.surface.vertex_orders().values().map(|&k| k as i64).sum();
            assert_eq!(total, -3 * o.surface.euler_characteristic());
            let n = o.quotient.order as f64;
            let chi = n * (1.0 / p as f64 + 1.0 / q as f64 + 1.0 / r as f64 - 1.0);
            assert!((o.surface.euler_characteristic() as f64 - chi).abs() < 1e-9);
        }
    }

    #[test]
    fn euclidean_and_non_deformable() {
        let o = build_orbifold(3, 3, 3).unwrap();
        assert!(o.euclidean);
        assert_eq!(o.surface.euler_characteristic(), 0);
        assert!(o.surface.vertex_orders().values().all(|&k| k == 0));
        assert_eq!(build_orbifold(2, 3, 7).unwrap_err(), TrigroupError::NonDeformable(2, 3, 7));
    }

    #[test]
    fn saddle_connections_of_334() {
        let o = build_orbifold(3, 3, 4).unwrap();
        let e = enumerate_saddle_connections(&o.surface, 1.01).unwrap();
        assert_eq!(e.connections.len(), 72);
        assert!(e.connections.iter().all(|c| (c.length() - 1.0).abs() < 1e-12));
        let e = enumerate_saddle_connections(&o.surface, 3f64.sqrt() + 0.01).unwrap();
        assert!(e.connections.iter().any(|c| (c.length() - 3f64.sqrt()).abs() < 1e-9));
    }

    #[test]
    fn rotation_by_full_turn_is_exact() {
        let o = build_orbifold(3, 3, 4).unwrap();
        let cl = closed_geodesics(&o.surface, 4.0, 6).unwrap();
        assert!(!cl.is_empty());
        let a = spectrum(&cl).unwrap();
        let b = spectrum_at(&cl, TAU).unwrap();
        assert_eq!(a, b);
        let rs = rotate_differential(&o.surface, TAU);
        assert_eq!(rs.triangles(), o.surface.triangles());
        assert_eq!(spectrum_at(&cl, 0.0).unwrap(), a);
    }

    #[test]
    fn rotation_scales_periods() {
        let o = build_orbifold(3, 3, 4).unwrap();
        let rs = rotate_differential(&o.surface, PI / 2.0);
        assert!(validate(&rs).is_empty());
        let e0 = enumerate_saddle_connections(&o.surface, 1.01).unwrap();
        let e1 = enumerate_saddle_connections(&rs, 1.01).unwrap();
        assert_eq!(e0.connections.len(), e1.connections.len());
        let u = Complex64::from_polar(1.0, PI / 6.0);
        // every rotated period is a rotated original period up to ω
        for sc in &e1.connections {
            let ok = e0.connections.iter().any(|o| {
                (0..3).any(|m| (o.period * u * crate::omega_pow(m) - sc.period).norm() < 1e-9)
                    || (0..3).any(|m| (-o.period * u * crate::omega_pow(m) - sc.period).norm() < 1e-9)
            });
            assert!(ok);
        }
        // top exponent of a unit edge at angle θ₀ follows cos(θ₀ + θ/3)
        let edge = GeodesicPath::single(SaddleConnection::new(0, 0, c(1.0, 0.0)).unwrap());
        let rot = edge.rotate_periods(u);
        let top = crate::tropical::path_norm_exponent(&rot).unwrap();
        let want = (0..3)
            .map(|j| -crate::TWO_23 * (PI / 6.0 + TAU * j as f64 / 3.0).cos())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((top - want).abs() < 1e-14);
    }

    #[test]
    fn closed_geodesics_are_valid() {
        let o = build_orbifold(3, 3, 4).unwrap();
        let cl = closed_geodesics(&o.surface, 4.0, 6).unwrap();
        for g in &cl {
            assert!(g.is_closed());
            for t in g.turns() {
                assert!(t.left >= PI - 1e-9 && t.right >= PI - 1e-9);
            }
            let inv = spectrum(&[g.reversed()]).unwrap();
            let fwd = spectrum(std::slice::from_ref(g)).unwrap();
            assert!(inv.values[0].max_abs_diff(&fwd.values[0].opposite()) < 1e-12);
        }
    }

    #[test]
    fn empty_family() {
        let s = spectrum(&[]).unwrap();
        assert!(s.is_empty());
        assert_eq!(boundary_injectivity_probe(&[], &[0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn probe_separates_angles() {
        let o = build_orbifold(3, 3, 4).unwrap();
        let cl = closed_geodesics(&o.surface, 10.0, 6).unwrap();
        let fam = default_family(&cl).unwrap();
        let d = boundary_injectivity_probe(&fam, &theta_grid(12)).unwrap();
        assert!(d > 0.0, "min distance {d}");
        assert_eq!(
            boundary_injectivity_probe(&fam[..1], &theta_grid(12)),
            Err(TrigroupError::InsufficientFamily)
        );
    }

    #[test]
    fn swap_symmetry_permutes_spectra() {
        // the half-turn about the midpoint of PQ exchanges the two p = 3
        // vertices and pulls q₀ back to -q₀, so it carries the spectra at
        // θ to those at θ + π class by class
        let o = build_orbifold(3, 3, 4).unwrap();
        let cl = closed_geodesics(&o.surface, 10.0, 6).unwrap();
        let key = |v: &WeylVector| v.as_array().map(|x| (x * 1e8).round() as i64);
        let mut a: Vec<_> = spectrum(&cl).unwrap().values.iter().map(key).collect();
        let mut b: Vec<_> = spectrum_at(&cl, PI).unwrap().values.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        let c0 = spectrum_at(&cl, 0.3).unwrap();
        let c1 = spectrum_at(&cl, 0.3 + PI).unwrap();
        assert_ne!(c0.values, c1.values);
    }
}
