//! Apartment geometry of the asymptotic cone.
//!
//! Points of the model apartment are trace-free triples. Around a zero of
//! order `k` the limiting map is modelled by `u_k`, which sends each of the
//! `2(k+3)` sectors between consecutive Weyl-wall directions linearly onto
//! a Weyl chamber. Sector charts use the labeling where `φ₁` is the cube
//! root that is real and positive along the sector's type-II wall, and
//! `φ₂` is the larger of the two remaining coordinates inside the sector,
//! so every chart lands in the chamber `x₂ ≥ x₃ ≥ x₁`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::polygon::{tropical_top_exponent, PolygonError};
use crate::surface::{natural_coordinate, GeodesicPath, SaddleConnection, SurfaceError, Turn, ANGLE_TOL};
use crate::tropical::{path_singular_exponents, TropicalError, WeylVector};
use crate::{omega_pow, wrap_2pi, TWO_23};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildingError {
    #[error("matrix is not unimodular: det = {0}")]
    NonUnimodular(f64),
    #[error("the local model is singular at the origin")]
    OriginSingular,
    #[error("point is not trace-free: trace = {0}")]
    NotTraceFree(f64),
    #[error("sectors {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error(transparent)]
    Tropical(#[from] TropicalError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

const TRACE_TOL: f64 = 1e-12;

/// `√3 · 2^{1/6}`, the similarity factor of every sector chart.
pub fn chart_scale() -> f64 {
    3f64.sqrt() * 2f64.powf(1.0 / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApartmentPoint([f64; 3]);

impl ApartmentPoint {
    pub fn new(x: [f64; 3]) -> Result<Self, BuildingError> {
        let tr = x.iter().sum::<f64>();
        let scale = 1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if tr.abs() > TRACE_TOL * scale {
            return Err(BuildingError::NotTraceFree(tr));
        }
        Ok(ApartmentPoint(x))
    }
    pub fn coords(&self) -> [f64; 3] {
        self.0
    }
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
    pub fn distance(&self, other: &ApartmentPoint) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
    /// Coordinate `i` of the result is coordinate `perm[i]` of `self`.
    pub fn permuted(&self, perm: [usize; 3]) -> ApartmentPoint {
        ApartmentPoint([self.0[perm[0]], self.0[perm[1]], self.0[perm[2]]])
    }
    pub fn weyl_vector(&self) -> WeylVector {
        WeylVector::from_unsorted(self.0)
    }
    /// Pair of equal coordinates, if the point lies on a wall.
    pub fn wall(&self, tol: f64) -> Option<(usize, usize)> {
        let s = tol * (1.0 + self.norm());
        [(0, 1), (0, 2), (1, 2)]
            .into_iter()
            .find(|&(a, b)| (self.0[a] - self.0[b]).abs() <= s)
    }
    fn angle_to(&self, other: &ApartmentPoint) -> f64 {
        let dot: f64 = self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum();
        (dot / (self.norm() * other.norm())).clamp(-1.0, 1.0).acos()
    }
}

/// Sorted log singular values of a unimodular matrix.
pub fn vector_distance(m: &Matrix3<f64>) -> Result<WeylVector, BuildingError> {
    let det = m.determinant();
    if !((det.abs() - 1.0).abs() <= 1e-8) {
        return Err(BuildingError::NonUnimodular(det));
    }
    let sv = m.svd(false, false).singular_values;
    let mut x = [sv[0].ln(), sv[1].ln(), sv[2].ln()];
    let tr = x.iter().sum::<f64>() / 3.0;
    x.iter_mut().for_each(|v| *v -= tr);
    Ok(WeylVector::from_unsorted(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallType {
    /// The differential is real and negative along the wall.
    TypeI,
    /// The differential is real and positive along the wall.
    TypeII,
}

impl WallType {
    fn of(wall: usize) -> WallType {
        if wall % 2 == 0 {
            WallType::TypeII
        } else {
            WallType::TypeI
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub index: usize,
    /// Angular interval of the punctured disk, `[start, end]`.
    pub start: f64,
    pub end: f64,
    pub walls: [WallType; 2],
    /// `labels[i]` is the continued branch (power of `ω`) for `φ_{i+1}`.
    pub labels: [usize; 3],
    /// Linear chart `(Re w, Im w) ↦ 𝔸` in the continued natural coordinate.
    pub chart: Matrix3x2<f64>,
}

impl Sector {
    fn apply(&self, w: Complex64) -> ApartmentPoint {
        let x = self.chart * Vector2::new(w.re, w.im);
        ApartmentPoint([x[0], x[1], x[2]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorAtlas {
    pub k: u32,
    pub sectors: Vec<Sector>,
}

fn branch_value(l: usize, w: Complex64) -> f64 {
    -TWO_23 * (omega_pow(l as i64) * w).re
}

fn branch_row(l: usize) -> [f64; 2] {
    let o = omega_pow(l as i64);
    [-TWO_23 * o.re, TWO_23 * o.im]
}

/// Sector charts with the canonical labeling.
pub fn sector_atlas(k: u32) -> SectorAtlas {
    let n = 2 * (k as usize + 3);
    let width = PI / (k as f64 + 3.0);
    let sectors = (0..n)
        .map(|m| {
            let type_two = if m % 2 == 0 { m } else { m + 1 };
            // ω^l e^{i type_two π/3} = 1
            let first = (3 - (type_two / 2) % 3) % 3;
            let mid = natural_coordinate(k, 1.0, (m as f64 + 0.5) * width);
            let mut rest: Vec<usize> = (0..3).filter(|&l| l != first).collect();
            if branch_value(rest[0], mid) < branch_value(rest[1], mid) {
                rest.swap(0, 1);
            }
            let labels = [first, rest[0], rest[1]];
            let mut chart = Matrix3x2::zeros();
            for (i, &l) in labels.iter().enumerate() {
                let row = branch_row(l);
                chart[(i, 0)] = row[0];
                chart[(i, 1)] = row[1];
            }
            Sector {
                index: m,
                start: m as f64 * width,
                end: (m + 1) as f64 * width,
                walls: [WallType::of(m), WallType::of(m + 1)],
                labels,
                chart,
            }
        })
        .collect();
    SectorAtlas { k, sectors }
}

fn compose(outer: [usize; 3], inner: [usize; 3]) -> [usize; 3] {
    // position maps: i ↦ outer[inner[i]]
    [outer[inner[0]], outer[inner[1]], outer[inner[2]]]
}

const IDENTITY: [usize; 3] = [0, 1, 2];

impl SectorAtlas {
    pub fn len(&self) -> usize {
        self.sectors.len()
    }
    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }
    fn width(&self) -> f64 {
        PI / (self.k as f64 + 3.0)
    }

    /// Sector containing the angle; walls belong to the sector they start.
    pub fn sector_of(&self, angle: f64) -> usize {
        let a = wrap_2pi(angle);
        ((a / self.width()).floor() as usize).min(self.len() - 1)
    }

    /// Continued natural coordinate of `z` as seen from sector `m`, which
    /// may be the sector of `z` or the one just before or after it.
    fn natural_in(&self, m: usize, z: Complex64) -> Complex64 {
        let n = self.len();
        let mut a = wrap_2pi(z.arg());
        let own = self.sector_of(a);
        if m == n - 1 && own == 0 {
            a += TAU;
        } else if m == 0 && own == n - 1 && a > PI {
            a -= TAU;
        }
        natural_coordinate(self.k, z.norm(), a)
    }

    /// Chart of sector `m` evaluated at `z`.
    pub fn eval_in(&self, m: usize, z: Complex64) -> ApartmentPoint {
        self.sectors[m].apply(self.natural_in(m, z))
    }

    pub fn eval(&self, z: Complex64) -> Result<(usize, ApartmentPoint), BuildingError> {
        if !(z.norm() > 0.0) {
            return Err(BuildingError::OriginSingular);
        }
        let m = self.sector_of(z.arg());
        Ok((m, self.eval_in(m, z)))
    }

    /// Branch continuation into sector `m + 1`: `φ_{i+1}` of sector `m`
    /// continues as `φ_{perm[i]+1}` there.
    pub fn transition(&self, m: usize) -> [usize; 3] {
        let n = self.len();
        let next = (m + 1) % n;
        let shift = if next == 0 { self.k as usize } else { 0 };
        let labels = self.sectors[m].labels;
        let nl = self.sectors[next].labels;
        let mut perm = IDENTITY;
        for (i, p) in perm.iter_mut().enumerate() {
            // continued branch j of the last sheet is base branch j + k
            *p = (0..3).find(|&c| nl[c] == (labels[i] + shift) % 3).unwrap_or(i);
        }
        perm
    }

    /// The reflection read off from the wall between `m` and `m + 1`: the
    /// pair of coordinates that agree on the wall in the chart of `m`.
    pub fn wall_reflection(&self, m: usize) -> Option<[usize; 3]> {
        let z = Complex64::from_polar(1.0, self.sectors[m].end);
        let (a, b) = self.eval_in(m, z).wall(1e-12)?;
        let mut perm = IDENTITY;
        perm.swap(a, b);
        Some(perm)
    }

    /// Angle subtended in 𝔸 by the image of sector `m`.
    pub fn subtended_angle(&self, m: usize) -> f64 {
        let s = &self.sectors[m];
        let a = self.eval_in(m, Complex64::from_polar(1.0, s.start));
        let b = self.eval_in(m, Complex64::from_polar(1.0, s.end));
        a.angle_to(&b)
    }

    pub fn image_cone_angle(&self) -> f64 {
        (0..self.len()).map(|m| self.subtended_angle(m)).sum()
    }

    /// Product of the wall reflections once around the puncture, followed
    /// by the inverse of the cube-root monodromy `φ ↦ ω^k φ`. `None` if a
    /// wall does not resolve to a single reflection.
    pub fn loop_composition(&self) -> Option<[usize; 3]> {
        let mut total = IDENTITY;
        for m in 0..self.len() {
            total = compose(self.wall_reflection(m)?, total);
        }
        let labels = self.sectors[0].labels;
        let mut mono = IDENTITY;
        for (i, p) in mono.iter_mut().enumerate() {
            *p = (0..3).find(|&c| (labels[c] + self.k as usize) % 3 == labels[i]).unwrap_or(i);
        }
        Some(compose(mono, total))
    }

    /// Angular position of the image of `z` on the image cone.
    fn cone_position(&self, z: Complex64) -> (f64, f64) {
        let m = self.sector_of(z.arg());
        let before: f64 = (0..m).map(|j| self.subtended_angle(j)).sum();
        let p = self.eval_in(m, z);
        let ray = self.eval_in(m, Complex64::from_polar(1.0, self.sectors[m].start));
        let within = if p.norm() > 0.0 { p.angle_to(&ray) } else { 0.0 };
        (before + within, p.norm())
    }

    /// Distance between images in the cone assembled from the sector
    /// charts.
    pub fn image_distance(&self, z1: Complex64, z2: Complex64) -> f64 {
        let total = self.image_cone_angle();
        let (a1, r1) = self.cone_position(z1);
        let (a2, r2) = self.cone_position(z2);
        let d = (a1 - a2).abs();
        let d = d.min(total - d);
        if d >= PI {
            r1 + r2
        } else {
            (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * d.cos()).max(0.0).sqrt()
        }
    }

    /// Distance through the shared wall of adjacent sectors, unfolding the
    /// second point into the first chart by the wall reflection.
    pub fn unfolded_distance(&self, z1: Complex64, z2: Complex64) -> Result<f64, BuildingError> {
        let n = self.len();
        let (a, p) = self.eval(z1)?;
        let (b, q) = self.eval(z2)?;
        if a == b {
            return Ok(p.distance(&q));
        }
        // q' in chart a: coordinate i is branch labels_a[i], which is
        // coordinate perm[i] of chart b
        let q_unfolded = if (a + 1) % n == b {
            q.permuted(self.transition(a))
        } else if (b + 1) % n == a {
            q.permuted(invert(self.transition(b)))
        } else {
            return Err(BuildingError::NotAdjacent(a, b));
        };
        Ok(p.distance(&q_unfolded))
    }

    /// Flat `|q₀|^{2/3}` distance for points in the same or adjacent
    /// sectors, measured in one continued natural chart.
    pub fn flat_distance(&self, z1: Complex64, z2: Complex64) -> Result<f64, BuildingError> {
        let n = self.len();
        let a = self.sector_of(z1.arg());
        let b = self.sector_of(z2.arg());
        if a != b && (a + 1) % n != b && (b + 1) % n != a {
            return Err(BuildingError::NotAdjacent(a, b));
        }
        Ok((self.natural_in(a, z1) - self.natural_in(a, z2)).norm())
    }
}

fn invert(p: [usize; 3]) -> [usize; 3] {
    let mut q = IDENTITY;
    for (i, &v) in p.iter().enumerate() {
        q[v] = i;
    }
    q
}

/// `u_k(z)` in the chart of the sector containing `z`.
pub fn local_model_eval(k: u32, z: Complex64) -> Result<ApartmentPoint, BuildingError> {
    sector_atlas(k).eval(z).map(|(_, p)| p)
}

/// Maximum of `|d_𝔸 - √3·2^{1/6} d_{q₀}| / d_{q₀}` over pairs in the same
/// or adjacent sectors.
pub fn flat_isometry_check(k: u32, pairs: &[(Complex64, Complex64)]) -> Result<f64, BuildingError> {
    let atlas = sector_atlas(k);
    let c = chart_scale();
    let mut worst = 0.0f64;
    for &(a, b) in pairs {
        let flat = atlas.flat_distance(a, b)?;
        if flat == 0.0 {
            continue;
        }
        let img = atlas.unfolded_distance(a, b)?;
        worst = worst.max((img - c * flat).abs() / flat);
    }
    Ok(worst)
}

/// Straighten every corner with a side angle below `π` into the chord
/// of its two legs, developed on the short side.
fn straighten_corners(path: &GeodesicPath) -> Result<GeodesicPath, BuildingError> {
    let mut segs: Vec<SaddleConnection> = path.segments().to_vec();
    let mut turns: Vec<Turn> = path.turns().to_vec();
    let closed = path.is_closed();
    loop {
        let Some(mut i) = turns
            .iter()
            .position(|t| t.left < PI - ANGLE_TOL || t.right < PI - ANGLE_TOL)
        else {
            return Ok(GeodesicPath::new_unchecked(segs, turns, closed)?);
        };
        let n = segs.len();
        if closed && n == 1 {
            return Err(SurfaceError::DegeneratePath.into());
        }
        if closed && i == n - 1 {
            segs.rotate_left(1);
            turns.rotate_left(1);
            i = n - 2;
        }
        let j = i + 1;
        let t = turns[i];
        let pa = segs[i].period;
        let on_left = t.left < t.right;
        // second leg developed on the short side of the corner
        let dir = if on_left {
            pa.arg() + PI - t.left
        } else {
            pa.arg() - PI + t.right
        };
        let pb = Complex64::from_polar(segs[j].length(), dir);
        let chord = pa + pb;
        if chord.norm() <= 1e-12 * (pa.norm() + pb.norm()) {
            return Err(SurfaceError::DegeneratePath.into());
        }
        let at_a = (chord / pa).arg().abs();
        let at_c = (pb / chord).arg().abs();
        let shrink = |t: &mut Turn, by: f64| {
            if on_left {
                t.left -= by;
                t.right += by;
            } else {
                t.right -= by;
                t.left += by;
            }
        };
        if closed || i > 0 {
            shrink(&mut turns[(i + n - 1) % n], at_a);
        }
        if closed || j + 1 < n {
            shrink(&mut turns[j % n], at_c);
        }
        segs[i] = SaddleConnection::new(segs[i].start_zero, segs[j].end_zero, chord)?;
        segs.remove(j);
        turns.remove(i);
    }
}

/// Vector distance between the endpoints of the image of a path, from the
/// max-plus evaluation of its leading term and of the reversed path's.
/// Corners with a side angle below `π` are first straightened.
pub fn path_vector_distance(path: &GeodesicPath) -> Result<WeylVector, BuildingError> {
    let p = straighten_corners(path)?;
    let top = tropical_top_exponent(&p)?;
    let bottom = -tropical_top_exponent(&p.reversed())?;
    Ok(WeylVector::from_unsorted([top, -top - bottom, bottom]))
}

/// `Σ segment vectors − endpoint vector`; zero iff the distance is additive.
pub fn convexity_defect(path: &GeodesicPath) -> Result<WeylVector, BuildingError> {
    let sum = path_singular_exponents(path)?;
    let whole = path_vector_distance(path)?;
    let d = [sum.x1() - whole.x1(), sum.x2() - whole.x2(), sum.x3() - whole.x3()];
    Ok(WeylVector::from_unsorted(d))
}

/// Additivity of the vector distance along the path.
pub fn weak_convexity_check(path: &GeodesicPath) -> bool {
    let sum = match path_singular_exponents(path) {
        Ok(v) => v,
        Err(_) => return false,
    };
    let whole = match path_vector_distance(path) {
        Ok(v) => v,
        Err(_) => return false,
    };
    sum.max_abs_diff(&whole) <= 1e-9 * (1.0 + path.length())
}

/// Random geodesic path through zeros of random orders `0..=3`: segment
/// lengths in `[0.2, 2]`, left angles uniform in `[π, cone − π]`.
pub fn sample_geodesic_path<R: Rng>(rng: &mut R) -> GeodesicPath {
    loop {
        let n = rng.gen_range(1..=6);
        let lengths: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let turns: Vec<Turn> = (1..n)
            .map(|_| {
                let k = rng.gen_range(0..=3u32);
                let total = TAU * (1.0 + k as f64 / 3.0);
                let left = if k == 0 { PI } else { rng.gen_range(PI..=total - PI) };
                Turn::with_left(left, k)
            })
            .collect();
        let zeros: Vec<usize> = (0..=n).collect();
        let first = Complex64::from_polar(1.0, rng.gen_range(0.0..TAU));
        if let Ok(p) = GeodesicPath::from_turns(&zeros, first, &lengths, &turns, false) {
            return p;
        }
    }
}

/// Two-segment corner with left angle `2π/3` at a zero of random order,
/// its legs on either side of a direction where the top exponent is
/// doubled.
pub fn sample_corner<R: Rng>(rng: &mut R) -> GeodesicPath {
    let k = rng.gen_range(0..=3u32);
    let left = TAU / 3.0;
    let wall = TAU / 3.0 * rng.gen_range(0..3) as f64;
    let before = rng.gen_range(0.05..(PI - left - 0.05));
    let theta = wall - before;
    let lens = [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)];
    let segs = vec![
        SaddleConnection {
            start_zero: 0,
            end_zero: 1,
            period: Complex64::from_polar(lens[0], theta),
        },
        SaddleConnection {
            start_zero: 1,
            end_zero: 2,
            period: Complex64::from_polar(lens[1], theta + PI - left),
        },
    ];
    GeodesicPath::new_unchecked(segs, vec![Turn::with_left(left, k)], false).expect("corner is well formed")
}

/// Row of the `building localmodel` sample table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSample {
    pub sector: usize,
    pub z: Complex64,
    pub point: ApartmentPoint,
}

/// `samples` points per sector on a deterministic polar grid of the unit
/// disk.
pub fn local_model_samples(k: u32, samples: usize) -> Vec<LocalSample> {
    let atlas = sector_atlas(k);
    let side = (samples as f64).sqrt().ceil().max(1.0) as usize;
    let mut out = Vec::new();
    for s in &atlas.sectors {
        let mut count = 0;
        'grid: for a in 0..side {
            for b in 0..side {
                if count == samples {
                    break 'grid;
                }
                let r = (a as f64 + 1.0) / side as f64;
                let th = s.start + (s.end - s.start) * (b as f64 + 0.5) / side as f64;
                let z = Complex64::from_polar(r, th);
                out.push(LocalSample {
                    sector: s.index,
                    z,
                    point: atlas.eval_in(s.index, z),
                });
                count += 1;
            }
        }
    }
    out
}

/// Unit vector of `𝔸` used by tests for chart orientation.
pub fn apartment_basis() -> Matrix3x2<f64> {
    let e1 = Vector3::new(2.0, -1.0, -1.0) / 6f64.sqrt();
    let e2 = Vector3::new(0.0, 1.0, -1.0) / 2f64.sqrt();
    Matrix3x2::from_columns(&[e1, e2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vector_distance_basics() {
        let v = vector_distance(&Matrix3::identity()).unwrap();
        assert_eq!(v.as_array(), [0.0, 0.0, 0.0]);
        let e = 1f64.exp();
        let d = Matrix3::from_diagonal(&Vector3::new(e * e, 1.0, 1.0 / (e * e)));
        let v = vector_distance(&d).unwrap();
        assert!(v.max_abs_diff(&WeylVector::from_unsorted([2.0, 0.0, -2.0])) < 1e-14);
        assert!(matches!(
            vector_distance(&(Matrix3::identity() * 2.0)),
            Err(BuildingError::NonUnimodular(_))
        ));
    }

    #[test]
    fn vector_distance_random_sl3() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut m: Matrix3<f64> = Matrix3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let det = m.determinant();
            if det.abs() < 1e-3 {
                continue;
            }
            if det < 0.0 {
                m.set_column(0, &(-m.column(0)));
            }
            m /= m.determinant().cbrt();
            let v = vector_distance(&m).unwrap();
            assert!(v.trace().abs() < 1e-12);
            assert!(v.x1() >= v.x2() && v.x2() >= v.x3());
            // oracle: eigenvalues of MᵀM
            let eig = (m.transpose() * m).symmetric_eigenvalues();
            let mut l: Vec<f64> = eig.iter().map(|x| 0.5 * x.ln()).collect();
            l.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!((l[0] - v.x1()).abs() < 1e-9 && (l[2] - v.x3()).abs() < 1e-9);
            let inv = vector_distance(&m.try_inverse().unwrap()).unwrap();
            assert!(inv.max_abs_diff(&v.opposite()) < 1e-9);
        }
    }

    #[test]
    fn k0_real_axis() {
        let t = 0.7;
        let p = local_model_eval(0, Complex64::new(t, 0.0)).unwrap();
        let want = [-TWO_23 * t, TWO_23 * t / 2.0, TWO_23 * t / 2.0];
        for i in 0..3 {
            assert!((p.coords()[i] - want[i]).abs() < 1e-14);
        }
        assert!((p.norm() - chart_scale() * t).abs() < 1e-14);
        assert_eq!(local_model_eval(0, Complex64::new(0.0, 0.0)), Err(BuildingError::OriginSingular));
    }

    #[test]
    fn sector_counts_and_angles() {
        for k in 0..6 {
            let a = sector_atlas(k);
            assert_eq!(a.len(), 2 * (k as usize + 3));
            for m in 0..a.len() {
                assert!((a.subtended_angle(m) - PI / 3.0).abs() < 1e-10);
            }
            let total = TAU * (k as f64 + 3.0) / 3.0;
            assert!((a.image_cone_angle() - total).abs() < 1e-9);
        }
    }

    #[test]
    fn charts_fold_into_one_chamber() {
        for k in 0..4 {
            let a = sector_atlas(k);
            for s in &a.sectors {
                let mid = Complex64::from_polar(0.5, 0.5 * (s.start + s.end));
                let x = a.eval_in(s.index, mid).coords();
                assert!(x[1] > x[2] && x[2] > x[0]);
            }
        }
    }

    #[test]
    fn walls_map_to_walls() {
        for k in 0..4 {
            let a = sector_atlas(k);
            for s in &a.sectors {
                let z = Complex64::from_polar(1e-9, s.start);
                assert!(a.eval_in(s.index, z).wall(1e-9).is_some());
            }
        }
    }

    #[test]
    fn type_two_walls_are_real_positive() {
        let k = 2;
        let a = sector_atlas(k);
        for s in &a.sectors {
            let wall = if s.index % 2 == 0 { s.start } else { s.end };
            let w = natural_coordinate(k, 1.0, wall);
            let phi1 = omega_pow(s.labels[0] as i64) * w;
            assert!(phi1.re > 0.0 && phi1.im.abs() < 1e-12);
            assert_eq!(s.walls[if s.index % 2 == 0 { 0 } else { 1 }], WallType::TypeII);
        }
    }

    #[test]
    fn transitions_are_wall_reflections() {
        for k in 0..5 {
            let a = sector_atlas(k);
            for m in 0..a.len() {
                let t = a.transition(m);
                let moved = (0..3).filter(|&i| t[i] != i).count();
                assert_eq!(moved, 2);
                assert_eq!(Some(t), a.wall_reflection(m));
            }
        }
    }

    #[test]
    fn continuity_across_walls() {
        for k in 0..4 {
            let a = sector_atlas(k);
            for m in 0..a.len() {
                let z = Complex64::from_polar(0.8, a.sectors[m].end);
                let here = a.eval_in(m, z);
                let next = a.eval_in((m + 1) % a.len(), z);
                assert!(here.permuted(a.transition(m)).distance(&next) < 1e-12);
            }
        }
    }

    #[test]
    fn loop_is_identity() {
        for k in 0..7 {
            assert_eq!(sector_atlas(k).loop_composition(), Some(IDENTITY));
        }
    }

    #[test]
    fn rotation_permutes_branches() {
        // z ↦ e^{2πi/(k+3)} z rotates the natural coordinate by 2π/3
        let k = 1;
        let z = Complex64::from_polar(0.6, 0.3);
        let rz = z * Complex64::from_polar(1.0, TAU / (k as f64 + 3.0));
        let w = natural_coordinate(k, z.norm(), z.arg());
        let rw = natural_coordinate(k, rz.norm(), rz.arg());
        let b: Vec<f64> = (0..3).map(|l| branch_value(l, w)).collect();
        let rb: Vec<f64> = (0..3).map(|l| branch_value(l, rw)).collect();
        for l in 0..3 {
            assert!((rb[l] - b[(l + 1) % 3]).abs() < 1e-14);
        }
    }

    #[test]
    fn isometry_within_and_across_sectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..4u32 {
            let a = sector_atlas(k);
            let w = PI / (k as f64 + 3.0);
            let mut same = Vec::new();
            let mut cross = Vec::new();
            for _ in 0..200 {
                let m = rng.gen_range(0..a.len());
                let s = &a.sectors[m];
                let z1 = Complex64::from_polar(rng.gen_range(0.05..1.0), rng.gen_range(s.start..s.end));
                let z2 = Complex64::from_polar(rng.gen_range(0.05..1.0), rng.gen_range(s.start..s.end));
                same.push((z1, z2));
                let z3 = Complex64::from_polar(rng.gen_range(0.05..1.0), rng.gen_range(s.end..s.end + w));
                cross.push((z1, z3));
            }
            assert!(flat_isometry_check(k, &same).unwrap() <= 1e-10);
            assert!(flat_isometry_check(k, &cross).unwrap() <= 1e-9);
            let radial: Vec<_> = (1..20)
                .map(|i| (Complex64::from_polar(0.05 * i as f64, 0.1), Complex64::from_polar(0.9, 0.1)))
                .collect();
            assert!(flat_isometry_check(k, &radial).unwrap() < 1e-14);
        }
    }

    #[test]
    fn non_adjacent_pairs_rejected() {
        let pairs = [(Complex64::new(1.0, 0.1), Complex64::new(-1.0, 0.1))];
        assert!(matches!(flat_isometry_check(0, &pairs), Err(BuildingError::NotAdjacent(_, _))));
    }

    #[test]
    fn non_adjacent_closures_separate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 1;
        let a = sector_atlas(k);
        let n = a.len();
        for _ in 0..1000 {
            let i = rng.gen_range(0..n);
            let j = (i + rng.gen_range(2..n - 1)) % n;
            let wi = if rng.gen_bool(0.5) { a.sectors[i].start } else { a.sectors[i].end };
            let wj = if rng.gen_bool(0.5) { a.sectors[j].start } else { a.sectors[j].end };
            let z1 = Complex64::from_polar(rng.gen_range(0.01..1.0), wi);
            let z2 = Complex64::from_polar(rng.gen_range(0.01..1.0), wj);
            let d = a.image_distance(z1, z2);
            let r = a.eval_in(i, z1).norm().max(a.eval_in(j, z2).norm());
            assert!(d >= 0.5 * 3f64.sqrt() * r - 1e-12);
        }
        // bisector rays are distinct
        for i in 0..n {
            for j in (i + 1)..n {
                let bi = 0.5 * (a.sectors[i].start + a.sectors[i].end);
                let bj = 0.5 * (a.sectors[j].start + a.sectors[j].end);
                let d = a.image_distance(Complex64::from_polar(1.0, bi), Complex64::from_polar(1.0, bj));
                assert!(d > 0.1);
            }
        }
    }

    fn turn_path(theta: f64, lens: [f64; 2], left: f64, k: u32) -> GeodesicPath {
        let t = Turn::with_left(left, k);
        let segs = vec![
            SaddleConnection::new(0, 1, Complex64::from_polar(lens[0], theta)).unwrap(),
            SaddleConnection::new(1, 2, Complex64::from_polar(lens[1], theta + PI - left)).unwrap(),
        ];
        GeodesicPath::new_unchecked(segs, vec![t], false).unwrap()
    }

    #[test]
    fn single_segment_is_additive() {
        for i in 0..20 {
            let p = GeodesicPath::single(SaddleConnection::new(0, 1, Complex64::from_polar(1.0 + 0.1 * i as f64, 0.37 * i as f64 + 0.05)).unwrap());
            assert!(weak_convexity_check(&p));
        }
    }

    #[test]
    fn geodesic_turn_is_additive() {
        let p = turn_path(0.3, [1.0, 0.7], PI + 0.4, 1);
        assert!(weak_convexity_check(&p));
    }

    #[test]
    fn corner_has_top_deficit() {
        // legs on either side of a direction where the top exponent doubles
        for i in 1..10 {
            let a = i as f64 * PI / 30.0;
            let theta = TAU / 3.0 - a;
            let p = turn_path(theta, [1.0, 1.3], 2.0 * PI / 3.0, 0);
            assert!(!weak_convexity_check(&p));
            let d = convexity_defect(&p).unwrap();
            let sum = path_singular_exponents(&p).unwrap();
            let chord = p.segments()[0].period + p.segments()[1].period;
            let straight = crate::tropical::segment_exponents(chord).unwrap().sorted;
            assert!((sum.x1() - straight.x1()) > 1e-6);
            assert!(d.as_array().iter().any(|&v| v > 1e-6));
        }
    }

    #[test]
    fn random_geodesics_additive_and_corners_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            assert!(weak_convexity_check(&sample_geodesic_path(&mut rng)));
            let c = sample_corner(&mut rng);
            assert!(!weak_convexity_check(&c));
            assert!(convexity_defect(&c).unwrap().x1() > 1e-9);
        }
    }

    #[test]
    fn samples_cover_every_sector() {
        let s = local_model_samples(1, 9);
        assert_eq!(s.len(), 8 * 9);
        assert!(s.iter().all(|x| x.point.coords().iter().sum::<f64>().abs() < 1e-12));
        let _ = apartment_basis();
    }
}
