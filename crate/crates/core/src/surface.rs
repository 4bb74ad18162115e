//! Flat cone surfaces of cubic differentials (1/3-translation surfaces).
//!
//! A surface is a list of Euclidean triangles, each in its own natural
//! chart (where the differential is `dz^3`), plus edge gluings with
//! transitions `z -> ζ^m z + c`. Vertex classes are numbered by first
//! appearance when scanning corners `(triangle, corner)` in order.
//! Only classes listed in `vertex_orders` are marked; saddle connections
//! run between marked classes.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{omega_pow, wrap_2pi};

mod develop;
mod tighten;

pub use develop::{enumerate_saddle_connections, Enumeration};
pub use tighten::{tighten_path, EdgePath, TightenConfig};

/// Construction-time angle tolerance.
pub const ANGLE_TOL: f64 = 1e-9;
/// Direction-classification tolerance.
pub const DIRECTION_TOL: f64 = 1e-10;
const LENGTH_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("zero order must be non-negative, got {0}")]
    NegativeOrder(i64),
    #[error("radius must be positive and finite")]
    BadRadius,
    #[error("malformed surface: {0}")]
    Malformed(String),
    #[error("saddle-connection search left the surface ({clipped} rays clipped)")]
    UnboundedSearch { clipped: usize },
    #[error("straightening did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("path collapses to a point")]
    DegeneratePath,
    #[error("path is not a connected edge path: {0}")]
    Disconnected(String),
    #[error("invalid geodesic path: {0}")]
    InvalidPath(String),
    #[error("path passes through boundary vertex class {0}")]
    BoundaryVertex(usize),
    #[error("invalid input: {0}")]
    Json(String),
}

/// Edge `side` of triangle `tri` runs from vertex `side` to vertex `side + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub tri: usize,
    pub side: usize,
}

/// Pairs two edges; `z -> ζ^rot z + trans` maps the chart of `edge_a.tri`
/// to the chart of `edge_b.tri`, reversing the edge orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gluing {
    pub edge_a: EdgeRef,
    pub edge_b: EdgeRef,
    pub rot: u8,
    pub trans: Complex64,
}

/// Rigid chart map `z -> ζ^rot z + trans`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartMap {
    pub rot: i64,
    pub trans: Complex64,
}

impl ChartMap {
    pub const IDENTITY: ChartMap = ChartMap {
        rot: 0,
        trans: Complex64 { re: 0.0, im: 0.0 },
    };
    pub fn apply(&self, z: Complex64) -> Complex64 {
        omega_pow(self.rot) * z + self.trans
    }
    pub fn apply_dir(&self, d: Complex64) -> Complex64 {
        omega_pow(self.rot) * d
    }
    /// `self ∘ other`.
    pub fn compose(&self, other: &ChartMap) -> ChartMap {
        ChartMap {
            rot: (self.rot + other.rot).rem_euclid(3),
            trans: omega_pow(self.rot) * other.trans + self.trans,
        }
    }
    pub fn inverse(&self) -> ChartMap {
        let r = (-self.rot).rem_euclid(3);
        ChartMap {
            rot: r,
            trans: -(omega_pow(r) * self.trans),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DegenerateTriangle { tri: usize },
    IndexOutOfRange { gluing: usize },
    NonInvolutive { edge: EdgeRef },
    EdgeLengthMismatch { gluing: usize, len_a: f64, len_b: f64 },
    TransitionMismatch { gluing: usize, error: f64 },
    BadRotation { gluing: usize },
    ConeAngleMismatch { class: usize, expected: f64, actual: f64 },
    UnknownVertexClass { class: usize },
    DegreeMismatch { expected: i64, actual: i64 },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::DegenerateTriangle { .. } => "DegenerateTriangle",
            Violation::IndexOutOfRange { .. } => "IndexOutOfRange",
            Violation::NonInvolutive { .. } => "NonInvolutive",
            Violation::EdgeLengthMismatch { .. } => "EdgeLengthMismatch",
            Violation::TransitionMismatch { .. } => "TransitionMismatch",
            Violation::BadRotation { .. } => "BadRotation",
            Violation::ConeAngleMismatch { .. } => "ConeAngleMismatch",
            Violation::UnknownVertexClass { .. } => "UnknownVertexClass",
            Violation::DegreeMismatch { .. } => "DegreeMismatch",
        }
    }
}

/// Corner `corner` of triangle `tri`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Corner {
    pub tri: usize,
    pub corner: usize,
}

#[derive(Debug, Clone)]
pub struct VertexClass {
    /// Corners in counterclockwise fan order. For boundary vertices the
    /// first corner has a boundary edge on its clockwise side.
    pub corners: Vec<Corner>,
    /// Angle position of each corner's clockwise edge, measured from the
    /// first corner.
    pub offsets: Vec<f64>,
    pub interior: bool,
    pub angle: f64,
}

#[derive(Debug, Clone)]
pub struct CubicSurface {
    triangles: Vec<[Complex64; 3]>,
    gluings: Vec<Gluing>,
    vertex_orders: BTreeMap<usize, u32>,
    // neighbour across each side: (gluing index, this side is edge_a)
    across: Vec<[Option<(usize, bool)>; 3]>,
    corner_class: Vec<[usize; 3]>,
    classes: Vec<VertexClass>,
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// Interior angle of a triangle at corner `i`.
pub(crate) fn corner_angle(t: &[Complex64; 3], i: usize) -> f64 {
    let a = t[(i + 1) % 3] - t[i];
    let b = t[(i + 2) % 3] - t[i];
    (cross(a, b)).atan2(a.re * b.re + a.im * b.im)
}

impl CubicSurface {
    /// Assemble a surface. Only index ranges are checked here; use
    /// [`validate`] for the geometric invariants.
    pub fn new(
        triangles: Vec<[Complex64; 3]>,
        gluings: Vec<Gluing>,
        vertex_orders: BTreeMap<usize, u32>,
    ) -> Result<Self, SurfaceError> {
        let nt = triangles.len();
        for (gi, g) in gluings.iter().enumerate() {
            for e in [g.edge_a, g.edge_b] {
                if e.tri >= nt || e.side >= 3 {
                    return Err(SurfaceError::Malformed(format!(
                        "gluing {gi} references missing edge ({}, {})",
                        e.tri, e.side
                    )));
                }
            }
        }
        let mut across = vec![[None; 3]; nt];
        for (gi, g) in gluings.iter().enumerate() {
            if g.edge_a == g.edge_b {
                continue;
            }
            let a = &mut across[g.edge_a.tri][g.edge_a.side];
            if a.is_none() {
                *a = Some((gi, true));
            }
            let b = &mut across[g.edge_b.tri][g.edge_b.side];
            if b.is_none() {
                *b = Some((gi, false));
            }
        }
        let mut s = CubicSurface {
            triangles,
            gluings,
            vertex_orders,
            across,
            corner_class: vec![[usize::MAX; 3]; nt],
            classes: Vec::new(),
        };
        s.build_classes();
        Ok(s)
    }

    fn build_classes(&mut self) {
        let nt = self.triangles.len();
        for t in 0..nt {
            for i in 0..3 {
                if self.corner_class[t][i] != usize::MAX {
                    continue;
                }
                let id = self.classes.len();
                let start = Corner { tri: t, corner: i };
                // walk clockwise to a boundary, or all the way round
                let mut first = start;
                let mut interior = true;
                let mut guard = 0;
                loop {
                    match self.step_cw(first) {
                        Some(c) if c == start => break,
                        Some(c) => first = c,
                        None => {
                            interior = false;
                            break;
                        }
                    }
                    guard += 1;
                    if guard > 3 * nt + 3 {
                        break;
                    }
                }
                let mut corners = vec![first];
                let mut cur = first;
                guard = 0;
                while let Some(c) = self.step_ccw(cur) {
                    if c == first {
                        break;
                    }
                    corners.push(c);
                    cur = c;
                    guard += 1;
                    if guard > 3 * nt + 3 {
                        break;
                    }
                }
                let mut offsets = Vec::with_capacity(corners.len());
                let mut acc = 0.0;
                for c in &corners {
                    offsets.push(acc);
                    acc += corner_angle(&self.triangles[c.tri], c.corner);
                    self.corner_class[c.tri][c.corner] = id;
                }
                if self.corner_class[t][i] == usize::MAX {
                    // inconsistent gluings: fall back to a singleton class
                    self.corner_class[t][i] = id;
                }
                self.classes.push(VertexClass {
                    corners,
                    offsets,
                    interior,
                    angle: acc,
                });
            }
        }
    }

    /// Next corner counterclockwise around the same vertex.
    pub fn step_ccw(&self, c: Corner) -> Option<Corner> {
        let side = (c.corner + 2) % 3;
        let (gi, is_a) = self.across[c.tri][side]?;
        let g = &self.gluings[gi];
        let other = if is_a { g.edge_b } else { g.edge_a };
        Some(Corner {
            tri: other.tri,
            corner: other.side,
        })
    }

    /// Next corner clockwise around the same vertex.
    pub fn step_cw(&self, c: Corner) -> Option<Corner> {
        let (gi, is_a) = self.across[c.tri][c.corner]?;
        let g = &self.gluings[gi];
        let other = if is_a { g.edge_b } else { g.edge_a };
        Some(Corner {
            tri: other.tri,
            corner: (other.side + 1) % 3,
        })
    }

    /// Neighbour across an edge, with the chart map from this triangle's
    /// chart into the neighbour's.
    pub fn neighbor(&self, e: EdgeRef) -> Option<(EdgeRef, ChartMap)> {
        let (gi, is_a) = self.across[e.tri][e.side]?;
        let g = &self.gluings[gi];
        let fwd = ChartMap {
            rot: g.rot as i64,
            trans: g.trans,
        };
        if is_a {
            Some((g.edge_b, fwd))
        } else {
            Some((g.edge_a, fwd.inverse()))
        }
    }

    pub fn gluing_index(&self, e: EdgeRef) -> Option<usize> {
        self.across[e.tri][e.side].map(|(g, _)| g)
    }

    pub fn triangles(&self) -> &[[Complex64; 3]] {
        &self.triangles
    }
    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }
    pub fn vertex_orders(&self) -> &BTreeMap<usize, u32> {
        &self.vertex_orders
    }
    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }
    pub fn class_of(&self, c: Corner) -> usize {
        self.corner_class[c.tri][c.corner]
    }
    pub fn is_marked(&self, class: usize) -> bool {
        self.vertex_orders.contains_key(&class)
    }
    /// Declared zero order; unmarked classes are regular points.
    pub fn order(&self, class: usize) -> u32 {
        self.vertex_orders.get(&class).copied().unwrap_or(0)
    }
    pub fn has_boundary(&self) -> bool {
        self.across.iter().flatten().any(|a| a.is_none())
    }
    pub fn boundary_edges(&self) -> Vec<EdgeRef> {
        let mut out = Vec::new();
        for (t, row) in self.across.iter().enumerate() {
            for (s, a) in row.iter().enumerate() {
                if a.is_none() {
                    out.push(EdgeRef { tri: t, side: s });
                }
            }
        }
        out
    }
    pub fn valence(&self, class: usize) -> usize {
        self.classes[class].corners.len()
    }
    pub fn vertex_pos(&self, c: Corner) -> Complex64 {
        self.triangles[c.tri][c.corner]
    }

    /// Angle position around the vertex of a direction `d` leaving corner
    /// `c` (in the corner's chart), measured from the class's first corner.
    pub fn angle_position(&self, c: Corner, d: Complex64) -> f64 {
        let class = &self.classes[self.class_of(c)];
        let idx = class.corners.iter().position(|&x| x == c).unwrap_or(0);
        let t = &self.triangles[c.tri];
        let e = t[(c.corner + 1) % 3] - t[c.corner];
        let rel = cross(e, d).atan2(e.re * d.re + e.im * d.im);
        class.offsets[idx] + rel
    }

    /// Euler characteristic `V - E + F` (meaningful for closed surfaces).
    pub fn euler_characteristic(&self) -> i64 {
        self.classes.len() as i64 - self.gluings.len() as i64 + self.triangles.len() as i64
    }

    /// Copy with every chart rotated by `e^{iα}`; the flat metric is
    /// unchanged.
    pub fn rotated_charts(&self, alpha: Complex64) -> CubicSurface {
        let u = alpha / alpha.norm();
        let mut s = self.clone();
        for t in s.triangles.iter_mut() {
            for v in t.iter_mut() {
                *v *= u;
            }
        }
        for g in s.gluings.iter_mut() {
            g.trans *= u;
        }
        s
    }
}

/// Report every violated invariant; empty iff the surface is valid.
pub fn validate(surface: &CubicSurface) -> Vec<Violation> {
    let mut out = Vec::new();
    for (t, tri) in surface.triangles.iter().enumerate() {
        let area = cross(tri[1] - tri[0], tri[2] - tri[0]);
        if !(area > 0.0) {
            out.push(Violation::DegenerateTriangle { tri: t });
        }
    }
    let mut seen: BTreeMap<EdgeRef, usize> = BTreeMap::new();
    for (gi, g) in surface.gluings.iter().enumerate() {
        if g.edge_a == g.edge_b {
            out.push(Violation::NonInvolutive { edge: g.edge_a });
            continue;
        }
        for e in [g.edge_a, g.edge_b] {
            if seen.insert(e, gi).is_some() {
                out.push(Violation::NonInvolutive { edge: e });
            }
        }
        if g.rot > 2 {
            out.push(Violation::BadRotation { gluing: gi });
        }
        let ta = &surface.triangles[g.edge_a.tri];
        let tb = &surface.triangles[g.edge_b.tri];
        let (a0, a1) = (ta[g.edge_a.side], ta[(g.edge_a.side + 1) % 3]);
        let (b0, b1) = (tb[g.edge_b.side], tb[(g.edge_b.side + 1) % 3]);
        let la = (a1 - a0).norm();
        let lb = (b1 - b0).norm();
        if (la - lb).abs() > LENGTH_RTOL * la.max(lb) {
            out.push(Violation::EdgeLengthMismatch {
                gluing: gi,
                len_a: la,
                len_b: lb,
            });
            continue;
        }
        let m = ChartMap {
            rot: g.rot as i64,
            trans: g.trans,
        };
        let err = (m.apply(a0) - b1).norm().max((m.apply(a1) - b0).norm());
        if err > ANGLE_TOL * (1.0 + la) {
            out.push(Violation::TransitionMismatch { gluing: gi, error: err });
        }
    }
    for &class in surface.vertex_orders.keys() {
        if class >= surface.classes.len() {
            out.push(Violation::UnknownVertexClass { class });
        }
    }
    for (id, c) in surface.classes.iter().enumerate() {
        if !c.interior {
            continue;
        }
        let k = surface.order(id) as f64;
        let expected = TAU * (1.0 + k / 3.0);
        if (c.angle - expected).abs() > ANGLE_TOL {
            out.push(Violation::ConeAngleMismatch {
                class: id,
                expected,
                actual: c.angle,
            });
        }
    }
    if !surface.has_boundary() {
        let chi = surface.euler_characteristic();
        // 6g - 6 = -3χ
        let expected = -3 * chi;
        let actual: i64 = surface.vertex_orders.values().map(|&k| k as i64).sum();
        if expected != actual {
            out.push(Violation::DegreeMismatch { expected, actual });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionTag {
    Regular,
    Stokes,
    WeylWall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionClass {
    pub tag: DirectionTag,
    pub chart_angle: f64,
}

/// Distance of `a` to the lattice `offset + (π/3)ℤ`.
pub(crate) fn lattice_distance(a: f64, offset: f64) -> f64 {
    let step = PI / 3.0;
    let x = (a - offset) / step;
    (x - x.round()).abs() * step
}

/// Classify a chart angle (the zero only fixes which chart is meant; the
/// classification is invariant under the `ζ`-rotations between charts).
pub fn classify_direction(chart_angle: f64) -> DirectionClass {
    let tag = if lattice_distance(chart_angle, PI / 6.0) <= DIRECTION_TOL {
        DirectionTag::Stokes
    } else if lattice_distance(chart_angle, 0.0) <= DIRECTION_TOL {
        DirectionTag::WeylWall
    } else {
        DirectionTag::Regular
    };
    DirectionClass {
        tag,
        chart_angle,
    }
}

/// Surface-aware variant matching the operation signature; the zero id is
/// validated but does not affect the result.
pub fn classify_direction_at(
    surface: &CubicSurface,
    zero: usize,
    chart_angle: f64,
) -> Result<DirectionClass, SurfaceError> {
    if zero >= surface.classes.len() {
        return Err(SurfaceError::Malformed(format!("no vertex class {zero}")));
    }
    if !chart_angle.is_finite() {
        return Err(SurfaceError::Malformed("non-finite angle".into()));
    }
    Ok(classify_direction(chart_angle))
}

/// Natural coordinate `w = (3/(k+3)) z^{(k+3)/3}` on the branch whose
/// argument is `((k+3)/3) * theta` with `theta` the unwrapped argument of `z`.
pub fn natural_coordinate(k: u32, r: f64, theta: f64) -> Complex64 {
    let e = (k as f64 + 3.0) / 3.0;
    Complex64::from_polar(r.powf(e) / e, e * theta)
}

/// Bordered fan of `2(k+3)` equilateral triangles around one cone point of
/// angle `2π(1 + k/3)`; `radius` is the flat distance to the rim vertices.
pub fn build_polynomial_disk(k: i64, radius: f64) -> Result<CubicSurface, SurfaceError> {
    if k < 0 {
        return Err(SurfaceError::NegativeOrder(k));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(SurfaceError::BadRadius);
    }
    let n = 2 * (k as usize + 3);
    let step = PI / 3.0;
    let mut triangles = Vec::with_capacity(n);
    for m in 0..n {
        // each triangle keeps its own chart, rotated into [0, 2π)
        let a = wrap_2pi(m as f64 * step);
        triangles.push([
            Complex64::new(0.0, 0.0),
            Complex64::from_polar(radius, a),
            Complex64::from_polar(radius, a + step),
        ]);
    }
    let mut gluings = Vec::with_capacity(n);
    for m in 0..n {
        let next = (m + 1) % n;
        // side 2 of m (v2 -> v0) meets side 0 of next (v0 -> v1)
        gluings.push(Gluing {
            edge_a: EdgeRef { tri: m, side: 2 },
            edge_b: EdgeRef { tri: next, side: 0 },
            rot: rot_between(m, next) as u8,
            trans: Complex64::new(0.0, 0.0),
        });
    }
    let mut orders = BTreeMap::new();
    orders.insert(0usize, k as u32);
    CubicSurface::new(triangles, gluings, orders)
}

// chart of triangle m has its first edge at wrap(m π/3); consecutive charts
// differ by a rotation that must be a cube root of unity
fn rot_between(m: usize, next: usize) -> i64 {
    let am = (m as f64 + 1.0) * PI / 3.0;
    let an = wrap_2pi(next as f64 * PI / 3.0);
    let d = wrap_2pi(an - am);
    ((d / (2.0 * PI / 3.0)).round() as i64).rem_euclid(3)
}

// ---------------------------------------------------------------------------
// Saddle connections and geodesic paths

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleConnection {
    pub start_zero: usize,
    pub end_zero: usize,
    pub period: Complex64,
}

impl SaddleConnection {
    pub fn new(start_zero: usize, end_zero: usize, period: Complex64) -> Result<Self, SurfaceError> {
        if !(period.norm() > 0.0) {
            return Err(SurfaceError::InvalidPath("zero period".into()));
        }
        Ok(SaddleConnection {
            start_zero,
            end_zero,
            period,
        })
    }
    pub fn length(&self) -> f64 {
        self.period.norm()
    }
    /// `arg(period)` in `[0, 2π)`.
    pub fn angle(&self) -> f64 {
        wrap_2pi(self.period.arg())
    }
    pub fn reversed(&self) -> Self {
        SaddleConnection {
            start_zero: self.end_zero,
            end_zero: self.start_zero,
            period: -self.period,
        }
    }
}

/// Side angles at an interior zero of a path. `left` is swept
/// counterclockwise from the outgoing direction to the reversed incoming
/// direction; `right = cone angle - left`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub left: f64,
    pub right: f64,
    pub order: u32,
}

impl Turn {
    pub fn cone_angle(&self) -> f64 {
        self.left + self.right
    }
    pub fn straight(order: u32) -> Self {
        let total = TAU * (1.0 + order as f64 / 3.0);
        Turn {
            left: PI,
            right: total - PI,
            order,
        }
    }
    /// Turn with a prescribed left angle at a zero of order `order`.
    pub fn with_left(left: f64, order: u32) -> Self {
        Turn {
            left,
            right: TAU * (1.0 + order as f64 / 3.0) - left,
            order,
        }
    }
}

/// Concatenation of saddle connections. Periods are stored in one chart
/// continued along the path, so consecutive directions satisfy
/// `arg p_{i+1} = arg p_i + π - left_i (mod 2π)`. For closed loops the
/// last turn sits at the base point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    segments: Vec<SaddleConnection>,
    turns: Vec<Turn>,
    closed: bool,
}

impl GeodesicPath {
    /// Build and check the invariants: shared endpoints, cone-angle sums and
    /// the `>= π` condition on both sides.
    pub fn new(
        segments: Vec<SaddleConnection>,
        turns: Vec<Turn>,
        closed: bool,
    ) -> Result<Self, SurfaceError> {
        let p = GeodesicPath::new_unchecked(segments, turns, closed)?;
        p.check_angles()?;
        Ok(p)
    }

    /// Structural checks only; the side-angle condition is not enforced.
    /// Used for non-geodesic comparison paths.
    pub fn new_unchecked(
        segments: Vec<SaddleConnection>,
        turns: Vec<Turn>,
        closed: bool,
    ) -> Result<Self, SurfaceError> {
        if segments.is_empty() {
            return Err(SurfaceError::DegeneratePath);
        }
        let expected_turns = if closed {
            segments.len()
        } else {
            segments.len() - 1
        };
        if turns.len() != expected_turns {
            return Err(SurfaceError::InvalidPath(format!(
                "expected {expected_turns} turns, got {}",
                turns.len()
            )));
        }
        for s in &segments {
            if !(s.period.norm() > 0.0) {
                return Err(SurfaceError::InvalidPath("zero period".into()));
            }
        }
        for i in 0..expected_turns {
            let a = &segments[i];
            let b = &segments[(i + 1) % segments.len()];
            if a.end_zero != b.start_zero {
                return Err(SurfaceError::InvalidPath(format!(
                    "segment {i} ends at {} but next starts at {}",
                    a.end_zero, b.start_zero
                )));
            }
            let t = &turns[i];
            let total = TAU * (1.0 + t.order as f64 / 3.0);
            if (t.cone_angle() - total).abs() > ANGLE_TOL {
                return Err(SurfaceError::InvalidPath(format!(
                    "turn {i}: side angles sum to {} instead of {total}",
                    t.cone_angle()
                )));
            }
            // chart continuation, up to the ζ-ambiguity of charts
            let want = a.period.arg() + PI - t.left;
            let step = TAU / 3.0;
            let m = ((b.period.arg() - want) / step).round();
            let resid = (b.period.arg() - want - m * step).abs();
            if resid > 1e-7 {
                return Err(SurfaceError::InvalidPath(format!(
                    "turn {i}: period directions inconsistent with the turn angle"
                )));
            }
        }
        Ok(GeodesicPath {
            segments,
            turns,
            closed,
        })
    }

    fn check_angles(&self) -> Result<(), SurfaceError> {
        for (i, t) in self.turns.iter().enumerate() {
            if t.left < PI - ANGLE_TOL || t.right < PI - ANGLE_TOL {
                return Err(SurfaceError::InvalidPath(format!(
                    "turn {i}: side angles ({}, {}) violate the >= π condition",
                    t.left, t.right
                )));
            }
        }
        Ok(())
    }

    /// Single-segment path.
    pub fn single(seg: SaddleConnection) -> Self {
        GeodesicPath {
            segments: vec![seg],
            turns: Vec::new(),
            closed: false,
        }
    }

    /// Build from an initial period, segment lengths and left angles,
    /// continuing the chart along the path.
    pub fn from_turns(
        zeros: &[usize],
        first_period: Complex64,
        lengths: &[f64],
        turns: &[Turn],
        closed: bool,
    ) -> Result<Self, SurfaceError> {
        if lengths.is_empty() {
            return Err(SurfaceError::DegeneratePath);
        }
        let mut dir = first_period.arg();
        let mut segs = Vec::with_capacity(lengths.len());
        for (i, &l) in lengths.iter().enumerate() {
            if i > 0 {
                dir += PI - turns[i - 1].left;
            }
            let start = zeros[i % zeros.len()];
            let end = zeros[(i + 1) % zeros.len()];
            segs.push(SaddleConnection::new(start, end, Complex64::from_polar(l, dir))?);
        }
        GeodesicPath::new(segs, turns.to_vec(), closed)
    }

    pub fn segments(&self) -> &[SaddleConnection] {
        &self.segments
    }
    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }
    pub fn is_closed(&self) -> bool {
        self.closed
    }
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length()).sum()
    }

    /// The same path traversed backwards, with directions re-continued.
    pub fn reversed(&self) -> GeodesicPath {
        let n = self.segments.len();
        let turns: Vec<Turn> = if self.closed {
            // turn j joins reversed segments j and j+1, i.e. old turn n-2-j
            (0..n)
                .map(|j| self.turns[(2 * n - 2 - j) % n])
                .map(|t| Turn { left: t.right, right: t.left, order: t.order })
                .collect()
        } else {
            self.turns
                .iter()
                .rev()
                .map(|t| Turn { left: t.right, right: t.left, order: t.order })
                .collect()
        };
        let mut dir = (-self.segments[n - 1].period).arg();
        let segments = self
            .segments
            .iter()
            .rev()
            .enumerate()
            .map(|(j, s)| {
                if j > 0 {
                    dir += PI - turns[j - 1].left;
                }
                SaddleConnection {
                    start_zero: s.end_zero,
                    end_zero: s.start_zero,
                    period: Complex64::from_polar(s.length(), dir),
                }
            })
            .collect();
        GeodesicPath { segments, turns, closed: self.closed }
    }

    /// Multiply every period by `u` (a rotation of the differential).
    pub fn rotate_periods(&self, u: Complex64) -> GeodesicPath {
        GeodesicPath {
            segments: self
                .segments
                .iter()
                .map(|s| SaddleConnection {
                    period: s.period * u,
                    ..*s
                })
                .collect(),
            turns: self.turns.clone(),
            closed: self.closed,
        }
    }
}

// ---------------------------------------------------------------------------
// JSON interchange

#[derive(Debug, Serialize, Deserialize)]
struct GluingJson {
    #[serde(rename = "edgeA")]
    edge_a: [usize; 2],
    #[serde(rename = "edgeB")]
    edge_b: [usize; 2],
    rot: u8,
    trans: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct SurfaceJson {
    triangles: Vec<[[f64; 2]; 3]>,
    gluings: Vec<GluingJson>,
    #[serde(rename = "vertexOrders")]
    vertex_orders: BTreeMap<String, u32>,
}

fn c2(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}
fn cx(a: [f64; 2]) -> Complex64 {
    Complex64::new(a[0], a[1])
}

impl CubicSurface {
    pub fn to_json(&self) -> String {
        let j = SurfaceJson {
            triangles: self
                .triangles
                .iter()
                .map(|t| [c2(t[0]), c2(t[1]), c2(t[2])])
                .collect(),
            gluings: self
                .gluings
                .iter()
                .map(|g| GluingJson {
                    edge_a: [g.edge_a.tri, g.edge_a.side],
                    edge_b: [g.edge_b.tri, g.edge_b.side],
                    rot: g.rot,
                    trans: c2(g.trans),
                })
                .collect(),
            vertex_orders: self
                .vertex_orders
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        };
        serde_json::to_string_pretty(&j).expect("surface serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, SurfaceError> {
        let j: SurfaceJson =
            serde_json::from_str(text).map_err(|e| SurfaceError::Json(e.to_string()))?;
        let triangles = j
            .triangles
            .iter()
            .map(|t| [cx(t[0]), cx(t[1]), cx(t[2])])
            .collect();
        let gluings = j
            .gluings
            .iter()
            .map(|g| Gluing {
                edge_a: EdgeRef {
                    tri: g.edge_a[0],
                    side: g.edge_a[1],
                },
                edge_b: EdgeRef {
                    tri: g.edge_b[0],
                    side: g.edge_b[1],
                },
                rot: g.rot,
                trans: cx(g.trans),
            })
            .collect();
        let mut orders = BTreeMap::new();
        for (k, v) in j.vertex_orders {
            let id: usize = k
                .parse()
                .map_err(|_| SurfaceError::Json(format!("bad vertex class key {k:?}")))?;
            orders.insert(id, v);
        }
        CubicSurface::new(triangles, gluings, orders)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentJson {
    start: usize,
    end: usize,
    period: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct TurnJson {
    left: f64,
    right: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathJson {
    segments: Vec<SegmentJson>,
    closed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    turns: Option<Vec<TurnJson>>,
}

impl GeodesicPath {
    pub fn to_json(&self) -> String {
        let j = PathJson {
            segments: self
                .segments
                .iter()
                .map(|s| SegmentJson {
                    start: s.start_zero,
                    end: s.end_zero,
                    period: c2(s.period),
                })
                .collect(),
            closed: self.closed,
            turns: Some(
                self.turns
                    .iter()
                    .map(|t| TurnJson {
                        left: t.left,
                        right: t.right,
                    })
                    .collect(),
            ),
        };
        serde_json::to_string_pretty(&j).expect("path serialises")
    }

    /// Parse a path file. Zero orders come from `surface` (regular points
    /// when absent). Missing turn angles are recovered from the continued
    /// chart: the left angle is the representative of
    /// `π - (arg p_{i+1} - arg p_i)` in `[π, cone - π]`.
    pub fn from_json(text: &str, surface: Option<&CubicSurface>) -> Result<Self, SurfaceError> {
        let j: PathJson =
            serde_json::from_str(text).map_err(|e| SurfaceError::Json(e.to_string()))?;
        let segs: Vec<SaddleConnection> = j
            .segments
            .iter()
            .map(|s| SaddleConnection::new(s.start, s.end, cx(s.period)))
            .collect::<Result<_, _>>()?;
        if segs.is_empty() {
            return Err(SurfaceError::DegeneratePath);
        }
        let nturn = if j.closed { segs.len() } else { segs.len() - 1 };
        let order_of = |z: usize| surface.map(|s| s.order(z)).unwrap_or(0);
        let turns = match j.turns {
            Some(t) => {
                if t.len() != nturn {
                    return Err(SurfaceError::InvalidPath("turn count mismatch".into()));
                }
                t.iter()
                    .enumerate()
                    .map(|(i, t)| Turn {
                        left: t.left,
                        right: t.right,
                        order: order_of(segs[i].end_zero),
                    })
                    .collect()
            }
            None => (0..nturn)
                .map(|i| {
                    let a = &segs[i];
                    let b = &segs[(i + 1) % segs.len()];
                    let k = order_of(a.end_zero);
                    let total = TAU * (1.0 + k as f64 / 3.0);
                    let base = wrap_2pi(PI - (b.period.arg() - a.period.arg()));
                    let mut left = base;
                    while left < PI - ANGLE_TOL {
                        left += TAU;
                    }
                    if left > total - PI + ANGLE_TOL {
                        return Err(SurfaceError::InvalidPath(format!(
                            "turn {i} cannot satisfy the angle condition"
                        )));
                    }
                    Ok(Turn::with_left(left, k))
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        GeodesicPath::new(segs, turns, j.closed)
    }
}
