//! Straight-line development: ray tracing and saddle-connection search.

use num_complex::Complex64;

use super::{cross, ChartMap, Corner, CubicSurface, EdgeRef, SaddleConnection, SurfaceError};
use crate::omega_pow;

const HIT_TOL: f64 = 1e-9;

/// Where a traced ray stopped.
#[derive(Debug, Clone)]
pub(crate) enum RayHit {
    /// Reached a marked vertex (or, with `stop_at_any`, any vertex).
    Vertex(RayEnd),
    Boundary,
    TooFar,
}

#[derive(Debug, Clone)]
pub(crate) struct RayEnd {
    pub corner: Corner,
    /// Chart map of `corner.tri` into the development chart.
    pub map: ChartMap,
    /// Displacement from the origin in the development chart.
    pub displacement: Complex64,
    pub triangles: Vec<usize>,
}

/// Development-chart map for a corner so that its chart direction `chart`
/// lines up with the development direction `dev`, and its vertex lands at
/// `at`.
fn align(surface: &CubicSurface, c: Corner, chart: Complex64, dev: Complex64, at: Complex64) -> ChartMap {
    let rot = (0..3)
        .min_by(|&a, &b| {
            let ea = (omega_pow(a) * chart / chart.norm() - dev / dev.norm()).norm();
            let eb = (omega_pow(b) * chart / chart.norm() - dev / dev.norm()).norm();
            ea.total_cmp(&eb)
        })
        .unwrap_or(0);
    let v = surface.vertex_pos(c);
    ChartMap {
        rot,
        trans: at - omega_pow(rot) * v,
    }
}

/// Direction at a corner, in that triangle's chart, for a given angle
/// position around the vertex.
pub(crate) fn direction_at_position(surface: &CubicSurface, class: usize, pos: f64) -> (Corner, Complex64) {
    let vc = &surface.classes()[class];
    let mut pos = pos;
    if vc.interior {
        pos = pos.rem_euclid(vc.angle);
    }
    let mut idx = 0;
    for (i, &o) in vc.offsets.iter().enumerate() {
        if pos + 1e-12 >= o {
            idx = i;
        }
    }
    let c = vc.corners[idx];
    let t = &surface.triangles()[c.tri];
    let e = t[(c.corner + 1) % 3] - t[c.corner];
    let d = e / e.norm() * Complex64::from_polar(1.0, pos - vc.offsets[idx]);
    (c, d)
}

/// Continue a ray arriving at vertex corner `c` (development map `map`)
/// in development direction `dir`. Returns the corner and chart direction
/// of the straight continuation, or `None` for boundary vertices.
fn continue_straight(surface: &CubicSurface, c: Corner, map: &ChartMap, dir: Complex64) -> Option<(Corner, Complex64)> {
    let class = surface.class_of(c);
    let vc = &surface.classes()[class];
    if !vc.interior {
        return None;
    }
    let back = map.inverse().apply_dir(-dir);
    let pos = surface.angle_position(c, back);
    Some(direction_at_position(surface, class, pos + std::f64::consts::PI))
}

/// Does chart direction `d` at corner `c` lie along the corner's outgoing
/// edge (0), incoming edge (1), strictly inside (2) or outside (3)?
fn corner_relation(surface: &CubicSurface, c: Corner, d: Complex64) -> u8 {
    let t = &surface.triangles()[c.tri];
    let p = t[c.corner];
    let a = t[(c.corner + 1) % 3] - p;
    let b = t[(c.corner + 2) % 3] - p;
    let dn = d / d.norm();
    let ca = cross(a / a.norm(), dn);
    let cb = cross(dn, b / b.norm());
    let dota = a.re * dn.re + a.im * dn.im;
    let dotb = b.re * dn.re + b.im * dn.im;
    if ca.abs() <= HIT_TOL && dota > 0.0 {
        0
    } else if cb.abs() <= HIT_TOL && dotb > 0.0 {
        1
    } else if ca > 0.0 && cb > 0.0 {
        2
    } else {
        3
    }
}

/// When a traced ray may stop at a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Stop {
    /// First marked vertex.
    Marked,
    /// First marked vertex, or any vertex at this distance.
    AtLength(f64),
}

/// Trace a straight ray from vertex corner `start` in chart direction
/// `dir` for at most `max_len`. Unmarked interior vertices are passed
/// straight through.
pub(crate) fn trace_ray(
    surface: &CubicSurface,
    start: Corner,
    dir: Complex64,
    max_len: f64,
    stop: Stop,
) -> RayHit {
    let d = dir / dir.norm();
    // development chart = chart of the start triangle
    let mut origin_map = ChartMap::IDENTITY;
    let origin = surface.vertex_pos(start);
    let mut corner = start;
    let mut chart_dir = d;
    let mut travelled = 0.0;
    let mut base = origin;
    let dev_dir = d;
    let mut tris = Vec::new();
    let guard_max = 100_000;
    let mut guard = 0;
    'segments: loop {
        guard += 1;
        if guard > guard_max {
            return RayHit::TooFar;
        }
        // locate the corner the ray leaves through
        let mut rel = corner_relation(surface, corner, chart_dir);
        if rel == 3 {
            // numerically just outside: try neighbouring corners of the fan
            let class = surface.class_of(corner);
            let pos = surface.angle_position(corner, chart_dir);
            let (c2, d2) = direction_at_position(surface, class, pos);
            let m2 = align(surface, c2, d2, dev_dir, base);
            corner = c2;
            chart_dir = d2;
            origin_map = m2;
            rel = corner_relation(surface, corner, chart_dir);
            if rel == 3 {
                return RayHit::TooFar;
            }
        }
        let map = origin_map;
        let t = surface.triangles()[corner.tri];
        tris.push(corner.tri);
        let along = |k: usize| -> Option<RayHit> {
            let next = Corner {
                tri: corner.tri,
                corner: (corner.corner + k) % 3,
            };
            let len = (t[next.corner] - t[corner.corner]).norm();
            if travelled + len > max_len + HIT_TOL * (1.0 + max_len) {
                return Some(RayHit::TooFar);
            }
            Some(RayHit::Vertex(RayEnd {
                corner: next,
                map,
                displacement: base + dev_dir * len - origin,
                triangles: Vec::new(),
            }))
        };
        let end = match rel {
            0 => along(1),
            1 => along(2),
            _ => None,
        };
        let hit = if let Some(h) = end {
            h
        } else {
            // strictly inside the corner: walk through triangles
            let mut tri = corner.tri;
            let mut m = map;
            let mut exit_side = (corner.corner + 1) % 3;
            loop {
                guard += 1;
                if guard > guard_max {
                    return RayHit::TooFar;
                }
                let tt = surface.triangles()[tri];
                let p = m.apply(tt[exit_side]);
                let q = m.apply(tt[(exit_side + 1) % 3]);
                // distance along the ray to the exit edge
                let denom = cross(dev_dir, q - p);
                let dist = if denom.abs() > 0.0 {
                    cross(p - base, q - p) / denom
                } else {
                    f64::INFINITY
                };
                if travelled + dist > max_len + HIT_TOL * (1.0 + max_len) {
                    return RayHit::TooFar;
                }
                let Some((nb, tm)) = surface.neighbor(EdgeRef { tri, side: exit_side }) else {
                    return RayHit::Boundary;
                };
                m = m.compose(&tm.inverse());
                tri = nb.tri;
                tris.push(tri);
                let e = nb.side;
                let nt = surface.triangles()[tri];
                let a = m.apply(nt[e]);
                let cpt = m.apply(nt[(e + 2) % 3]);
                let rc = cpt - base;
                let s = cross(dev_dir, rc);
                if s.abs() <= HIT_TOL * rc.norm() {
                    let len = rc.re * dev_dir.re + rc.im * dev_dir.im;
                    if travelled + len > max_len + HIT_TOL * (1.0 + max_len) {
                        return RayHit::TooFar;
                    }
                    break RayHit::Vertex(RayEnd {
                        corner: Corner {
                            tri,
                            corner: (e + 2) % 3,
                        },
                        map: m,
                        displacement: cpt - origin,
                        triangles: Vec::new(),
                    });
                }
                let a_left = cross(dev_dir, a - base) > 0.0;
                let c_left = s > 0.0;
                // exit through the edge joining C to the entry endpoint on
                // the other side of the ray
                exit_side = if c_left == a_left { (e + 1) % 3 } else { (e + 2) % 3 };
            }
        };
        match hit {
            RayHit::Vertex(mut end) => {
                let class = surface.class_of(end.corner);
                let len = end.displacement.norm();
                let at_target = matches!(stop, Stop::AtLength(l) if (len - l).abs() <= 1e-7 * (1.0 + l));
                if at_target || surface.is_marked(class) {
                    end.triangles = tris;
                    return RayHit::Vertex(end);
                }
                match continue_straight(surface, end.corner, &end.map, dev_dir) {
                    Some((c2, d2)) => {
                        base = origin + end.displacement;
                        travelled = len;
                        origin_map = align(surface, c2, d2, dev_dir, base);
                        corner = c2;
                        chart_dir = d2;
                        continue 'segments;
                    }
                    None => return RayHit::Boundary,
                }
            }
            other => return other,
        }
    }
}

/// A saddle connection with the combinatorial data used for deduplication
/// and later straightening.
#[derive(Debug, Clone)]
pub struct ConnectionRecord {
    pub connection: SaddleConnection,
    pub start: Corner,
    /// Direction in the chart of `start.tri`.
    pub start_dir: Complex64,
    pub end: Corner,
    /// Direction back towards the start, in the chart of `end.tri`.
    pub end_dir: Complex64,
    pub(crate) start_pos: f64,
    pub(crate) end_pos: f64,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub connections: Vec<SaddleConnection>,
    pub records: Vec<ConnectionRecord>,
    /// Rays that left a bordered surface before reaching `max_length`.
    pub clipped: usize,
}

impl Enumeration {
    /// Fail when the search was incomplete on a bordered surface.
    pub fn strict(self) -> Result<Self, SurfaceError> {
        if self.clipped > 0 {
            Err(SurfaceError::UnboundedSearch {
                clipped: self.clipped,
            })
        } else {
            Ok(self)
        }
    }
}

struct Search<'a> {
    surface: &'a CubicSurface,
    max_len: f64,
    found: Vec<ConnectionRecord>,
    clipped: usize,
}

impl<'a> Search<'a> {
    fn record(&mut self, start: Corner, start_dir: Complex64, end: &RayEnd) {
        let s = self.surface;
        let back = end.map.inverse().apply_dir(-end.displacement);
        let rec = ConnectionRecord {
            connection: SaddleConnection {
                start_zero: s.class_of(start),
                end_zero: s.class_of(end.corner),
                period: end.displacement,
            },
            start,
            start_dir,
            end: end.corner,
            end_dir: back,
            start_pos: norm_pos(s, start, s.angle_position(start, start_dir)),
            end_pos: norm_pos(s, end.corner, s.angle_position(end.corner, back)),
        };
        self.found.push(rec);
    }

    fn ray(&mut self, start: Corner, dir: Complex64) {
        let s = self.surface;
        match trace_ray(s, start, dir, self.max_len, Stop::Marked) {
            RayHit::Vertex(end) => {
                let dev_dir = dir;
                self.record(start, dev_dir, &end);
            }
            RayHit::Boundary => self.clipped += 1,
            RayHit::TooFar => {}
        }
    }

    /// Open wedge `(lo, hi)` at the origin vertex (development chart =
    /// chart of the start triangle), entering `tri` through `side`.
    #[allow(clippy::too_many_arguments)]
    fn wedge(&mut self, start: Corner, origin: Complex64, tri: usize, map: ChartMap, side: usize, lo: Complex64, hi: Complex64, depth: usize) {
        if depth > 10_000 {
            return;
        }
        let s = self.surface;
        let t = s.triangles()[tri];
        let a = map.apply(t[side]) - origin;
        let b = map.apply(t[(side + 1) % 3]) - origin;
        if seg_distance(a, b) > self.max_len {
            return;
        }
        let Some((nb, tm)) = s.neighbor(EdgeRef { tri, side }) else {
            self.clipped += 1;
            return;
        };
        let m = map.compose(&tm.inverse());
        let nt = s.triangles()[nb.tri];
        let e = nb.side;
        let na = m.apply(nt[e]) - origin;
        let c = m.apply(nt[(e + 2) % 3]) - origin;
        let s_lo = cross(lo, c) / (lo.norm() * c.norm());
        let s_hi = cross(c, hi) / (hi.norm() * c.norm());
        // which entry endpoint sits on the clockwise (lo) side
        let na_is_lo = cross(na, m.apply(nt[(e + 1) % 3]) - origin) > 0.0;
        let side_c_lo = if na_is_lo { (e + 2) % 3 } else { (e + 1) % 3 };
        let side_c_hi = if na_is_lo { (e + 1) % 3 } else { (e + 2) % 3 };
        if s_lo > HIT_TOL && s_hi > HIT_TOL {
            if c.norm() <= self.max_len * (1.0 + HIT_TOL) {
                let dir = c / c.norm();
                self.ray(start, dir);
            }
            self.wedge(start, origin, nb.tri, m, side_c_lo, lo, c, depth + 1);
            self.wedge(start, origin, nb.tri, m, side_c_hi, c, hi, depth + 1);
        } else if s_lo <= HIT_TOL {
            self.wedge(start, origin, nb.tri, m, side_c_hi, lo, hi, depth + 1);
        } else {
            self.wedge(start, origin, nb.tri, m, side_c_lo, lo, hi, depth + 1);
        }
    }

    fn from_corner(&mut self, c: Corner) {
        let s = self.surface;
        let t = s.triangles()[c.tri];
        let p = t[c.corner];
        let lo = t[(c.corner + 1) % 3] - p;
        let hi = t[(c.corner + 2) % 3] - p;
        self.ray(c, lo);
        let incoming = EdgeRef {
            tri: c.tri,
            side: (c.corner + 2) % 3,
        };
        if s.neighbor(incoming).is_none() {
            self.ray(c, hi);
        }
        self.wedge(c, p, c.tri, ChartMap::IDENTITY, (c.corner + 1) % 3, lo, hi, 0);
    }
}

/// Marked vertices reachable by straight rays of length at most `radius`
/// from vertex class `class`, with the ray data at both ends.
pub(crate) fn visible_marked(surface: &CubicSurface, class: usize, radius: f64) -> Vec<ConnectionRecord> {
    let mut search = Search {
        surface,
        max_len: radius,
        found: Vec::new(),
        clipped: 0,
    };
    for &c in &surface.classes()[class].corners {
        search.from_corner(c);
    }
    search.found
}

fn norm_pos(s: &CubicSurface, c: Corner, pos: f64) -> f64 {
    let vc = &s.classes()[s.class_of(c)];
    if vc.interior {
        let p = pos.rem_euclid(vc.angle);
        if vc.angle - p < 1e-8 {
            0.0
        } else {
            p
        }
    } else {
        pos
    }
}

fn seg_distance(a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return a.norm();
    }
    let t = (-(a.re * d.re + a.im * d.im) / l2).clamp(0.0, 1.0);
    (a + d * t).norm()
}

/// All saddle connections of length at most `max_length` between marked
/// vertices, each listed once, sorted by length, angle and start zero.
/// On bordered surfaces rays that leave the surface are counted in
/// `clipped`; call [`Enumeration::strict`] to turn that into an error.
pub fn enumerate_saddle_connections(surface: &CubicSurface, max_length: f64) -> Result<Enumeration, SurfaceError> {
    if !(max_length > 0.0) || !max_length.is_finite() {
        return Err(SurfaceError::Malformed("max_length must be positive".into()));
    }
    let mut search = Search {
        surface,
        max_len: max_length,
        found: Vec::new(),
        clipped: 0,
    };
    for (id, vc) in surface.classes().iter().enumerate() {
        if !surface.is_marked(id) {
            continue;
        }
        for &c in &vc.corners {
            search.from_corner(c);
        }
    }
    let Search { found, clipped, .. } = search;
    // canonical orientation: the endpoint with the smaller (class, position)
    let mut canon: Vec<ConnectionRecord> = found
        .into_iter()
        .map(|r| {
            let ks = (r.connection.start_zero, r.start_pos);
            let ke = (r.connection.end_zero, r.end_pos);
            if ke.0 < ks.0 || (ke.0 == ks.0 && ke.1 < ks.1 - 1e-8) {
                ConnectionRecord {
                    connection: SaddleConnection {
                        start_zero: r.connection.end_zero,
                        end_zero: r.connection.start_zero,
                        period: r.end_dir / r.end_dir.norm() * r.connection.period.norm(),
                    },
                    start: r.end,
                    start_dir: r.end_dir,
                    end: r.start,
                    end_dir: r.start_dir,
                    start_pos: r.end_pos,
                    end_pos: r.start_pos,
                }
            } else {
                r
            }
        })
        .collect();
    canon.sort_by(|a, b| {
        a.connection
            .start_zero
            .cmp(&b.connection.start_zero)
            .then(a.start_pos.total_cmp(&b.start_pos))
    });
    canon.dedup_by(|b, a| {
        a.connection.start_zero == b.connection.start_zero
            && (a.start_pos - b.start_pos).abs() < 1e-7
            && (a.connection.length() - b.connection.length()).abs() < 1e-7 * (1.0 + a.connection.length())
    });
    canon.sort_by(|a, b| {
        let (x, y) = (&a.connection, &b.connection);
        x.length()
            .total_cmp(&y.length())
            .then(x.angle().total_cmp(&y.angle()))
            .then(x.start_zero.cmp(&y.start_zero))
    });
    Ok(Enumeration {
        connections: canon.iter().map(|r| r.connection).collect(),
        records: canon,
        clipped,
    })
}

