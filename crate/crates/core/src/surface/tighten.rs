//! Straightening edge paths into geodesic representatives.
//!
//! A path is kept as a list of straight legs between vertices. While some
//! vertex has a side angle below `π`, the two legs at it are replaced by
//! the taut string on that side: the convex chain, facing the vertex, of
//! the marked points visible inside the triangle spanned by the legs.
//! Every replacement strictly shortens the path.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::develop::{direction_at_position, trace_ray, visible_marked, RayHit, Stop};
use super::{cross, Corner, CubicSurface, EdgeRef, GeodesicPath, SaddleConnection, SurfaceError, Turn, ANGLE_TOL};

/// Oriented triangle edges `v[side] -> v[side + 1]`, consecutive edges
/// sharing a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePath {
    pub edges: Vec<EdgeRef>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TightenConfig {
    pub max_iterations: usize,
}

impl Default for TightenConfig {
    fn default() -> Self {
        TightenConfig {
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    start: Corner,
    /// Departure direction in the chart of `start.tri`.
    start_dir: Complex64,
    end: Corner,
    /// Direction back along the leg, in the chart of `end.tri`.
    end_dir: Complex64,
    len: f64,
}

impl Leg {
    fn from_edge(surface: &CubicSurface, e: EdgeRef) -> Leg {
        let t = &surface.triangles()[e.tri];
        let a = t[e.side];
        let b = t[(e.side + 1) % 3];
        Leg {
            start: Corner {
                tri: e.tri,
                corner: e.side,
            },
            start_dir: b - a,
            end: Corner {
                tri: e.tri,
                corner: (e.side + 1) % 3,
            },
            end_dir: a - b,
            len: (b - a).norm(),
        }
    }
}

fn class_angle(surface: &CubicSurface, class: usize) -> f64 {
    surface.classes()[class].angle
}

/// Side angles `(left, right)` at the vertex joining `a` and `b`.
fn side_angles(surface: &CubicSurface, a: &Leg, b: &Leg) -> Result<(f64, f64), SurfaceError> {
    let class = surface.class_of(a.end);
    let vc = &surface.classes()[class];
    if !vc.interior {
        return Err(SurfaceError::BoundaryVertex(class));
    }
    let p_in = surface.angle_position(a.end, a.end_dir);
    let p_out = surface.angle_position(b.start, b.start_dir);
    let mut left = (p_in - p_out).rem_euclid(vc.angle);
    if vc.angle - left < ANGLE_TOL * 1e-3 {
        left = 0.0;
    }
    Ok((left, vc.angle - left))
}

fn position(surface: &CubicSurface, c: Corner, d: Complex64) -> f64 {
    surface.angle_position(c, d)
}

/// Trace one leg from a vertex at the given angle position.
fn trace_leg(surface: &CubicSurface, class: usize, pos: f64, len: f64, want: usize) -> Result<Leg, SurfaceError> {
    let (c, d) = direction_at_position(surface, class, pos);
    match trace_ray(surface, c, d, len * (1.0 + 1e-6) + 1e-12, Stop::AtLength(len)) {
        RayHit::Vertex(end) => {
            let got = end.displacement.norm();
            let end_class = surface.class_of(end.corner);
            if end_class != want || (got - len).abs() > 1e-6 * (1.0 + len) {
                return Err(SurfaceError::NotConverged(0));
            }
            Ok(Leg {
                start: c,
                start_dir: d,
                end: end.corner,
                end_dir: end.map.inverse().apply_dir(-end.displacement),
                len: got,
            })
        }
        _ => Err(SurfaceError::NotConverged(0)),
    }
}

struct Sweep {
    /// Chain from the start of the first leg to the end of the second, as
    /// planar points with vertex records.
    chain: Vec<(Complex64, Option<(Corner, Complex64)>)>,
}

fn lower_chain(a: Complex64, b: Complex64, pts: &[(Complex64, (Corner, Complex64))]) -> Sweep {
    // frame with a at 0 and b on the positive real axis; the swept vertex
    // lies below the axis
    let ab = b - a;
    let rot = ab.conj() / ab.norm();
    let to_local = |z: Complex64| (z - a) * rot;
    let mut items: Vec<(Complex64, Complex64, Option<(Corner, Complex64)>)> = vec![(to_local(a), a, None)];
    for &(z, r) in pts {
        items.push((to_local(z), z, Some(r)));
    }
    items.push((to_local(b), b, None));
    let first = items.remove(0);
    let last = items.pop().unwrap();
    items.sort_by(|x, y| x.0.re.total_cmp(&y.0.re));
    let mut seq = vec![first];
    seq.extend(items);
    seq.push(last);
    // monotone chain keeping collinear points: drop right turns, which
    // bulge away from the vertex
    let mut hull: Vec<(Complex64, Complex64, Option<(Corner, Complex64)>)> = Vec::new();
    for p in seq {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2].0;
            let m = hull[hull.len() - 1].0;
            let c = cross(m - o, p.0 - o);
            if c < -1e-12 * (1.0 + (p.0 - o).norm_sqr()) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Sweep {
        chain: hull.into_iter().map(|(_, z, r)| (z, r)).collect(),
    }
}

/// Straighten legs `a` (ending at v) and `b` (leaving v) on their narrow
/// side; returns replacement legs.
fn shortcut(surface: &CubicSurface, a: &Leg, b: &Leg, left: f64, right: f64) -> Result<Vec<Leg>, SurfaceError> {
    let v = surface.class_of(a.end);
    let total = class_angle(surface, v);
    let p_in = position(surface, a.end, a.end_dir);
    let p_out = position(surface, b.start, b.start_dir);
    // planar picture at v: the narrow wedge runs counterclockwise from
    // angle position `base` through `span`
    let (base, span) = if left <= right { (p_out, left) } else { (p_in, right) };
    let start_class = surface.class_of(a.start);
    let end_class = surface.class_of(b.end);
    // backtracking: the legs overlap
    if span < ANGLE_TOL {
        if (a.len - b.len).abs() <= 1e-9 * (1.0 + a.len) {
            return Ok(Vec::new());
        }
        if a.len > b.len {
            let pos = position(surface, a.start, a.start_dir);
            return Ok(vec![trace_leg(surface, start_class, pos, a.len - b.len, end_class)?]);
        }
        let pos = position(surface, b.end, b.end_dir);
        let rev = trace_leg(surface, end_class, pos, b.len - a.len, start_class)?;
        return Ok(vec![reverse_leg(&rev)]);
    }
    let polar = |pos: f64, r: f64| Complex64::from_polar(r, (pos - base).rem_euclid(total));
    let za = polar(p_in, a.len);
    let zb = polar(p_out, b.len);
    let radius = a.len.max(b.len);
    let mut pts = Vec::new();
    for rec in visible_marked(surface, v, radius * (1.0 + 1e-9)) {
        let rel = (rec.start_pos - base).rem_euclid(total);
        if rel <= ANGLE_TOL || rel >= span - ANGLE_TOL {
            continue;
        }
        let z = Complex64::from_polar(rec.connection.period.norm(), rel);
        // on the vertex side of the segment a-b, or on it
        let o_side = cross(zb - za, -za);
        if cross(zb - za, z - za) * o_side.signum() >= -1e-12 * (1.0 + z.norm_sqr()) {
            pts.push((z, (rec.end, rec.end_dir)));
        }
    }
    // the vertex must lie below the a -> b axis for `lower_chain`; when it
    // does not, mirror the picture
    let below = cross(zb - za, -za) < 0.0;
    let sweep = if below {
        lower_chain(za, zb, &pts)
    } else {
        let m: Vec<_> = pts.iter().map(|&(z, r)| (z.conj(), r)).collect();
        let mut s = lower_chain(za.conj(), zb.conj(), &m);
        s.chain.iter_mut().for_each(|(z, _)| *z = z.conj());
        s
    };
    let chain = sweep.chain;
    let mut legs = Vec::with_capacity(chain.len() - 1);
    // departure at the first point: rotate the old leg's direction
    let mut from_class = start_class;
    let mut from_pos = {
        let to_v = -chain[0].0;
        let to_next = chain[1].0 - chain[0].0;
        position(surface, a.start, a.start_dir) + (to_next / to_v).arg()
    };
    for i in 0..chain.len() - 1 {
        let len = (chain[i + 1].0 - chain[i].0).norm();
        let want = match chain[i + 1].1 {
            Some((c, _)) => surface.class_of(c),
            None => end_class,
        };
        let leg = trace_leg(surface, from_class, from_pos, len, want)?;
        legs.push(leg);
        if let Some((c, back)) = chain[i + 1].1 {
            from_class = surface.class_of(c);
            let to_v = -chain[i + 1].0;
            let to_next = chain[i + 2].0 - chain[i + 1].0;
            from_pos = position(surface, c, back) + (to_next / to_v).arg();
        }
    }
    Ok(legs)
}

fn reverse_leg(l: &Leg) -> Leg {
    Leg {
        start: l.end,
        start_dir: l.end_dir,
        end: l.start,
        end_dir: l.start_dir,
        len: l.len,
    }
}

/// Replace an edge path by a geodesic representative of its homotopy
/// class (endpoints fixed for open paths). Legs through unmarked vertices
/// at straight angles are merged.
pub fn tighten_path(surface: &CubicSurface, path: &EdgePath, config: TightenConfig) -> Result<GeodesicPath, SurfaceError> {
    if path.edges.is_empty() {
        return Err(SurfaceError::DegeneratePath);
    }
    let mut legs: Vec<Leg> = path.edges.iter().map(|&e| Leg::from_edge(surface, e)).collect();
    for (i, e) in path.edges.iter().enumerate() {
        if e.tri >= surface.triangles().len() || e.side > 2 {
            return Err(SurfaceError::Disconnected(format!("edge {i} does not exist")));
        }
    }
    let n = legs.len();
    let joints = if path.closed { n } else { n - 1 };
    for i in 0..joints {
        let a = surface.class_of(legs[i].end);
        let b = surface.class_of(legs[(i + 1) % n].start);
        if a != b {
            return Err(SurfaceError::Disconnected(format!("edges {i} and {} do not meet", (i + 1) % n)));
        }
    }
    let mut iterations = 0;
    loop {
        if legs.is_empty() {
            return Err(SurfaceError::DegeneratePath);
        }
        let n = legs.len();
        let joints = if path.closed { n } else { n - 1 };
        let mut changed = false;
        for i in 0..joints {
            let j = (i + 1) % n;
            let (left, right) = side_angles(surface, &legs[i], &legs[j])?;
            let class = surface.class_of(legs[i].end);
            if left < PI - ANGLE_TOL || right < PI - ANGLE_TOL {
                iterations += 1;
                if iterations > config.max_iterations {
                    return Err(SurfaceError::NotConverged(config.max_iterations));
                }
                let repl = shortcut(surface, &legs[i], &legs[j], left, right)?;
                splice(&mut legs, i, j, repl, path.closed);
                changed = true;
                break;
            }
            if !surface.is_marked(class) {
                // straight through a regular point
                let merged = Leg {
                    start: legs[i].start,
                    start_dir: legs[i].start_dir,
                    end: legs[j].end,
                    end_dir: legs[j].end_dir,
                    len: legs[i].len + legs[j].len,
                };
                if n == 1 {
                    // closed loop through a single regular point: no zero
                    // to anchor it
                    return Err(SurfaceError::DegeneratePath);
                }
                splice(&mut legs, i, j, vec![merged], path.closed);
                changed = true;
                break;
            }
        }
        if !changed {
            break;
        }
    }
    build_path(surface, &legs, path.closed)
}

fn splice(legs: &mut Vec<Leg>, i: usize, j: usize, repl: Vec<Leg>, closed: bool) {
    if j > i {
        legs.splice(i..=j, repl);
    } else {
        // wrap-around joint of a closed path: last leg and first leg
        debug_assert!(closed);
        legs.pop();
        legs.remove(0);
        legs.extend(repl);
    }
}

fn build_path(surface: &CubicSurface, legs: &[Leg], closed: bool) -> Result<GeodesicPath, SurfaceError> {
    let n = legs.len();
    let joints = if closed { n } else { n - 1 };
    let mut turns = Vec::with_capacity(joints);
    for i in 0..joints {
        let (left, _) = side_angles(surface, &legs[i], &legs[(i + 1) % n])?;
        let k = surface.order(surface.class_of(legs[i].end));
        turns.push(Turn::with_left(left, k));
    }
    let mut dir = legs[0].start_dir.arg();
    let mut segs = Vec::with_capacity(n);
    for (i, l) in legs.iter().enumerate() {
        if i > 0 {
            dir += PI - turns[i - 1].left;
        }
        segs.push(SaddleConnection::new(
            surface.class_of(l.start),
            surface.class_of(l.end),
            Complex64::from_polar(l.len, dir),
        )?);
    }
    GeodesicPath::new(segs, turns, closed)
}
