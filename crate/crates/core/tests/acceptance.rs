//! Acceptance run: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::time::Instant;

use hitchin_limits::building;
use hitchin_limits::frame::{self, ChartPiece, FlatModel, SweepSpec};
use hitchin_limits::polygon::{self, FlipState};
use hitchin_limits::surface::{self, classify_direction, DirectionTag};
use hitchin_limits::trigroup;
use hitchin_limits::wang::{self, GridSpec};
use hitchin_limits::Complex64;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let from = Complex64::new(0.1, 0.1);
    for &l in &[0.5, 1.0, 2.0] {
        for j in 0..8 {
            let th = 0.3 + j as f64 * PI / 4.0;
            for &sl3 in &[1.0, 10.0, 100.0, 1000.0] {
                let s = sl3 / (l * l * l);
                let d = Complex64::from_polar(l, th);
                let path = [ChartPiece::Segment { from, to: from + d }];
                let num = frame::integrate_transport(&FlatModel { k: 0, s }, &path).map_err(err)?;
                // the flat transport is `S·diag(e^λ)·Sᵀ` with `λ` the slot exponents
                let mut exact = frame::slot_exponents(d * s.cbrt());
                exact.sort_by(|a, b| b.total_cmp(a));
                let mut got = num.log_singular_values();
                got.sort_by(|a, b| b.total_cmp(a));
                for i in 0..3 {
                    worst = worst.max((got[i] - exact[i]).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-8, format!("max log singular value error {worst:.3e} over 96 segments"))
}

fn criterion_2() -> Outcome {
    let s_list = [1e2, 1e3, 1e4];
    let segments = [
        ("radial", Complex64::from_polar(0.3, 0.2), Complex64::from_polar(0.8, 0.2)),
        ("chordal", Complex64::from_polar(0.6, -0.25), Complex64::from_polar(0.6, 0.35)),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for k in [1u32, 2] {
        for (name, from, to) in segments {
            let spec = SweepSpec {
                k,
                from,
                to,
                radius: 1.0,
                grid: GridSpec::default(),
            };
            let rows = frame::convergence_sweep(&spec, &s_list).map_err(err)?;
            let scale = rows[0].target.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for j in 0..3 {
                let e: Vec<f64> = rows.iter().map(|r| (r.numeric[j] - r.target[j]).abs()).collect();
                let monotone = e.windows(2).all(|w| w[1] < w[0]);
                let last = e[2] / scale;
                ok &= monotone && last <= 0.05;
                if !monotone {
                    notes.push(format!("k={k} {name} j={} not decreasing {e:?}", j + 1));
                }
            }
            notes.push(format!("k={k} {name} gap {:.2e}", rows[2].gap));
        }
    }
    ensure(ok, notes.join("; "))
}

fn criterion_3() -> Outcome {
    let s_list = [1e2, 1e3, 1e4];
    let mut notes = Vec::new();
    let mut ok = true;
    for k in [0u32, 1] {
        let step = PI / (k as f64 + 3.0);
        let th0 = 0.1 * step;
        let sols: Vec<Option<wang::WangSolution>> = s_list
            .par_iter()
            .map(|&s| if k == 0 { Ok(None) } else { wang::solve_disk(k, s, 1.0, GridSpec::with_nr(8000)).map(Some) })
            .collect::<Result<_, _>>()
            .map_err(err)?;
        for c in 1..=3 {
            let th1 = th0 + c as f64 * step;
            let crossings = polygon::stokes_crossings(frame::natural_angle(k, th0), frame::natural_angle(k, th1));
            let target = frame::arc_unipotent_target(k, th0, th1).map_err(err)?;
            let mats: Vec<Matrix3<f64>> = s_list
                .iter()
                .zip(&sols)
                .map(|(&s, sol)| {
                    let a = match sol {
                        None => frame::arc_unipotent_numeric(&FlatModel { k, s }, th0, th1, 0.9),
                        Some(w) => frame::arc_unipotent_numeric(w, th0, th1, 0.9),
                    };
                    a.map(|a| a.slots)
                })
                .collect::<Result<_, _>>()
                .map_err(err)?;
            let mut conv = 0.0f64;
            let mut decay = f64::INFINITY;
            for i in 0..3 {
                for j in 0..3 {
                    let t = target[(i, j)];
                    if t.abs() > 1e-12 {
                        conv = conv.max((mats[2][(i, j)] - t).abs() / t.abs());
                    } else {
                        let (a, b) = (mats[0][(i, j)].abs(), mats[2][(i, j)].abs());
                        ok &= b <= 0.1 * a;
                        if a > 0.0 {
                            decay = decay.min(a / b.max(1e-300));
                        }
                    }
                }
            }
            ok &= conv <= 0.10;
            notes.push(format!("k={k} rays={crossings} rel err {conv:.2e} min decay {decay:.1e}"));
        }
    }
    ensure(ok, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let s_list = [1e2, 1e3, 1e4];
    let c_lim = 3f64.sqrt() * 2f64.powf(2.0 / 3.0);
    let jobs: Vec<(u32, f64)> = [1u32, 2].iter().flat_map(|&k| s_list.iter().map(move |&s| (k, s))).collect();
    let res: Vec<(bool, f64)> = jobs
        .par_iter()
        .map(|&(k, s)| {
            let sol = wang::solve_disk(k, s, 1.0, GridSpec::with_nr(32000))?;
            Ok((wang::pointwise_lower_bound_check(&sol).holds, wang::error_field(&sol).decay / s.cbrt()))
        })
        .collect::<Result<_, wang::WangError>>()
        .map_err(err)?;
    let mut ok = res.iter().all(|r| r.0 && r.1 > 1.5 && r.1 < 2.75);
    let mut notes = Vec::new();
    for (k, chunk) in [1, 2].iter().zip(res.chunks(3)) {
        let m: Vec<f64> = chunk.iter().map(|r| r.1).collect();
        ok &= m.windows(2).all(|w| w[1] > w[0]);
        notes.push(format!("k={k} decay/s^(1/3) {:.4} {:.4} {:.4}", m[0], m[1], m[2]));
    }
    notes.push(format!("limit {c_lim:.4}"));
    ensure(ok, notes.join("; "))
}

fn det(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> f64 {
    Matrix3::from_columns(&[a, b, c]).determinant()
}

fn criterion_5() -> Outcome {
    let mut flip_err = 0.0f64;
    let mut incidence_ok = true;
    let mut configs = 0usize;
    let mut min_entry = f64::INFINITY;
    for n in 3..=12usize {
        let l = polygon::regular_lifts(n).map_err(err)?;
        for m in 0..(2 * n as i64) {
            let e = polygon::flip_matrix(&l, m).map_err(err)? - Matrix3::identity();
            flip_err = flip_err.max((e * e * e).amax());
        }
        let ni = n as i64;
        let r = |i: i64| l.r[i.rem_euclid(ni) as usize];
        let q = |i: i64| l.q[i.rem_euclid(ni) as usize];
        for i in 0..ni {
            incidence_ok &= det(r(i - 1), r(i), q(i)).abs() < 1e-10 && det(r(i + 1), r(i + 2), q(i)).abs() < 1e-10;
            for j in 0..ni {
                let d = det(r(i), r(i + 1), r(j));
                let on = j == i || j == (i + 1).rem_euclid(ni);
                incidence_ok &= if on { d.abs() < 1e-10 } else { d > 1e-10 };
            }
        }
        // every pair of open half-sectors with a turn in [π, cone − π]
        let total = 2.0 * PI * n as f64 / 3.0;
        let half = PI / 6.0;
        for a in 0..(4 * n) {
            let th = (a as f64 + 0.5) * half;
            let mut b = 1;
            while b as f64 * half <= total - PI + 1e-9 {
                let tau = b as f64 * half;
                b += 1;
                if tau < PI - 1e-9 {
                    continue;
                }
                let out = th + tau;
                if classify_direction(th).tag == DirectionTag::Stokes || classify_direction(out).tag == DirectionTag::Stokes {
                    continue;
                }
                let e = polygon::check_entry_nonzero(&l, th, out).map_err(err)?;
                configs += 1;
                min_entry = min_entry.min(e.value);
            }
        }
        let _ = FlipState::new(n).map_err(err)?;
    }
    let ok = flip_err <= 1e-9 && incidence_ok && min_entry > 0.0 && configs > 0;
    ensure(
        ok,
        format!("max |(M-I)^3| {flip_err:.1e}; incidences {incidence_ok}; {configs} turn configurations, min entry {min_entry:.3}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut notes = Vec::new();
    let mut ok = true;
    for k in 0..=3u32 {
        let a = building::sector_atlas(k);
        let n = a.len();
        ok &= n == 2 * (k as usize + 3);
        ok &= (0..n).all(|m| (a.subtended_angle(m) - PI / 3.0).abs() < 1e-12);
        let pairs: Vec<(Complex64, Complex64)> = (0..200)
            .map(|_| {
                let m = rng.gen_range(0..n);
                let s = &a.sectors[m];
                let mut pt = || Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(s.start..s.end));
                (pt(), pt())
            })
            .collect();
        let iso = building::flat_isometry_check(k, &pairs).map_err(err)?;
        ok &= iso <= 1e-10;
        let mut sep = f64::INFINITY;
        if n > 3 {
            for _ in 0..1000 {
                let i = rng.gen_range(0..n);
                let j = (i + rng.gen_range(2..n - 1)) % n;
                let wi = if rng.gen_bool(0.5) { a.sectors[i].start } else { a.sectors[i].end };
                let wj = if rng.gen_bool(0.5) { a.sectors[j].start } else { a.sectors[j].end };
                let z1 = Complex64::from_polar(rng.gen_range(0.01..1.0), wi);
                let z2 = Complex64::from_polar(rng.gen_range(0.01..1.0), wj);
                let d = a.image_distance(z1, z2);
                let r = a.eval_in(i, z1).norm().max(a.eval_in(j, z2).norm());
                sep = sep.min(d / r);
            }
        }
        ok &= sep > 0.0;
        let lp = a.loop_composition() == Some([0, 1, 2]);
        ok &= lp;
        notes.push(format!("k={k}: {n} sectors, isometry err {iso:.1e}, min d/r {sep:.3}, loop identity {lp}"));
    }
    ensure(ok, notes.join("; "))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut additive = 0;
    let mut deficits = 0;
    let mut min_deficit = f64::INFINITY;
    for _ in 0..100 {
        if building::weak_convexity_check(&building::sample_geodesic_path(&mut rng)) {
            additive += 1;
        }
    }
    for _ in 0..100 {
        let c = building::sample_corner(&mut rng);
        let d = building::convexity_defect(&c).map_err(err)?.x1();
        min_deficit = min_deficit.min(d);
        if d > 0.0 && !building::weak_convexity_check(&c) {
            deficits += 1;
        }
    }
    ensure(
        additive == 100 && deficits == 100,
        format!("{additive}/100 geodesics additive; {deficits}/100 corners with top deficit (min {min_deficit:.3e})"),
    )
}

fn criterion_8() -> Outcome {
    let o = trigroup::build_orbifold(3, 3, 4).map_err(err)?;
    let valid = surface::validate(&o.surface).is_empty();
    let v = o.valences();
    let val_ok = v[0].iter().all(|&x| x == 6) && v[1].iter().all(|&x| x == 6) && v[2].iter().all(|&x| x == 8);
    let orders = o.zero_orders();
    let classes = trigroup::closed_geodesics(&o.surface, 10.0, 6).map_err(err)?;
    let family = trigroup::default_family(&classes).ok_or("no two-class family")?;
    let probe = trigroup::boundary_injectivity_probe(&family, &trigroup::theta_grid(12)).map_err(err)?;
    let fixed = trigroup::spectrum_at(&classes, 2.0 * PI).map_err(err)? == trigroup::spectrum_at(&classes, 0.0).map_err(err)?
        && trigroup::rotate_differential(&o.surface, 2.0 * PI).to_json() == o.surface.to_json();
    ensure(
        valid && val_ok && orders == [0, 0, 1] && family.len() == 2 && probe > 0.0 && fixed,
        format!(
            "valid {valid}; valences 6,6,8 {val_ok}; orders {orders:?}; genus {}; probe {probe:.4} over 12 angles; 2π rotation exact {fixed} on {} classes",
            o.genus(),
            classes.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("Titeica exactness", criterion_1),
        ("tropical convergence", criterion_2),
        ("arc unipotents", criterion_3),
        ("Wang bounds", criterion_4),
        ("polygon combinatorics", criterion_5),
        ("building local model", criterion_6),
        ("weak convexity", criterion_7),
        ("triangle groups", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(msg) => println!("criterion {} PASS {name} ({secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL {name} ({secs:.1}s): {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
