use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wkblab_core::curve::Segment;
use wkblab_core::differentials::width_along;
use wkblab_core::error::Error;
use wkblab_core::flat::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn golden_angle() -> f64 {
    ((5f64.sqrt() - 1.0) / 2.0).atan()
}

fn sin2(_: usize, z: Complex64) -> f64 {
    (2.0 * PI * z.re).sin().powi(2)
}

#[test]
fn torus_birkhoff_average_within_five_over_t() {
    let t = HalfTranslationSurface::unit_torus();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let start = FlatPoint {
            polygon: 0,
            z: c(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)),
        };
        let avg = birkhoff_average_from(&t, &sin2, start, golden_angle(), 1000.0).unwrap();
        assert!((avg - 0.5).abs() <= 5.0 / 1000.0, "{avg}");
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
}

#[test]
fn doubling_time_shrinks_deviation() {
    let t = HalfTranslationSurface::unit_torus();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let starts: Vec<FlatPoint> = (0..10)
        .map(|_| FlatPoint {
            polygon: 0,
            z: c(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)),
        })
        .collect();
    let dev = |time: f64| {
        median(
            starts
                .iter()
                .map(|s| (birkhoff_average_from(&t, &sin2, *s, golden_angle(), time).unwrap() - 0.5).abs())
                .collect(),
        )
    };
    let devs: Vec<f64> = [100.0, 200.0, 400.0, 800.0].iter().map(|&time| dev(time)).collect();
    // deviation ~ C/T: the time-weighted deviation stays bounded and the trend halves
    let ratio = (devs[2] + devs[3]) / (devs[0] + devs[1]);
    assert!(ratio < 0.5, "{devs:?}");
}

/// Kolmogorov–Smirnov distance of a sample from the uniform law on [0, 1].
fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn flow_preserves_uniform_measure() {
    let t = HalfTranslationSurface::unit_torus();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 1500;
    let pts: Vec<FlatPoint> = (0..n)
        .map(|_| FlatPoint {
            polygon: 0,
            z: c(rng.gen_range(1e-6..1.0 - 1e-6), rng.gen_range(1e-6..1.0 - 1e-6)),
        })
        .collect();
    // 1% critical value of the one-sample KS statistic
    let crit = 1.63 / (n as f64).sqrt();
    for time in [1.0, 10.0, 100.0] {
        let ends: Vec<Complex64> = pts.iter().map(|p| flow(&t, *p, 0.9 * golden_angle(), time).unwrap().end.z).collect();
        let kx = ks_uniform(ends.iter().map(|z| z.re).collect());
        let ky = ks_uniform(ends.iter().map(|z| z.im).collect());
        assert!(kx < crit && ky < crit, "T={time}: {kx} {ky} vs {crit}");
    }
    // a concentrated sample is detected by the same statistic
    let bad: Vec<f64> = pts.iter().map(|p| p.z.re * 0.8).collect();
    assert!(ks_uniform(bad) > crit);
}

#[test]
fn cosine_relation_on_horizontal_geodesics() {
    let torus = HalfTranslationSurface::unit_torus();
    let octagon = HalfTranslationSurface::regular_octagon();
    let span = 1.0 + 2f64.sqrt();
    let cases = [
        (&torus, FlatPoint { polygon: 0, z: c(0.3, 0.4) }, 1.0),
        (&torus, FlatPoint { polygon: 0, z: c(0.7, 0.9) }, 3.0),
        (&octagon, FlatPoint { polygon: 0, z: c(-0.2, 0.1) }, span),
        (&octagon, FlatPoint { polygon: 0, z: c(0.6, -0.45) }, 2.0 * span),
    ];
    for (surface, start, time) in cases {
        let traj = flow(surface, start, 0.0, time).unwrap();
        let curve = close_up(&traj, 1e-9, 1e-9).unwrap();
        assert!(curve.closing_insert.is_none());
        let segs = curve.all_segments();
        assert!((phi_width(&segs) - time).abs() < 1e-12);
        for theta in [0.3, PI / 3.0, 1.2, 2.5, -0.8] {
            let ratio = ChartRatio::Constant {
                value: Complex64::from_polar(1.0, theta),
            };
            let w = psi_width(&segs, &ratio, 1e-10).unwrap();
            assert!((w - time * (theta / 2.0).cos()).abs() < 1e-6, "theta {theta}: {w}");
        }
    }
}

#[test]
fn octagon_rotated_structure_gives_certified_curve() {
    let o = HalfTranslationSurface::regular_octagon();
    let ratio = ChartRatio::Constant {
        value: Complex64::from_polar(1.0, 0.9),
    };
    let found = find_wkb_curve(&o, &ratio, &FindWkbParams::default()).unwrap();
    assert!(found.margin > 0.0);
    assert!(found.transversality > 0.0);
    let segs = found.curve.all_segments();
    // re-verify both widths independently at ten times the quadrature resolution
    let fine: f64 = segs
        .iter()
        .filter(|s| s.length() > 0.0)
        .map(|s| width_along(&[Segment::line(s.from, s.to)], |_| ratio.at(0, c(0.0, 0.0)), found.width_tol / 10.0).unwrap().value)
        .sum();
    let exact: f64 = segs.iter().map(|s| ((s.to - s.from) * Complex64::from_polar(1.0, 0.45)).re.abs()).sum();
    assert!((fine - exact).abs() < 1e-9 * exact.max(1.0));
    assert!((found.w_psi - exact).abs() < 1e-9 * exact.max(1.0));
    assert!(phi_width(&segs) - exact > 0.0);
    // the chain closes in the start chart
    let first = segs.first().unwrap();
    let last = segs.last().unwrap();
    assert!((first.from - last.to).norm() < 1e-12);
}

#[test]
fn close_up_bound_is_honored() {
    let t = HalfTranslationSurface::unit_torus();
    let ratio = ChartRatio::Polynomial {
        coeffs: vec![vec![c(0.4, 0.2), c(0.1, -0.3), c(0.05, 0.0)]],
    };
    let start = FlatPoint { polygon: 0, z: c(0.2, 0.5) };
    for time in [1.004, 2.007, 3.002] {
        let traj = flow(&t, start, 0.0, time).unwrap();
        let curve = close_up(&traj, 0.01, 1e-9).unwrap();
        let open = psi_width(&traj.segments, &ratio, 1e-12).unwrap();
        let closed = psi_width(&curve.all_segments(), &ratio, 1e-12).unwrap();
        assert!((closed - open).abs() <= curve.insert_bound(&ratio), "{closed} {open}");
        let dphi = (phi_width(&curve.all_segments()) - phi_width(&traj.segments)).abs();
        assert!(dphi <= curve.insert_bound(&ChartRatio::Constant { value: c(1.0, 0.0) }) + 1e-14);
    }
}

#[test]
fn flow_into_cone_point_is_reported() {
    let o = HalfTranslationSurface::regular_octagon();
    let vertex = o.polygons[0][0];
    let start = FlatPoint { polygon: 0, z: vertex * 0.3 };
    let r = flow(&o, start, vertex.arg(), 5.0);
    assert!(matches!(r, Err(Error::HitsConePoint { .. })), "{r:?}");
}

#[test]
fn torus_rational_slope_closes_exactly() {
    let t = HalfTranslationSurface::unit_torus();
    let start = FlatPoint { polygon: 0, z: c(0.31, 0.27) };
    for (p, q) in [(1.0, 2.0), (2.0, 3.0), (3.0, 1.0)] {
        let traj = flow(&t, start, (p / q as f64).atan(), (p * p + q * q as f64).sqrt()).unwrap();
        assert!((traj.end.z - start.z).norm() < 1e-12);
        assert!(close_up(&traj, 1e-9, 0.1).unwrap().closing_insert.is_none());
    }
}
