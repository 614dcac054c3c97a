use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wkblab_core::curve::{HyperellipticCurve, Sheet};
use wkblab_core::differentials::QuadraticDifferential;
use wkblab_core::semiflat::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn curve() -> HyperellipticCurve {
    HyperellipticCurve::from_branch_points(
        c(1.0, 0.0),
        &[c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0), c(0.5, -1.0), c(-0.6, -0.8)],
        1e-9,
    )
    .unwrap()
}

/// `q = (x − 1.5 − 0.2i)(x − 1.9 + 0.3i)`.
fn phi() -> QuadraticDifferential {
    let (z1, z2) = (c(1.5, 0.2), c(1.9, -0.3));
    QuadraticDifferential::new(z1 * z2, -(z1 + z2), c(1.0, 0.0))
}

fn around_zeros() -> SpectralCycle {
    SpectralCycle::circle(c(1.7, -0.05), 0.45, Sheet::Plus)
}

/// Dense trapezoid rule on a circle with nearest-sign continuation of the root.
fn trapezoid(curve: &HyperellipticCurve, phi: &QuadraticDifferential, center: Complex64, r: f64, n: usize) -> Complex64 {
    let g = |x: Complex64| (phi.numerator(x) / curve.p(x)).sqrt();
    let mut prev = g(center + r);
    let mut sum = c(0.0, 0.0);
    for k in 0..n {
        let th = 2.0 * PI * k as f64 / n as f64;
        let e = Complex64::from_polar(1.0, th);
        let mut v = g(center + e * r);
        if (v - prev).norm() > (v + prev).norm() {
            v = -v;
        }
        prev = v;
        sum += v * e * c(0.0, r);
    }
    sum * (2.0 * PI / n as f64)
}

#[test]
fn period_matches_trapezoid_oracle() {
    let curve = curve();
    let set = spectral_periods(&curve, &phi(), &[around_zeros()], 1e-13).unwrap();
    let oracle = trapezoid(&curve, &phi(), c(1.7, -0.05), 0.45, 100_000);
    assert!((set.periods[0] - oracle).norm() < 1e-10 * oracle.norm(), "{} vs {oracle}", set.periods[0]);
}

#[test]
fn period_scaling_and_symmetries() {
    let curve = curve();
    let mut cycles = vec![around_zeros()];
    cycles.extend(default_cycles(&curve, &phi(), 4).unwrap());
    let base = spectral_periods(&curve, &phi(), &cycles, 1e-13).unwrap();
    let scaled = spectral_periods(&curve, &phi().scale(c(9.0, 0.0)), &cycles, 1e-13).unwrap();
    assert_eq!(base.zeros.len(), 2);
    for (z, w) in base.zeros.iter().zip(&scaled.zeros) {
        assert!((z - w).norm() < 1e-14);
    }
    for (a, b) in base.periods.iter().zip(&scaled.periods) {
        assert!((b - a * 3.0).norm() <= 1e-10 * (1.0 + a.norm()));
    }
    let inv: Vec<SpectralCycle> = cycles.iter().map(|c| c.involution()).collect();
    let odd = spectral_periods(&curve, &phi(), &inv, 1e-13).unwrap();
    for (a, b) in base.periods.iter().zip(&odd.periods) {
        assert_eq!(a + b, c(0.0, 0.0));
    }
    let rev: Vec<SpectralCycle> = cycles.iter().zip(&base.end_sheets).map(|(c, s)| c.reversed(*s)).collect();
    let back = spectral_periods(&curve, &phi(), &rev, 1e-13).unwrap();
    for (a, b) in base.periods.iter().zip(&back.periods) {
        assert!((a + b).norm() < 1e-12 * (1.0 + a.norm()));
    }
}

#[test]
fn refinement_changes_little() {
    let curve = curve();
    let cycles = default_cycles(&curve, &phi(), 3).unwrap();
    let a = spectral_periods(&curve, &phi(), &cycles, 1e-9).unwrap();
    let b = spectral_periods(&curve, &phi(), &cycles, 1e-13).unwrap();
    for (x, y) in a.periods.iter().zip(&b.periods) {
        assert!((x - y).norm() < 1e-9 * (1.0 + y.norm()));
    }
}

#[test]
fn odd_number_of_enclosed_points_rejected() {
    let curve = curve();
    let one = SpectralCycle::circle(c(1.5, 0.2), 0.1, Sheet::Plus);
    assert!(spectral_periods(&curve, &phi(), &[one], 1e-10).is_err());
}

#[test]
fn conic_law() {
    let curve = curve();
    let cycles = default_cycles(&curve, &phi(), 4).unwrap();
    let reports = conic_scaling_check(&curve, &phi(), &cycles, &[1.0, 4.0, 0.3], 1e-13).unwrap();
    for r in &reports {
        assert!(r.form_error <= 1e-6, "{r:?}");
        assert!(r.derivative_error <= 1e-6, "{r:?}");
        assert!(r.radial_error <= 1e-6, "{r:?}");
    }
    assert!(reports[0].form_error < 1e-12);
}

#[test]
fn appendix_a_identity() {
    let worst = scaling_action_sweep(&[1, 2, 3, 4], &[0.5, 1.0, 2.0, 7.0], 20, 5).unwrap();
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn appendix_a_catches_wrong_fiber_scaling() {
    // b = diag(a, a^{-T}) without the factor t does not satisfy the identity
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_metric(2, &mut rng);
    let t = 3.0;
    let sf = semiflat_product(&g).unwrap();
    let sfp = semiflat_product(&g.scale(t)).unwrap();
    let pulled = sfp.clone();
    let diff = (&pulled - sf.scale(t)).iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(diff > 1e-3);
    let mut b = DMatrix::<Complex64>::identity(4, 4);
    for k in 2..4 {
        b[(k, k)] = c(t, 0.0);
    }
    let ok = (b.adjoint() * sfp * &b - sf.scale(t)).iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(ok < 1e-12);
}

#[test]
fn metric_is_diagonal_and_kahler() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 1..=3 {
        for _ in 0..5 {
            let p = random_model_point(2 * n, 0.8, &mut rng);
            let probe = model_metric(n, &p).unwrap();
            for i in 0..2 * n {
                for j in 0..2 * n {
                    if i != j {
                        assert!(probe.metric[i][j].norm() <= 1e-8);
                    }
                    assert!((probe.metric[i][j] - probe.metric[j][i].conj()).norm() <= 1e-12);
                }
            }
            assert!(kahler_defect(&p, StencilParams::default()).unwrap() <= 1e-6);
        }
    }
}

#[test]
fn curvature_matches_product_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let p = random_model_point(4, 0.7, &mut rng);
        let d = random_direction(4, &[0, 1, 2, 3], &mut rng);
        let k = holo_sectional_curvature(&p, &d, StencilParams::default()).unwrap();
        assert!((k - exact_curvature(&p, &d)).abs() < 1e-4, "{k} vs {}", exact_curvature(&p, &d));
    }
}

#[test]
fn axis_and_diagonal_directions() {
    for n in 1..=3usize {
        let origin = vec![c(0.0, 0.0); 2 * n];
        let mut axis = vec![c(0.0, 0.0); 2 * n];
        axis[0] = c(1.0, 0.0);
        let k = holo_sectional_curvature(&origin, &axis, StencilParams::default()).unwrap();
        assert!((k + 1.0).abs() < 1e-3);
        let mut diag = vec![c(0.0, 0.0); 2 * n];
        for x in diag.iter_mut().take(n) {
            *x = c(1.0, 0.0);
        }
        let k = holo_sectional_curvature(&origin, &diag, StencilParams::default()).unwrap();
        assert!((k + 1.0 / n as f64).abs() < 1e-3, "n={n}: {k}");
    }
}
