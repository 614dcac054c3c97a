use num_complex::Complex64;
use wkblab_core::differentials::{det_map, AbelianDifferential, QuadraticDifferential};
use wkblab_core::fiber::{
    dilation_transport, double_zero_target, gauge_fix, regular_probe, solve_fiber, GaugeFixedSystem,
};
use wkblab_core::mat2::Mat2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn generic_phi() -> QuadraticDifferential {
    QuadraticDifferential::new(c(0.8, -0.3), c(-0.4, 0.6), c(0.5, 0.25))
}

/// Slice points from the quadratic `q₀f² − q₁f + q₂ = 0` (the slice is `d₁ = −q₀`, `g = −q₁ + f·q₀`).
fn closed_form(phi: &QuadraticDifferential) -> Vec<GaugeFixedSystem> {
    let [q0, q1, q2] = phi.coeffs;
    let disc = (q1 * q1 - q0 * q2 * 4.0).sqrt();
    [(q1 + disc) / (q0 * 2.0), (q1 - disc) / (q0 * 2.0)]
        .into_iter()
        .map(|f| GaugeFixedSystem {
            d1: -q0,
            e: c(0.0, 0.0),
            f,
            g: -q1 + f * q0,
            shift: c(0.0, 0.0),
        })
        .collect()
}

#[test]
fn recovers_constructed_system() {
    let a = GaugeFixedSystem {
        d1: c(0.6, 0.2),
        e: c(0.0, 0.0),
        f: c(-0.3, 0.7),
        g: c(0.9, -0.1),
        shift: c(0.0, 0.0),
    };
    let phi = det_map(&a.to_system());
    let r = solve_fiber(&phi, 64, 11, 1e-10).unwrap();
    assert!(!r.ramification_suspect);
    assert!(r.solutions.iter().any(|s| s.distance(&a.canonical()) < 1e-8), "{:?}", r.solutions);
    assert!(r.residuals.iter().all(|x| *x <= 1e-10));
}

#[test]
fn matches_closed_form_slice() {
    let phi = generic_phi();
    let r = solve_fiber(&phi, 64, 5, 1e-10).unwrap();
    let oracle = closed_form(&phi);
    assert_eq!(r.slice_solutions, oracle.len());
    for s in &r.solutions {
        assert!(oracle.iter().any(|o| o.distance(s) < 1e-9));
    }
    // the two slice points lie in one orbit
    assert!(oracle[0].canonical().distance(&oracle[1].canonical()) < 1e-12);
}

#[test]
fn degree_saturates() {
    for (k, seed) in [(0.0, 1u64), (0.3, 2), (1.1, 3)] {
        let phi = generic_phi() + QuadraticDifferential::new(c(k, 0.1), c(0.0, k), c(-k, 0.0));
        let a = solve_fiber(&phi, 200, seed, 1e-10).unwrap();
        let b = solve_fiber(&phi, 400, seed + 100, 1e-10).unwrap();
        assert_eq!(a.degree_estimate, b.degree_estimate);
        assert_eq!(a.degree_estimate, 1);
        assert_eq!(a.slice_solutions, 2);
        assert!(a.noether_ranks.iter().all(|r| *r == 3));
    }
}

#[test]
fn report_is_reproducible() {
    let a = solve_fiber(&generic_phi(), 50, 9, 1e-10).unwrap();
    let b = solve_fiber(&generic_phi(), 50, 9, 1e-10).unwrap();
    assert_eq!(a, b);
}

#[test]
fn probes() {
    let phi = generic_phi();
    assert!(regular_probe(&phi, 1e-2, 8, 64, 4).unwrap());
    assert!(regular_probe(&phi, 0.0, 8, 64, 4).unwrap());
    let dz = double_zero_target(c(0.7, 0.2), c(0.3, -0.5));
    assert!(dz.discriminant().norm() < 1e-14);
    assert!(!regular_probe(&dz, 1e-2, 8, 64, 4).unwrap());
}

#[test]
fn dilation_matches_independent_solve() {
    let phi = generic_phi();
    let t = 2.7;
    let r1 = solve_fiber(&phi, 64, 1, 1e-10).unwrap();
    let r2 = solve_fiber(&phi.scale(c(t, 0.0)), 64, 2, 1e-10).unwrap();
    assert_eq!(r1.degree_estimate, r2.degree_estimate);
    for (s, u) in r1.solutions.iter().zip(&r2.solutions) {
        let moved = dilation_transport(s, t).unwrap().canonical();
        assert!(moved.distance(u) < 1e-9, "{moved:?} vs {u:?}");
    }
    assert!(dilation_transport(&r1.solutions[0], -1.0).is_err());
}

#[test]
fn count_is_conjugation_invariant() {
    let phi = generic_phi();
    let base = solve_fiber(&phi, 64, 1, 1e-10).unwrap();
    let sys = base.solutions[0].to_system();
    for (k, g) in [
        Mat2::new(c(1.0, 0.2), c(0.3, 0.0), c(-0.5, 0.1), c(0.8, -0.4)),
        Mat2::new(c(0.0, 1.0), c(2.0, 0.0), c(0.5, 0.0), c(0.1, 0.1)),
    ]
    .iter()
    .enumerate()
    {
        let moved = sys.conjugate(g);
        let fixed = gauge_fix(&moved, c(0.0, 0.0)).unwrap();
        assert!(fixed.distance(&base.solutions[0]) < 1e-9, "gauge {k}");
        let r = solve_fiber(&det_map(&moved), 64, 7 + k as u64, 1e-10).unwrap();
        assert_eq!(r.degree_estimate, base.degree_estimate);
    }
}

#[test]
fn degree_constant_along_path() {
    let start = generic_phi();
    let step = QuadraticDifferential::new(c(0.05, 0.02), c(-0.03, 0.04), c(0.01, -0.05));
    let counts: Vec<usize> = (0..5)
        .map(|k| {
            let phi = start + step.scale(c(k as f64, 0.0));
            solve_fiber(&phi, 64, k as u64, 1e-10).unwrap().degree_estimate
        })
        .collect();
    assert!(counts.iter().all(|n| *n == counts[0]), "{counts:?}");
}

#[test]
fn diagonal_square_has_preimage() {
    let phi = det_map(&wkblab_core::fiber::diagonal_system(AbelianDifferential::omega0()));
    let r = solve_fiber(&phi, 40, 3, 1e-10).unwrap();
    assert!(!r.solutions.is_empty());
    assert!(r.residuals.iter().all(|x| *x <= 1e-10));
}

#[test]
fn zero_target_rejected() {
    assert!(solve_fiber(&QuadraticDifferential::zero(), 10, 1, 1e-10).is_err());
}
