use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use wkblab_core::curve::HyperellipticCurve;
use wkblab_core::demo::random_curve;
use wkblab_core::differentials::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rand_c(rng: &mut impl Rng) -> Complex64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_system(rng: &mut impl Rng) -> SlTwoSystem {
    let mut ab = || AbelianDifferential::new(rand_c(rng), rand_c(rng));
    SlTwoSystem::new(ab(), ab(), ab())
}

fn x5_minus_x() -> HyperellipticCurve {
    HyperellipticCurve::new(&[c(0., 0.), c(-1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)], 1e-6).unwrap()
}

/// Importance-sampled `2∫|1/p| dA` for `p = x⁵ − x`.
///
/// The proposal mixes a `1/r` density in a disk of radius `ρ` around every root
/// with a heavy-tailed density `1/(π(1 + |x|²)²)` on the plane, so the weight
/// `f/q` is bounded everywhere.
fn monte_carlo_norm(samples: usize, seed: u64) -> (f64, f64) {
    let roots = [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)];
    let rho = 0.3;
    let w_root = 0.1;
    let w_far = 1.0 - 5.0 * w_root;
    let f = |x: Complex64| 2.0 / (x.powi(5) - x).norm();
    let q = |x: Complex64| {
        let mut d = w_far / (PI * (1.0 + x.norm_sqr()).powi(2));
        for e in roots {
            let r = (x - e).norm();
            if r < rho {
                d += w_root / (2.0 * PI * rho * r);
            }
        }
        d
    };
    let chunks = 64;
    let per = samples / chunks;
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..per {
                let u: f64 = rng.gen();
                let x = if u < w_far {
                    // inverse CDF of the radial law r ↦ 1 − 1/(1 + r²)
                    let v: f64 = rng.gen();
                    Complex64::from_polar((v / (1.0 - v)).sqrt(), rng.gen_range(0.0..2.0 * PI))
                } else {
                    let e = roots[(((u - w_far) / w_root) as usize).min(4)];
                    e + Complex64::from_polar(rho * rng.gen::<f64>(), rng.gen_range(0.0..2.0 * PI))
                };
                let v = f(x) / q(x);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let n = (per * chunks) as f64;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = s / n;
    (mean, ((s2 / n - mean * mean) / n).sqrt())
}

#[test]
fn norm_matches_monte_carlo_oracle() {
    let curve = x5_minus_x();
    let phi = QuadraticDifferential::from_real([1.0, 0.0, 0.0]);
    let ours = qd_norm(&curve, &phi, QuadTol::default()).unwrap();
    let (mc, stderr) = monte_carlo_norm(16_000_000, 3);
    assert!(stderr < 2e-4 * mc, "{stderr}");
    assert!((ours.value.re - mc).abs() < 1e-3 * mc, "{} vs {mc} ± {stderr}", ours.value.re);
}

#[test]
fn norm_is_homogeneous_on_random_curves() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..3 {
        let curve = random_curve(&mut rng);
        let phi = QuadraticDifferential::new(rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng));
        let a = qd_norm(&curve, &phi, QuadTol::default()).unwrap().value.re;
        let b = qd_norm(&curve, &phi.scale(c(0.0, 2.5)), QuadTol::default()).unwrap().value.re;
        assert!(a > 0.0);
        assert!((b - 2.5 * a).abs() < 1e-8 * b);
    }
}

#[test]
fn derivative_matches_richardson_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let a = random_system(&mut rng);
        let phi = random_system(&mut rng);
        let central = |h: f64| {
            let plus = det_map(&a.add(&phi.scale(c(h, 0.0))));
            let minus = det_map(&a.add(&phi.scale(c(-h, 0.0))));
            let mut out = [c(0.0, 0.0); 3];
            for k in 0..3 {
                out[k] = (plus.coeffs[k] - minus.coeffs[k]) / (2.0 * h);
            }
            out
        };
        let (d1, d2) = (central(1e-5), central(5e-6));
        let exact = d_det(&a, &phi);
        for k in 0..3 {
            let rich = (d2[k] * 4.0 - d1[k]) / 3.0;
            assert!((rich - exact.coeffs[k]).norm() <= 1e-8 * (1.0 + exact.coeffs[k].norm()));
        }
        // linearity in the direction
        let twice = d_det(&a, &phi.scale(c(2.0, 0.0)));
        assert!(twice.distance(&exact.scale(c(2.0, 0.0))) < 1e-14);
    }
    let zero = SlTwoSystem::new(AbelianDifferential::zero(), AbelianDifferential::zero(), AbelianDifferential::zero());
    assert!(d_det(&random_system(&mut rng), &zero).is_zero());
}

#[test]
fn noether_rank_generic_and_degenerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let _curve = random_curve(&mut rng);
        for _ in 0..4 {
            assert_eq!(noether_rank(&random_system(&mut rng)), 3);
        }
    }
    let w0 = AbelianDifferential::omega0();
    assert_eq!(noether_rank(&SlTwoSystem::new(w0, w0, w0)), 2);
    let z = AbelianDifferential::zero();
    assert_eq!(noether_rank(&SlTwoSystem::new(z, z, z)), 0);
    // an independent count: rank of the products with a single form
    let w1 = AbelianDifferential::omega1();
    assert_eq!(noether_rank(&SlTwoSystem::new(w0, w1, z)), 3);
}

#[test]
fn pairing_bounded_by_modulus_times_norm() {
    let curve = x5_minus_x();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..4 {
        let q = QuadraticDifferential::new(rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng));
        let phi = QuadraticDifferential::new(rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng));
        let k = rng.gen_range(0.1..0.9);
        let mu = BeltramiRepresentative::new(q, k).unwrap();
        let pair = belt_pairing(&curve, &mu, &phi, QuadTol::default()).unwrap().value;
        let norm = qd_norm(&curve, &phi, QuadTol::new(1e-9, 1e-9)).unwrap().value.re;
        assert!(pair.norm() <= k * norm * (1.0 + 1e-7));
    }
}

#[test]
fn teich_norm_lower_bound_and_refinement() {
    let curve = x5_minus_x();
    let phi = QuadraticDifferential::new(c(0.4, 0.3), c(-0.5, 0.1), c(0.2, -0.6));
    let mu = BeltramiRepresentative::new(phi, 0.35).unwrap();
    let coarse = teich_norm(&curve, &mu, TeichNormParams::default()).unwrap();
    assert!(coarse.value >= 0.35 * (1.0 - 1e-6));
    assert!(coarse.value <= 0.35 * (1.0 + 1e-6));
    // ten times finer refinement and cubature on the same seed grid
    let base = TeichNormParams::default();
    let fine_params = TeichNormParams {
        refine_tol: base.refine_tol / 10.0,
        quad: QuadTol::new(base.quad.atol / 10.0, base.quad.rtol / 10.0),
        ..base
    };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let q = QuadraticDifferential::new(rand_c(&mut rng), rand_c(&mut rng), rand_c(&mut rng));
    let mu = BeltramiRepresentative::new(q, 0.5).unwrap();
    let a = teich_norm(&curve, &mu, TeichNormParams::default()).unwrap();
    let b = teich_norm(&curve, &mu, fine_params).unwrap();
    assert!((a.value - b.value).abs() < 1e-3, "{} vs {}", a.value, b.value);
    assert!(a.value <= 0.5 * (1.0 + 1e-6));
    let zero = BeltramiRepresentative::new(q, 0.0).unwrap();
    assert_eq!(teich_norm(&curve, &zero, TeichNormParams::default()).unwrap().value, 0.0);
}

#[test]
fn det_gauge_invariance_and_homogeneity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_system(&mut rng);
    let g = wkblab_core::mat2::Mat2::new(c(1.0, 0.5), c(0.3, -0.2), c(0.1, 0.4), c(0.0, 0.0));
    let det = g.det();
    let s = det.sqrt();
    let g = g.scale(c(1.0, 0.0) / s);
    assert!(det_map(&a.conjugate(&g)).distance(&det_map(&a)) < 1e-12);
    assert!(det_map(&a.scale(c(3.0, 0.0))).distance(&det_map(&a).scale(c(9.0, 0.0))) < 1e-12);
}

fn system_from(v: &[f64]) -> SlTwoSystem {
    let z = |k: usize| c(v[2 * k], v[2 * k + 1]);
    SlTwoSystem::new(
        AbelianDifferential::new(z(0), z(1)),
        AbelianDifferential::new(z(2), z(3)),
        AbelianDifferential::new(z(4), z(5)),
    )
}

proptest::proptest! {
    #[test]
    fn det_is_homogeneous_of_degree_two(v in proptest::collection::vec(-2.0f64..2.0, 12), t in -3.0f64..3.0) {
        let a = system_from(&v);
        let lhs = det_map(&a.scale(c(t, 0.0)));
        let rhs = det_map(&a).scale(c(t * t, 0.0));
        proptest::prop_assert!(lhs.distance(&rhs) <= 1e-12 * (1.0 + rhs.coeff_norm()));
    }

    #[test]
    fn derivative_is_polarization(v in proptest::collection::vec(-2.0f64..2.0, 12), w in proptest::collection::vec(-2.0f64..2.0, 12)) {
        // det(A + Φ) − det(A) − det(Φ) = d_det(A)(Φ) because det is quadratic
        let (a, phi) = (system_from(&v), system_from(&w));
        let lhs = det_map(&a.add(&phi));
        let rhs = QuadraticDifferential::new(
            det_map(&a).coeffs[0] + det_map(&phi).coeffs[0] + d_det(&a, &phi).coeffs[0],
            det_map(&a).coeffs[1] + det_map(&phi).coeffs[1] + d_det(&a, &phi).coeffs[1],
            det_map(&a).coeffs[2] + det_map(&phi).coeffs[2] + d_det(&a, &phi).coeffs[2],
        );
        proptest::prop_assert!(lhs.distance(&rhs) <= 1e-12 * (1.0 + lhs.coeff_norm()));
    }
}
