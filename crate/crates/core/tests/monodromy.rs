use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wkblab_core::curve::{canonical_generators, continue_sheet, HyperellipticCurve, PathOnCurve, Segment, Sheet};
use wkblab_core::demo::{model_a, model_b, random_curve, random_system, MODEL_A_ABS_RE_INTEGRAL};
use wkblab_core::differentials::SlTwoSystem;
use wkblab_core::mat2::Mat2;
use wkblab_core::monodromy::{corner_deviation, dominant_corner, representation, transfer_matrix, wkb_model_ode};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Classical RK4 with `n` steps per segment and nearest-sign continuation of `y`.
fn rk4_transfer(curve: &HyperellipticCurve, a: &SlTwoSystem, t: f64, path: &PathOnCurve, n: usize) -> Mat2 {
    let mut f = Mat2::identity();
    let mut y = curve.y(path.start(), path.start_sheet);
    for seg in &path.segments {
        let h = 1.0 / n as f64;
        let ystep = |s: f64, prev: Complex64| {
            let r = curve.p(seg.point(s)).sqrt();
            if (r - prev).norm() <= (r + prev).norm() {
                r
            } else {
                -r
            }
        };
        let d = |s: f64, yv: Complex64| a.numerator(seg.point(s)).scale(seg.derivative(s) * t / yv);
        for k in 0..n {
            let s0 = k as f64 * h;
            let ym = ystep(s0 + 0.5 * h, y);
            let y1 = ystep(s0 + h, ym);
            let rhs = |dm: Mat2, m: Mat2| (dm * m).scale_re(-1.0);
            let k1 = rhs(d(s0, y), f);
            let k2 = rhs(d(s0 + 0.5 * h, ym), f + k1.scale_re(0.5 * h));
            let k3 = rhs(d(s0 + 0.5 * h, ym), f + k2.scale_re(0.5 * h));
            let k4 = rhs(d(s0 + h, y1), f + k3.scale_re(h));
            f = f + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(h / 6.0);
            y = y1;
        }
    }
    f
}

fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
    (*a - *b).max_abs()
}

#[test]
fn transfer_matches_rk4_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let curve = random_curve(&mut rng);
    let a = random_system(&curve, &mut rng).unwrap();
    let gens = canonical_generators(&curve).unwrap();
    for lp in &gens.loops[..2] {
        let coarse = rk4_transfer(&curve, &a, 1.5, lp, 1000);
        let fine = rk4_transfer(&curve, &a, 1.5, lp, 4000);
        let ours = transfer_matrix(&curve, &a, 1.5, lp, 1e-12).unwrap().to_matrix();
        let scale = fine.max_abs();
        assert!(max_diff(&coarse, &fine) < 1e-8 * scale);
        assert!(max_diff(&ours, &fine) < 1e-9 * scale, "{}", max_diff(&ours, &fine) / scale);
    }
}

#[test]
fn relation_holds_on_random_curves() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let curve = random_curve(&mut rng);
        let a = random_system(&curve, &mut rng).unwrap();
        let gens = canonical_generators(&curve).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let rep = representation(&curve, &a, t, &gens, 1e-8).unwrap();
            assert!(rep.defect <= 1e-8);
            for g in &rep.gens {
                assert!(g.unimodularity_defect().unwrap() < 1e-9);
            }
        }
    }
}

#[test]
fn large_characters_fall_back_to_extended_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let curve = random_curve(&mut rng);
    let a = random_system(&curve, &mut rng).unwrap().scale(c(4.0, 0.0));
    let gens = canonical_generators(&curve).unwrap();
    let rep = representation(&curve, &a, 1.0, &gens, 1e-8).unwrap();
    assert!(rep.extended);
    assert!(rep.defect <= 1e-8, "{}", rep.defect);
    // the extended generators agree with the double-precision ones
    for (g, lp) in rep.gens.iter().zip(&gens.loops) {
        let d = transfer_matrix(&curve, &a, 1.0, lp, 1e-12).unwrap();
        assert!((g.log_char().unwrap() - d.log_char().unwrap()).abs() < 1e-8);
    }
}

#[test]
fn character_survives_base_point_move() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let curve = random_curve(&mut rng);
    let a = random_system(&curve, &mut rng).unwrap();
    let gens = canonical_generators(&curve).unwrap();
    let base = gens.base_point;
    // a new base point reached by a short segment that stays clear of the branch points
    let target = (0..16)
        .map(|k| base + Complex64::from_polar(0.5 * gens.lasso_radius, k as f64 * 0.39))
        .find(|z| Segment::line(*z, base).distance_to(curve.branch_points()[0]) > gens.lasso_radius)
        .unwrap();
    let delta_plus = PathOnCurve::new(vec![Segment::line(target, base)], Sheet::Plus).unwrap();
    let sheet = if continue_sheet(&curve, &delta_plus, 0.0).unwrap() == Sheet::Plus {
        Sheet::Plus
    } else {
        Sheet::Minus
    };
    let delta = PathOnCurve::new(vec![Segment::line(target, base)], sheet).unwrap();
    let back = delta.reversed(&curve).unwrap();
    for (k, lp) in gens.loops.iter().enumerate() {
        let moved = delta.then(lp).unwrap().then(&back).unwrap();
        let m0 = transfer_matrix(&curve, &a, 1.0, lp, 1e-12).unwrap();
        let m1 = transfer_matrix(&curve, &a, 1.0, &moved, 1e-12).unwrap();
        let (t0, t1) = (m0.to_matrix().trace(), m1.to_matrix().trace());
        assert!((t0 - t1).norm() < 1e-8 * (1.0 + t0.norm()), "loop {k}: {t0} vs {t1}");
    }
}

#[test]
fn model_ode_corner_and_growth() {
    let corner = dominant_corner(MODEL_A_ABS_RE_INTEGRAL);
    assert_eq!(corner, 1);
    let devs: Vec<f64> = [10.0, 20.0, 40.0]
        .iter()
        .map(|&t| corner_deviation(&wkb_model_ode(&model_b, &model_a, t, 1e-11).unwrap(), corner))
        .collect();
    assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
    assert!(devs[2] < 0.05, "{devs:?}");
    let gaps: Vec<f64> = (0..10)
        .map(|k| {
            let t = 5.0 + 5.0 * k as f64;
            wkb_model_ode(&model_b, &model_a, t, 1e-11).unwrap().log_norm() - t * MODEL_A_ABS_RE_INTEGRAL
        })
        .collect();
    let spread = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.0, "{gaps:?}");
}

#[test]
fn model_ode_trivial_cases() {
    let zero = |_: f64| Mat2::zero();
    let m = wkb_model_ode(&zero, &|_| c(0.0, 0.0), 3.0, 1e-12).unwrap();
    assert!(m.distance_to_identity() < 1e-14);
    // constant diagonal: f(1) = diag(e^{−t a}, e^{t a})
    let m = wkb_model_ode(&zero, &|_| c(0.5, 0.2), 4.0, 1e-12).unwrap().to_matrix();
    let e = (c(0.5, 0.2) * 4.0).exp();
    assert!((m.0[1][1] - e).norm() < 1e-9 * e.norm());
    assert!((m.0[0][0] - 1.0 / e).norm() < 1e-9);
}
