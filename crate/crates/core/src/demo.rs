//! Ready-made inputs shared by the test suites and the command-line driver.

use crate::curve::{HyperellipticCurve, PathOnCurve, Sheet};
use crate::differentials::{det_map, qd_norm, AbelianDifferential, QuadTol, SlTwoSystem};
use crate::error::Result;
use crate::mat2::Mat2;
use crate::wkb::{growth_differential, growth_width};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rand_c(rng: &mut impl Rng, r: f64) -> Complex64 {
    c(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

/// Monic quintic curve with branch points in the disk of radius 1.5, pairwise at least 0.35 apart.
pub fn random_curve(rng: &mut impl Rng) -> HyperellipticCurve {
    loop {
        let mut pts: Vec<Complex64> = Vec::with_capacity(5);
        while pts.len() < 5 {
            let z = Complex64::from_polar(1.5 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
            if pts.iter().all(|p| (p - z).norm() >= 0.35) {
                pts.push(z);
            }
        }
        if let Ok(curve) = HyperellipticCurve::from_branch_points(c(1.0, 0.0), &pts, 1e-9) {
            return curve;
        }
    }
}

/// Random system rescaled so that `‖det A‖ = ∫|det A| = 1` on `curve`.
pub fn random_system(curve: &HyperellipticCurve, rng: &mut impl Rng) -> Result<SlTwoSystem> {
    let tol = QuadTol {
        atol: 1e-9,
        rtol: 1e-9,
        ..QuadTol::default()
    };
    loop {
        let mut ab = || AbelianDifferential::new(rand_c(rng, 1.0), rand_c(rng, 1.0));
        let a = SlTwoSystem::new(ab(), ab(), ab());
        if det_map(&a).coeff_norm() > 1e-3 {
            let n = qd_norm(curve, &det_map(&a), tol)?.value.re;
            return Ok(a.scale(c(1.0 / n.sqrt(), 0.0)));
        }
    }
}

/// A system and loop on which the loop is a WKB curve for the growth differential.
#[derive(Debug, Clone)]
pub struct WkbExperiment {
    pub curve: HyperellipticCurve,
    pub system: SlTwoSystem,
    pub lp: PathOnCurve,
    /// Width `w_{−det A}` of the loop.
    pub width: f64,
}

/// Two branch points at `±0.15` encircled by a circle of radius 0.6, with the
/// other three far away. On that circle `√(−det A)/y` is close to `K/x` for a
/// constant `K`, and rotating `A` so that `K` is imaginary makes the circle
/// transverse to the vertical foliation. The system is scaled to width 0.8.
pub fn wkb_experiment() -> Result<WkbExperiment> {
    let pts = [c(-0.15, 0.0), c(0.15, 0.0), c(2.5, 0.3), c(-2.2, 1.9), c(0.4, -2.6)];
    let curve = HyperellipticCurve::from_branch_points(c(1.0, 0.0), &pts, 1e-9)?;
    let a = SlTwoSystem::new(
        AbelianDifferential::new(c(1.0, 0.2), c(0.1, -0.2)),
        AbelianDifferential::new(c(0.3, -0.4), c(-0.2, 0.1)),
        AbelianDifferential::new(c(-0.2, 0.5), c(0.15, 0.05)),
    );
    let q = growth_differential(&a);
    let far: Complex64 = pts[2..].iter().map(|e| -e).product();
    let k = (q.coeffs[0] / far).sqrt();
    let a = a.scale(Complex64::from_polar(1.0, -PI / 2.0 - k.arg()));
    let lp = PathOnCurve::circle(c(0.0, 0.0), 0.6, 0.0, Sheet::Plus);
    let w0 = growth_width(&curve, &a, &lp, 1e-12)?.value;
    let system = a.scale(c(0.8 / w0, 0.0));
    let width = growth_width(&curve, &system, &lp, 1e-12)?.value;
    Ok(WkbExperiment {
        curve,
        system,
        lp,
        width,
    })
}

/// Bounded off-diagonal-rich `B(s)` for the diagonal model ODE.
pub fn model_b(s: f64) -> Mat2 {
    let th = 2.0 * PI * s;
    Mat2::new(
        c(0.3 * th.cos(), 0.1),
        c(0.8 + 0.2 * th.sin(), -0.3),
        c(-0.5, 0.4 * th.cos()),
        c(-0.2, 0.3 * th.sin()),
    )
}

/// `a(s)` with `Re a > 0` throughout.
pub fn model_a(s: f64) -> Complex64 {
    let th = 2.0 * PI * s;
    c(1.0 + 0.5 * th.sin(), 0.7 * th.cos() + 0.2)
}

/// `∫₀¹ |Re a|` for [`model_a`].
pub const MODEL_A_ABS_RE_INTEGRAL: f64 = 1.0;

/// Ten closed loops built from the generator lassos: the four generators, four
/// products of two, and two products of three (with some inverses).
pub fn sample_loops(curve: &HyperellipticCurve) -> Result<Vec<PathOnCurve>> {
    let g = crate::curve::canonical_generators(curve)?;
    let [a1, b1, a2, b2] = g.loops.clone();
    let inv = |p: &PathOnCurve| p.reversed(curve);
    Ok(vec![
        a1.clone(),
        b1.clone(),
        a2.clone(),
        b2.clone(),
        a1.then(&b1)?,
        a2.then(&b2)?,
        a1.then(&a2)?,
        b1.then(&inv(&b2)?)?,
        a1.then(&b2)?.then(&a2)?,
        b1.then(&inv(&a2)?)?.then(&a1)?,
    ])
}
