//! Fibers of the determinant map modulo constant conjugation.
//!
//! Write `A = M₁⊗ω₀ + M₂⊗(ω₁ − c·ω₀)` with `ω₀ = dx/y`, `ω₁ = x·dx/y` and a basis
//! shift `c` chosen so that `det M₁ = q(c) ≠ 0`. Conjugation brings `M₁` to
//! `[[0, 1], [d₁, 0]]`; its centralizer then removes the diagonal entry of
//! `M₂ = [[e, f], [g, −e]]`, leaving the slice `(d₁, f, g)` with `e = 0`. In the
//! shifted variable `x − c`, `det(A) = (q₀ + q₁x + q₂x²)dx²/y²` reads
//! `q₀ = −d₁`, `q₁ = −(g + f·d₁)`, `q₂ = −f·g`. The slice meets each generic
//! orbit twice, exchanged by `(f, g) ↦ (g/d₁, d₁·f)`; the representative with
//! the larger `(Im f, Re f, Im g)` is kept.

use crate::differentials::{det_map, noether_rank, AbelianDifferential, QuadraticDifferential, SlTwoSystem};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
/// Relative |det J| below which a fiber point counts as a ramification suspect.
const SINGULAR_TOL: f64 = 1e-6;
/// Distance under which two normal forms are the same solution.
const DEDUP_TOL: f64 = 1e-6;
const PROBE_TOL: f64 = 1e-10;

/// Normal form `M₁ = [[0,1],[d₁,0]]`, `M₂ = [[e,f],[g,−e]]` on the basis
/// `(ω₀, ω₁ − shift·ω₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeFixedSystem {
    pub d1: Complex64,
    pub e: Complex64,
    pub f: Complex64,
    pub g: Complex64,
    pub shift: Complex64,
}

impl GaugeFixedSystem {
    pub fn matrices(&self) -> (Mat2, Mat2) {
        (
            Mat2::new(ZERO, ONE, self.d1, ZERO),
            Mat2::new(self.e, self.f, self.g, -self.e),
        )
    }

    /// The system in the standard basis `(ω₀, ω₁)`.
    pub fn to_system(&self) -> SlTwoSystem {
        let (m1, m2) = self.matrices();
        SlTwoSystem::from_matrices(m1 - m2.scale(self.shift), m2)
    }

    /// Coefficients of `det` in the shifted variable.
    pub fn shifted_det(&self) -> [Complex64; 3] {
        [
            -self.d1,
            -(self.g + self.f * self.d1),
            -(self.e * self.e + self.f * self.g),
        ]
    }

    /// Distance between normal forms on the same basis shift.
    pub fn distance(&self, o: &GaugeFixedSystem) -> f64 {
        [self.d1 - o.d1, self.e - o.e, self.f - o.f, self.g - o.g]
            .iter()
            .map(|z| z.norm())
            .fold((self.shift - o.shift).norm(), f64::max)
    }

    /// The other point of the orbit on the slice (requires `e = 0`).
    pub fn partner(&self) -> GaugeFixedSystem {
        GaugeFixedSystem {
            f: self.g / self.d1,
            g: self.d1 * self.f,
            ..*self
        }
    }

    fn key(&self) -> [f64; 3] {
        [self.f.im, self.f.re, self.g.im]
    }

    /// Representative fixed by the ordering convention of the module docs.
    pub fn canonical(&self) -> GaugeFixedSystem {
        if self.e.norm() > 1e-12 * (1.0 + self.f.norm() + self.g.norm()) || self.d1 == ZERO {
            return *self;
        }
        let p = self.partner();
        let cmp = p
            .key()
            .iter()
            .zip(self.key().iter())
            .map(|(a, b)| if (a - b).abs() <= 1e-9 * (1.0 + a.abs()) { Ordering::Equal } else { a.partial_cmp(b).unwrap() })
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal);
        if cmp == Ordering::Greater {
            p
        } else {
            *self
        }
    }
}

/// Coefficients of `q(x + c)`.
fn shift_target(q: &QuadraticDifferential, c: Complex64) -> [Complex64; 3] {
    let [q0, q1, q2] = q.coeffs;
    [q0 + c * (q1 + c * q2), q1 + c * q2 * 2.0, q2]
}

/// Basis shift making the constant term of the target well away from zero.
pub fn choose_shift(q: &QuadraticDifferential) -> Complex64 {
    let scale = q.coeff_norm();
    if q.coeffs[0].norm() > 1e-3 * scale {
        return ZERO;
    }
    let candidates = [ONE, -ONE, Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), Complex64::new(2.0, 0.0)];
    candidates
        .into_iter()
        .max_by(|a, b| q.numerator(*a).norm().partial_cmp(&q.numerator(*b).norm()).unwrap())
        .unwrap()
}

/// Brings a system to the normal form (with the given basis shift).
pub fn gauge_fix(a: &SlTwoSystem, shift: Complex64) -> Result<GaugeFixedSystem> {
    let (n0, n1) = a.matrices();
    let m1 = n0 + n1.scale(shift);
    let m2 = n1;
    let d = -m1.det();
    if d.norm() < 1e-14 * (1.0 + m1.norm() * m1.norm()) {
        return Err(Error::InvalidInput("leading matrix is nilpotent for this basis shift".into()));
    }
    // companion basis (M₁u, u) for a non-eigenvector u
    let cands = [(ONE, ZERO), (ZERO, ONE), (ONE, ONE), (ONE, -ONE)];
    let mut best: Option<Mat2> = None;
    let mut best_det = 0.0;
    for (u0, u1) in cands {
        let w1 = (m1.0[0][0] * u0 + m1.0[0][1] * u1, m1.0[1][0] * u0 + m1.0[1][1] * u1);
        let p = Mat2::new(w1.0, u0, w1.1, u1);
        let dp = p.det().norm();
        if dp > best_det {
            best_det = dp;
            best = Some(p);
        }
    }
    let p = best.unwrap();
    let pi = p.inverse();
    let m1c = pi * m1 * p;
    let m2c = pi * m2 * p;
    let (e, f, g) = (m2c.0[0][0], m2c.0[0][1], m2c.0[1][0]);
    let d1 = m1c.0[1][0];
    // torus element h = I + rC commuting with C = [[0,1],[d₁,0]] that clears e
    let (qa, qb, qc) = (e * d1, g - d1 * f, e);
    let r = if e.norm() == 0.0 {
        ZERO
    } else if qa.norm() < 1e-300 {
        -qc / qb
    } else {
        let disc = (qb * qb - qa * qc * 4.0).sqrt();
        let r1 = (-qb + disc) / (qa * 2.0);
        let r2 = (-qb - disc) / (qa * 2.0);
        if r1.norm() <= r2.norm() {
            r1
        } else {
            r2
        }
    };
    let h = Mat2::new(ONE, r, r * d1, ONE);
    if h.det().norm() < 1e-12 {
        return Err(Error::InvalidInput("torus gauge degenerate".into()));
    }
    let m2f = h * m2c * h.inverse();
    let out = GaugeFixedSystem {
        d1,
        e: ZERO,
        f: m2f.0[0][1],
        g: m2f.0[1][0],
        shift,
    };
    if m2f.0[0][0].norm() > 1e-8 * (1.0 + m2f.norm()) {
        return Err(Error::InvalidInput("could not clear the diagonal of M₂".into()));
    }
    Ok(out.canonical())
}

fn residual(z: &[Complex64; 3], target: &[Complex64; 3]) -> [Complex64; 3] {
    let [d1, f, g] = *z;
    [-d1 - target[0], -(g + f * d1) - target[1], -(f * g) - target[2]]
}

fn norm3(v: &[Complex64; 3]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Jacobian of `(d₁, f, g) ↦ (q₀, q₁, q₂)`; its determinant is `g − d₁f`.
fn jacobian(z: &[Complex64; 3]) -> [[Complex64; 3]; 3] {
    let [d1, f, g] = *z;
    [[-ONE, ZERO, ZERO], [-f, -d1, -ONE], [ZERO, -g, -f]]
}

fn solve3(j: &[[Complex64; 3]; 3], b: &[Complex64; 3]) -> Option<[Complex64; 3]> {
    let det = |m: &[[Complex64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(j);
    if d.norm() == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [ZERO; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut m = *j;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        *o = det(&m) / d;
    }
    Some(out)
}

/// Relative Jacobian determinant `|g − d₁f| / (|d₁|(1 + |f|) + |g|)` at a slice point.
pub fn relative_jacobian(s: &GaugeFixedSystem) -> f64 {
    let num = (s.g - s.d1 * s.f).norm();
    let den = s.d1.norm() * (1.0 + s.f.norm()) + s.g.norm();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Damped Newton on the slice; returns the point and the iteration count.
fn newton(start: [Complex64; 3], target: &[Complex64; 3], max_iter: usize) -> Option<([Complex64; 3], usize)> {
    let scale = 1.0 + norm3(target);
    let mut z = start;
    let mut r = residual(&z, target);
    let mut rn = norm3(&r);
    for it in 0..max_iter {
        if rn <= 1e-14 * scale {
            return Some((z, it));
        }
        let step = solve3(&jacobian(&z), &r)?;
        let mut lambda = 1.0;
        loop {
            let cand = [z[0] - step[0] * lambda, z[1] - step[1] * lambda, z[2] - step[2] * lambda];
            let rc = residual(&cand, target);
            let rcn = norm3(&rc);
            if rcn < rn || lambda < 1e-6 {
                z = cand;
                r = rc;
                rn = rcn;
                break;
            }
            lambda *= 0.5;
        }
    }
    (rn <= 1e-12 * scale).then_some((z, max_iter))
}

/// Solutions of `det(A) = φ` modulo conjugation, found by multi-start Newton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberReport {
    pub target: QuadraticDifferential,
    /// One normal form per conjugation orbit.
    pub solutions: Vec<GaugeFixedSystem>,
    /// `‖det(A) − φ‖` (max coefficient) per solution.
    pub residuals: Vec<f64>,
    pub starts_used: usize,
    /// Number of converged starts.
    pub converged: usize,
    /// Empirical number of orbits in the fiber.
    pub degree_estimate: usize,
    /// Distinct slice points before identifying the two points of an orbit.
    pub slice_solutions: usize,
    /// Smallest relative Jacobian determinant over the slice points.
    pub min_jacobian: f64,
    /// Set when `min_jacobian` is below the singularity threshold.
    pub ramification_suspect: bool,
    pub noether_ranks: Vec<usize>,
}

impl FiberReport {
    /// The report itself, or `JacobianSingular` when the fiber is ramification-suspect.
    pub fn require_regular(&self) -> Result<&Self> {
        if self.ramification_suspect {
            Err(Error::JacobianSingular(self.min_jacobian))
        } else {
            Ok(self)
        }
    }
}

/// Multi-start Newton for the fiber over `φ`.
///
/// Solutions whose residual exceeds `tol·(1 + ‖φ‖)` are discarded. A fiber
/// point with a (near) singular Jacobian is reported with
/// `ramification_suspect` set; see [`FiberReport::require_regular`].
pub fn solve_fiber(phi: &QuadraticDifferential, n_starts: usize, seed: u64, tol: f64) -> Result<FiberReport> {
    if phi.is_zero() {
        return Err(Error::InvalidInput("target must be nonzero".into()));
    }
    let shift = choose_shift(phi);
    let target = shift_target(phi, shift);
    let scale = phi.coeff_norm().sqrt().max(1e-300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<[Complex64; 3]> = (0..n_starts)
        .map(|_| {
            let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (2.0 * scale);
            [c(), c(), c()]
        })
        .collect();
    let found: Vec<Option<[Complex64; 3]>> = starts
        .par_iter()
        .map(|s| newton(*s, &target, 200).map(|r| r.0))
        .collect();
    let converged: Vec<[Complex64; 3]> = found
        .into_iter()
        .flatten()
        .filter(|z| norm3(&residual(z, &target)) <= tol * (1.0 + norm3(&target)))
        .collect();
    if converged.is_empty() {
        return Err(Error::NoConvergence);
    }
    let mut slice: Vec<GaugeFixedSystem> = Vec::new();
    for z in &converged {
        let s = GaugeFixedSystem {
            d1: z[0],
            e: ZERO,
            f: z[1],
            g: z[2],
            shift,
        };
        if slice.iter().all(|o| o.distance(&s) > DEDUP_TOL * (1.0 + scale * scale)) {
            slice.push(s);
        }
    }
    let min_jacobian = slice.iter().map(relative_jacobian).fold(f64::INFINITY, f64::min);
    let mut orbits: Vec<GaugeFixedSystem> = Vec::new();
    for s in &slice {
        let c = s.canonical();
        if orbits.iter().all(|o| o.distance(&c) > DEDUP_TOL * (1.0 + scale * scale)) {
            orbits.push(c);
        }
    }
    orbits.sort_by(|a, b| {
        let (ka, kb) = (a.key(), b.key());
        ka.partial_cmp(&kb).unwrap_or(Ordering::Equal)
    });
    let residuals: Vec<f64> = orbits
        .iter()
        .map(|s| det_map(&s.to_system()).distance(phi))
        .collect();
    let noether_ranks = orbits.iter().map(|s| noether_rank(&s.to_system())).collect();
    Ok(FiberReport {
        target: *phi,
        degree_estimate: orbits.len(),
        solutions: orbits,
        residuals,
        starts_used: n_starts,
        converged: converged.len(),
        slice_solutions: slice.len(),
        min_jacobian,
        ramification_suspect: min_jacobian < SINGULAR_TOL,
        noether_ranks,
    })
}

/// Local-triviality probe of the fiber over `φ`.
///
/// Returns `false` when the fiber at `φ` is ramification-suspect, when a
/// perturbation within relative `radius` changes the orbit count, or when some
/// solution fails to continue to the perturbed target within five Newton steps.
pub fn regular_probe(phi: &QuadraticDifferential, radius: f64, n_probe: usize, n_starts: usize, seed: u64) -> Result<bool> {
    let base = solve_fiber(phi, n_starts, seed, PROBE_TOL)?;
    if base.ramification_suspect {
        return Ok(false);
    }
    if radius == 0.0 || n_probe == 0 {
        return Ok(true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let scale = phi.coeff_norm();
    for k in 0..n_probe {
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let dir = QuadraticDifferential::new(c(), c(), c());
        let dir = dir.scale(Complex64::new(radius * scale / dir.coeff_norm(), 0.0));
        let probe = *phi + dir;
        let report = match solve_fiber(&probe, n_starts, seed.wrapping_add(k as u64 + 1), PROBE_TOL) {
            Ok(r) => r,
            Err(Error::NoConvergence) => return Ok(false),
            Err(e) => return Err(e),
        };
        if report.ramification_suspect || report.degree_estimate != base.degree_estimate {
            return Ok(false);
        }
        for s in &base.solutions {
            let target = shift_target(&probe, s.shift);
            match newton([s.d1, s.f, s.g], &target, 5) {
                Some((_, it)) if it <= 5 => {}
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}

/// Normal form of `√t·A`; `det` scales by `t`.
pub fn dilation_transport(a: &GaugeFixedSystem, t: f64) -> Result<GaugeFixedSystem> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("dilation factor must be positive, got {t}")));
    }
    Ok(GaugeFixedSystem {
        d1: a.d1 * t,
        e: a.e * t.sqrt(),
        f: a.f,
        g: a.g * t,
        shift: a.shift,
    })
}

/// A differential with a double zero: `q = κ(x − r)²`.
pub fn double_zero_target(kappa: Complex64, r: Complex64) -> QuadraticDifferential {
    QuadraticDifferential::new(kappa * r * r, -kappa * r * 2.0, kappa)
}

/// `A = diag(ω, −ω)`, whose determinant is `−ω²`.
pub fn diagonal_system(omega: AbelianDifferential) -> SlTwoSystem {
    SlTwoSystem::new(omega, AbelianDifferential::zero(), AbelianDifferential::zero())
}
