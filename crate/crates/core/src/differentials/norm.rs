//! Integrals of `|φ|` and `μφ` over the curve, pulled back to the x-plane.
//!
//! The plane is covered by a smooth partition of unity: a polar disk of radius
//! `ρ = separation/4` around each branch point (the polar Jacobian cancels the
//! `1/|x − e|` singularity), the exterior `|x| ≥ R` in the coordinate `u = 1/x`,
//! and a square holding the remainder. Both sheets contribute equally, hence the
//! factor 2 in every weight.

use super::{BeltramiRepresentative, QuadraticDifferential};
use crate::curve::HyperellipticCurve;
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_2d, Cell};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Absolute/relative tolerance pair; a run succeeds when `error ≤ max(atol, rtol·|I|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadTol {
    pub atol: f64,
    pub rtol: f64,
    pub max_cells: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        Self {
            atol: 1e-8,
            rtol: 1e-8,
            max_cells: 400_000,
        }
    }
}

impl QuadTol {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Self {
            atol,
            rtol,
            ..Self::default()
        }
    }
}

/// Smooth step from 0 (τ ≤ 0) to 1 (τ ≥ 1).
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |s: f64| (-1.0 / s).exp();
    let (a, b) = (f(t), f(1.0 - t));
    a / (a + b)
}

/// Integration engine for one curve.
#[derive(Debug, Clone)]
pub struct SurfaceQuadrature {
    curve: HyperellipticCurve,
    rho: f64,
    radius: f64,
}

impl SurfaceQuadrature {
    pub fn new(curve: &HyperellipticCurve) -> Self {
        let rho = curve.separation() / 4.0;
        let reach = curve
            .branch_points()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max);
        Self {
            curve: curve.clone(),
            rho,
            radius: (reach + rho).max(4.0 * rho),
        }
    }

    pub fn curve(&self) -> &HyperellipticCurve {
        &self.curve
    }

    /// Weight of branch disk `j` at distance `r` from its centre.
    fn disk_bump(&self, r: f64) -> f64 {
        1.0 - smoothstep((r - 0.5 * self.rho) / (0.5 * self.rho))
    }

    fn outer_bump(&self, r: f64) -> f64 {
        smoothstep((r - self.radius) / self.radius)
    }

    /// Point and area weight (both sheets, `1/|p|` included) for local coordinates `(a, b)`.
    fn node(&self, piece: usize, a: f64, b: f64) -> Option<(Complex64, f64)> {
        let nb = self.curve.branch_points().len();
        if piece < nb {
            let e = self.curve.branch_points()[piece];
            let x = e + Complex64::from_polar(a, b);
            let w = self.disk_bump(a);
            if w == 0.0 {
                return None;
            }
            Some((x, 2.0 * w / self.curve.p_without(piece, x).norm()))
        } else if piece == nb {
            let u = Complex64::from_polar(a, b);
            let x = u.inv();
            let w = self.outer_bump(x.norm());
            if w == 0.0 {
                return None;
            }
            Some((x, 2.0 * w / (a * a * a * self.curve.p(x).norm())))
        } else {
            let x = Complex64::new(a, b);
            let taken: f64 = self
                .curve
                .branch_points()
                .iter()
                .map(|e| self.disk_bump((x - e).norm()))
                .sum::<f64>()
                + self.outer_bump(x.norm());
            let w = 1.0 - taken;
            if w <= 0.0 {
                return None;
            }
            Some((x, 2.0 * w / self.curve.p(x).norm()))
        }
    }

    fn initial_cells(&self) -> Vec<Cell> {
        let nb = self.curve.branch_points().len();
        let mut cells = Vec::new();
        let quarter = |piece: usize, r0: f64, r1: f64, cells: &mut Vec<Cell>| {
            for k in 0..4 {
                cells.push(Cell {
                    piece,
                    x0: r0,
                    x1: r1,
                    y0: k as f64 * PI / 2.0,
                    y1: (k + 1) as f64 * PI / 2.0,
                });
            }
        };
        for j in 0..nb {
            quarter(j, 0.0, 0.5 * self.rho, &mut cells);
            quarter(j, 0.5 * self.rho, self.rho, &mut cells);
        }
        quarter(nb, 0.0, 0.5 / self.radius, &mut cells);
        quarter(nb, 0.5 / self.radius, 1.0 / self.radius, &mut cells);
        let n = 8;
        let side = 4.0 * self.radius / n as f64;
        for i in 0..n {
            for k in 0..n {
                let x0 = -2.0 * self.radius + i as f64 * side;
                let y0 = -2.0 * self.radius + k as f64 * side;
                cells.push(Cell {
                    piece: nb + 1,
                    x0,
                    x1: x0 + side,
                    y0,
                    y1: y0 + side,
                });
            }
        }
        cells
    }

    /// `∫ g(x)/|p(x)| dA` over both sheets, i.e. `2∫_C g/|p|`.
    pub fn integrate<G>(&self, g: &G, tol: QuadTol) -> Result<crate::quadrature::Estimate>
    where
        G: Fn(Complex64) -> Complex64 + Sync,
    {
        let f = |piece: usize, a: f64, b: f64| match self.node(piece, a, b) {
            Some((x, w)) => g(x) * w,
            None => Complex64::new(0.0, 0.0),
        };
        let r = adaptive_2d(&f, &self.initial_cells(), tol.atol, tol.rtol, tol.max_cells)?;
        Ok(crate::quadrature::Estimate {
            value: r.value,
            error: r.error,
        })
    }

    /// Freezes the partition adapted to `reference` into a positive-weight rule.
    pub fn rule<G>(&self, reference: &G, tol: QuadTol) -> Result<SurfaceRule>
    where
        G: Fn(Complex64) -> Complex64 + Sync,
    {
        let f = |piece: usize, a: f64, b: f64| match self.node(piece, a, b) {
            Some((x, w)) => reference(x) * w,
            None => Complex64::new(0.0, 0.0),
        };
        let r = adaptive_2d(&f, &self.initial_cells(), tol.atol, tol.rtol, tol.max_cells)?;
        let chunks: Vec<Vec<(Complex64, f64)>> = r
            .leaves
            .par_iter()
            .map(|cell| {
                cell.nodes()
                    .into_iter()
                    .filter_map(|(a, b, wc)| self.node(cell.piece, a, b).map(|(x, w)| (x, w * wc)))
                    .filter(|(_, w)| *w > 0.0)
                    .collect()
            })
            .collect();
        let (points, weights) = chunks.into_iter().flatten().unzip();
        Ok(SurfaceRule { points, weights })
    }
}

/// Fixed cubature `∫ g/|p| dA ≈ Σ wᵢ g(xᵢ)` with positive weights.
#[derive(Debug, Clone, Default)]
pub struct SurfaceRule {
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl SurfaceRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn apply<G: Fn(Complex64) -> Complex64 + Sync>(&self, g: &G) -> Complex64 {
        self.points
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(x, w)| g(*x) * *w)
            .sum()
    }

    /// Rule approximation of `‖φ‖`.
    pub fn norm(&self, phi: &QuadraticDifferential) -> f64 {
        let [q0, q1, q2] = phi.coeffs;
        self.points
            .par_chunks(4096)
            .zip(self.weights.par_chunks(4096))
            .map(|(xs, ws)| {
                let mut acc = 0.0;
                for (x, w) in xs.iter().zip(ws) {
                    let v = q0 + *x * (q1 + *x * q2);
                    acc += w * (v.re * v.re + v.im * v.im).sqrt();
                }
                acc
            })
            .sum()
    }
}

/// `‖φ‖ = ∫_C |φ|`, with an error estimate.
pub fn qd_norm(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    tol: QuadTol,
) -> Result<crate::quadrature::Estimate> {
    if phi.is_zero() {
        return Ok(crate::quadrature::Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    SurfaceQuadrature::new(curve).integrate(&|x| Complex64::new(phi.numerator(x).norm(), 0.0), tol)
}

/// Pointwise `μ`-numerator `k·conj(q_μ)/|q_μ|` (zero where `q_μ` vanishes).
fn beltrami_factor(mu: &BeltramiRepresentative, x: Complex64) -> Complex64 {
    let q = mu.q.numerator(x);
    let n = q.norm();
    if n == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        q.conj() * (mu.k / n)
    }
}

/// `⟨μ, φ⟩ = ∫_C μφ`.
pub fn belt_pairing(
    curve: &HyperellipticCurve,
    mu: &BeltramiRepresentative,
    phi: &QuadraticDifferential,
    tol: QuadTol,
) -> Result<crate::quadrature::Estimate> {
    if mu.k == 0.0 || phi.is_zero() {
        return Ok(crate::quadrature::Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    SurfaceQuadrature::new(curve).integrate(&|x| beltrami_factor(mu, x) * phi.numerator(x), tol)
}

/// Search settings for [`teich_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeichNormParams {
    /// Grid points per angular coordinate of the coarse search.
    pub grid: usize,
    /// Simplex-size tolerance of the local refinement.
    pub refine_tol: f64,
    /// Tolerance of the frozen cubature rule.
    pub quad: QuadTol,
}

impl Default for TeichNormParams {
    fn default() -> Self {
        Self {
            grid: 4,
            refine_tol: 1e-7,
            quad: QuadTol {
                atol: 1e-7,
                rtol: 1e-7,
                max_cells: 400_000,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeichNormResult {
    pub value: f64,
    /// Maximizing direction, normalized so that `⟨μ, φ⟩` is real and positive.
    pub maximizer: QuadraticDifferential,
}

fn from_angles(v: &[f64; 4]) -> [Complex64; 3] {
    let (a, b, u, w) = (v[0], v[1], v[2], v[3]);
    [
        Complex64::new(a.cos(), 0.0),
        Complex64::from_polar(a.sin() * b.cos(), u),
        Complex64::from_polar(a.sin() * b.sin(), w),
    ]
}

/// Nelder–Mead minimization on `Rⁿ`; returns the best vertex and value.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < tol {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let refl = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&exp);
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
        } else {
            let (cand, fc) = if fr < worst.1 {
                let c = lerp(&centroid, &refl, 0.5);
                let v = f(&c);
                (c, v)
            } else {
                let c = lerp(&centroid, &worst.0, 0.5);
                let v = f(&c);
                (c, v)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (cand, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&best, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    simplex.swap_remove(0)
}

/// Dual (Finsler) norm `sup |⟨μ, φ⟩| / ‖φ‖` over nonzero quadratic differentials.
///
/// The pairing functional and the norm are evaluated on one frozen cubature rule
/// adapted to `μ`; the supremum is located by a coarse grid over the unit sphere
/// of `C³` modulo phase, refined by Nelder–Mead from the best grid points.
pub fn teich_norm(
    curve: &HyperellipticCurve,
    mu: &BeltramiRepresentative,
    params: TeichNormParams,
) -> Result<TeichNormResult> {
    if mu.k == 0.0 {
        return Ok(TeichNormResult {
            value: 0.0,
            maximizer: QuadraticDifferential::from_real([1.0, 0.0, 0.0]),
        });
    }
    if params.grid == 0 {
        return Err(Error::InvalidInput("grid must be positive".into()));
    }
    let scale = mu.q.coeff_norm();
    let qmu = mu.q.scale(Complex64::new(1.0 / scale, 0.0));
    let reference = |x: Complex64| Complex64::new(qmu.numerator(x).norm() + 1.0 + x.norm_sqr(), 0.0);
    let rule = SurfaceQuadrature::new(curve).rule(&reference, params.quad)?;
    let mut ell = [Complex64::new(0.0, 0.0); 3];
    for (k, l) in ell.iter_mut().enumerate() {
        *l = rule.apply(&|x| beltrami_factor(mu, x) * x.powi(k as i32));
    }
    let ratio = |q: &[Complex64; 3]| -> f64 {
        let phi = QuadraticDifferential::new(q[0], q[1], q[2]);
        let n = rule.norm(&phi);
        if n <= 0.0 {
            return 0.0;
        }
        (ell[0] * q[0] + ell[1] * q[1] + ell[2] * q[2]).norm() / n
    };

    let g = params.grid;
    let mut candidates: Vec<([f64; 4], f64)> = Vec::new();
    for i in 0..g {
        let a = (i as f64 + 0.5) / g as f64 * PI / 2.0;
        for j in 0..g {
            let b = (j as f64 + 0.5) / g as f64 * PI / 2.0;
            for ku in 0..(2 * g) {
                let u = ku as f64 * PI / g as f64;
                for kw in 0..(2 * g) {
                    let w = kw as f64 * PI / g as f64;
                    candidates.push(([a, b, u, w], 0.0));
                }
            }
        }
    }
    for c in candidates.iter_mut() {
        c.1 = ratio(&from_angles(&c.0));
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

    let objective = |v: &[f64]| -> f64 {
        let q = [
            Complex64::new(v[0], v[1]),
            Complex64::new(v[2], v[3]),
            Complex64::new(v[4], v[5]),
        ];
        -ratio(&q)
    };
    let mut best = (f64::NEG_INFINITY, [Complex64::new(0.0, 0.0); 3]);
    for (angles, _) in candidates.iter().take(3) {
        let q = from_angles(angles);
        let mut x: Vec<f64> = q.iter().flat_map(|c| [c.re, c.im]).collect();
        let mut value = -objective(&x);
        let mut step = 0.5 / g as f64;
        // restart until a full restart no longer improves
        for _ in 0..6 {
            let (xn, fv) = nelder_mead(&objective, &x, step, params.refine_tol, 4000);
            let improved = -fv - value;
            let norm = xn.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = xn.iter().map(|v| v / norm).collect();
            value = value.max(-fv);
            if improved <= params.refine_tol * 1e-2 {
                break;
            }
            step = (step * 0.5).max(10.0 * params.refine_tol);
        }
        if value > best.0 {
            best = (
                value,
                [
                    Complex64::new(x[0], x[1]),
                    Complex64::new(x[2], x[3]),
                    Complex64::new(x[4], x[5]),
                ],
            );
        }
    }
    let q = best.1;
    let pair = ell[0] * q[0] + ell[1] * q[1] + ell[2] * q[2];
    let phase = if pair.norm() > 0.0 { pair.conj() / pair.norm() } else { Complex64::new(1.0, 0.0) };
    let phi = QuadraticDifferential::new(q[0], q[1], q[2]).scale(phase);
    let norm = rule.norm(&phi);
    Ok(TeichNormResult {
        value: best.0,
        maximizer: phi.scale(Complex64::new(1.0 / norm, 0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn x5_minus_x() -> HyperellipticCurve {
        HyperellipticCurve::new(&[c(0., 0.), c(-1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)], 1e-6).unwrap()
    }

    #[test]
    fn smoothstep_is_a_partition() {
        for t in [-0.5, 0.0, 0.1, 0.5, 0.9, 1.0, 2.0] {
            let s = smoothstep(t);
            assert!((s + smoothstep(1.0 - t) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn partition_weights_integrate_area() {
        // with g = |p| the integral is twice the area of the square [−L, L]² when g is
        // restricted to it; use a compactly supported bump instead
        let curve = x5_minus_x();
        let sq = SurfaceQuadrature::new(&curve);
        let g = |x: Complex64| {
            let r2 = x.norm_sqr();
            Complex64::new(curve.p(x).norm() * (-r2).exp(), 0.0)
        };
        let est = sq.integrate(&g, QuadTol::new(1e-10, 1e-10)).unwrap();
        assert!((est.value.re - 2.0 * PI).abs() < 1e-8, "{}", est.value.re);
    }

    #[test]
    fn norm_zero_and_scaling() {
        let curve = x5_minus_x();
        assert_eq!(qd_norm(&curve, &QuadraticDifferential::zero(), QuadTol::default()).unwrap().value.re, 0.0);
        let phi = QuadraticDifferential::new(c(0.3, 0.1), c(-0.2, 0.5), c(0.7, 0.0));
        let a = qd_norm(&curve, &phi, QuadTol::default()).unwrap().value.re;
        let b = qd_norm(&curve, &phi.scale(c(2.5, 0.0)), QuadTol::default()).unwrap().value.re;
        assert!((b - 2.5 * a).abs() < 1e-8 * b);
    }

    #[test]
    fn pairing_with_own_direction_is_norm() {
        let curve = x5_minus_x();
        let phi = QuadraticDifferential::new(c(1.0, 0.0), c(0.0, 0.3), c(0.2, 0.0));
        let mu = BeltramiRepresentative::new(phi, 0.4).unwrap();
        let pair = belt_pairing(&curve, &mu, &phi, QuadTol::default()).unwrap().value;
        let norm = qd_norm(&curve, &phi, QuadTol::default()).unwrap().value.re;
        assert!(pair.im.abs() < 1e-7 * norm);
        assert!((pair.re - 0.4 * norm).abs() < 1e-7 * norm);
        let zero = BeltramiRepresentative::new(phi, 0.0).unwrap();
        assert_eq!(belt_pairing(&curve, &zero, &phi, QuadTol::default()).unwrap().value, c(0.0, 0.0));
    }

    #[test]
    fn nelder_mead_quadratic() {
        let f = |v: &[f64]| (v[0] - 1.0).powi(2) + 3.0 * (v[1] + 2.0).powi(2);
        let (x, fx) = nelder_mead(&f, &[0.0, 0.0], 0.5, 1e-10, 10_000);
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] + 2.0).abs() < 1e-8 && fx < 1e-15);
    }
}
