//! Parallel transport of `d + tA` along paths with renormalized propagation,
//! monodromy representations of the surface group, and the diagonal model ODE.

use crate::curve::{
    continue_sheet, track_y, HyperellipticCurve, PathOnCurve, SurfaceGroupGenerators, RELATION_WORD,
};
use crate::differentials::SlTwoSystem;
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `|tr m|` below this (with `max|m| = 1`) counts as a vanishing character.
pub const TRACE_TOL: f64 = 1e-10;
/// Largest log-scale at which `det m = e^{−2λ}` is still resolvable to 1e-8.
const UNIMODULAR_MAX_SCALE: f64 = 8.0;

/// The matrix `e^λ·m` with `max|m_ij| = 1` (any value in `[1/2, 2]` is valid).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedMatrix {
    pub m: Mat2,
    pub log_scale: f64,
}

impl RenormalizedMatrix {
    pub fn identity() -> Self {
        Self {
            m: Mat2::identity(),
            log_scale: 0.0,
        }
    }

    pub fn from_matrix(m: Mat2) -> Self {
        let mut r = Self { m, log_scale: 0.0 };
        r.normalize();
        r
    }

    fn normalize(&mut self) {
        let s = self.m.max_abs();
        if s > 0.0 && s.is_finite() {
            self.m = self.m.scale_re(1.0 / s);
            self.log_scale += s.ln();
        }
    }

    /// Product `self · other`.
    pub fn mul(&self, other: &RenormalizedMatrix) -> Self {
        let mut r = Self {
            m: self.m * other.m,
            log_scale: self.log_scale + other.log_scale,
        };
        r.normalize();
        r
    }

    /// Inverse of a unimodular matrix (the adjugate, so no division by `det m`).
    pub fn inverse_unimodular(&self) -> Self {
        Self {
            m: self.m.adjugate(),
            log_scale: self.log_scale,
        }
    }

    /// The represented matrix; overflows for `λ ≳ 700`.
    pub fn to_matrix(&self) -> Mat2 {
        self.m.scale_re(self.log_scale.exp())
    }

    /// `max(|2λ + log|det m||, |arg det m|)`, or `None` when `λ` is too large for
    /// `det m = e^{−2λ}` to be computed without cancellation.
    pub fn unimodularity_defect(&self) -> Option<f64> {
        if self.log_scale > UNIMODULAR_MAX_SCALE {
            return None;
        }
        let d = self.m.det();
        Some((2.0 * self.log_scale + d.norm().ln()).abs().max(d.arg().abs()))
    }

    /// Frobenius distance of the represented matrix from the identity.
    pub fn distance_to_identity(&self) -> f64 {
        if self.log_scale > 700.0 {
            return f64::INFINITY;
        }
        (self.to_matrix() - Mat2::identity()).norm()
    }

    /// `log|tr|` of the represented matrix.
    pub fn log_char(&self) -> Result<f64> {
        let tr = self.m.trace().norm();
        if tr < TRACE_TOL {
            return Err(Error::VanishingTrace(tr));
        }
        Ok(self.log_scale + tr.ln())
    }

    /// `log‖·‖` (Frobenius) of the represented matrix.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.m.norm().ln()
    }
}

/// Free-function form of [`RenormalizedMatrix::log_char`].
pub fn log_char(m: &RenormalizedMatrix) -> Result<f64> {
    m.log_char()
}

/// Result of a propagation with its accumulated local error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub matrix: RenormalizedMatrix,
    /// Sum of accepted local error estimates (relative to the normalized matrix).
    pub est_error: f64,
    pub steps: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Solves `F′(s) = −D(s)·F(s)` on `[0, 1]` from `start` with Dormand–Prince 5(4).
///
/// Steps are capped at `2/‖D(s)‖` and the normalized matrix is rescaled after
/// every accepted step.
pub fn propagate<D: Fn(f64) -> Mat2>(d: &D, start: RenormalizedMatrix, tol: f64) -> Result<Transfer> {
    let mut y = start;
    let mut s = 0.0;
    let mut h: f64 = 1.0 / 64.0;
    let mut est_error = 0.0;
    let mut steps = 0;
    let mut k = [Mat2::zero(); 7];
    let mut first = d(0.0).scale_re(-1.0);
    while s < 1.0 {
        let cap = 2.0 / first.op_norm().max(1e-300);
        h = h.min(cap).min(1.0 - s);
        if h < 1e-14 {
            return Err(Error::StepUnderflow { s, step: h });
        }
        k[0] = first * y.m;
        for i in 1..7 {
            let mut yi = y.m;
            for j in 0..i {
                if A[i][j] != 0.0 {
                    yi = yi + k[j].scale_re(h * A[i][j]);
                }
            }
            let g = d(s + C[i] * h).scale_re(-1.0);
            k[i] = g * yi;
        }
        let mut y5 = y.m;
        let mut diff = Mat2::zero();
        for i in 0..7 {
            if B5[i] != 0.0 {
                y5 = y5 + k[i].scale_re(h * B5[i]);
            }
            let e = B5[i] - B4[i];
            if e != 0.0 {
                diff = diff + k[i].scale_re(h * e);
            }
        }
        let err = diff.max_abs() / y5.max_abs().max(1e-300);
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= tol {
            s = if 1.0 - s - h < 1e-15 { 1.0 } else { s + h };
            y = RenormalizedMatrix {
                m: y5,
                log_scale: y.log_scale,
            };
            y.normalize();
            est_error += err;
            steps += 1;
            // FSAL: the last stage is D at the new point
            first = d(s).scale_re(-1.0);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(Transfer {
        matrix: y,
        est_error,
        steps,
    })
}

/// Transfer matrix of `dF + tA·F = 0` along `path` with all details.
pub fn transfer(
    curve: &HyperellipticCurve,
    a: &SlTwoSystem,
    t: f64,
    path: &PathOnCurve,
    tol: f64,
) -> Result<Transfer> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("t must be nonnegative, got {t}")));
    }
    let clearance = path.clearance(curve);
    let tiny = 1e-12 * curve.separation();
    if clearance <= tiny {
        return Err(Error::PathTooClose { clearance, tol: tiny });
    }
    let mut out = Transfer {
        matrix: RenormalizedMatrix::identity(),
        est_error: 0.0,
        steps: 0,
    };
    if t == 0.0 || a.flat().iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        return Ok(out);
    }
    let ys = track_y(curve, path, 1.0 / 64.0)?;
    for (seg, branch) in ys.segments.iter().zip(ys.branches.iter()) {
        let coef = |s: f64| {
            let x = seg.point(s);
            let y = branch.resolve(s, curve.p(x).sqrt());
            a.numerator(x).scale(seg.derivative(s) * t / y)
        };
        let step = propagate(&coef, out.matrix, tol)?;
        out.matrix = step.matrix;
        out.est_error += step.est_error;
        out.steps += step.steps;
    }
    Ok(out)
}

/// Transfer matrix of `dF + tA·F = 0` along `path`.
pub fn transfer_matrix(
    curve: &HyperellipticCurve,
    a: &SlTwoSystem,
    t: f64,
    path: &PathOnCurve,
    tol: f64,
) -> Result<RenormalizedMatrix> {
    transfer(curve, a, t, path, tol).map(|r| r.matrix)
}

/// Monodromy of the four generators and the defect of the surface-group relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub gens: [RenormalizedMatrix; 4],
    pub t: f64,
    pub defect: f64,
    /// Whether the generators were recomputed in double-double arithmetic.
    pub extended: bool,
}

impl Representation {
    /// Monodromy of the relation word `[a1,b1][a2,b2]` (paths compose right to left).
    pub fn relation_matrix(gens: &[RenormalizedMatrix; 4]) -> RenormalizedMatrix {
        let mut acc = RenormalizedMatrix::identity();
        for &(g, inv) in RELATION_WORD.iter() {
            let m = if inv { gens[g].inverse_unimodular() } else { gens[g] };
            acc = m.mul(&acc);
        }
        acc
    }
}

/// Tolerance handed to the integrator when a relation defect `tol` is requested.
pub fn integrator_tol(tol: f64) -> f64 {
    (tol * 1e-3).clamp(1e-14, 1e-6)
}

/// Monodromy representation of `d + tA` on the given generators.
pub fn representation(
    curve: &HyperellipticCurve,
    a: &SlTwoSystem,
    t: f64,
    gens: &SurfaceGroupGenerators,
    tol: f64,
) -> Result<Representation> {
    let itol = integrator_tol(tol);
    let mats: Vec<Result<RenormalizedMatrix>> = gens
        .loops
        .par_iter()
        .map(|lp| transfer_matrix(curve, a, t, lp, itol))
        .collect();
    let mut out = [RenormalizedMatrix::identity(); 4];
    for (o, m) in out.iter_mut().zip(mats) {
        *o = m?;
    }
    let defect = Representation::relation_matrix(&out).distance_to_identity();
    if defect <= tol {
        return Ok(Representation {
            gens: out,
            t,
            defect,
            extended: false,
        });
    }
    // rounding in the relation word grows like the product of generator norms
    let (gens_ext, defect) = crate::precise::relation_defect_extended(curve, a, t, gens)?;
    if !(defect <= tol) {
        return Err(Error::RelationViolation { defect, tol });
    }
    Ok(Representation {
        gens: gens_ext,
        t,
        defect,
        extended: true,
    })
}

/// Checks that a plane loop lifts to a closed loop on the curve.
pub fn ensure_closed_on_curve(curve: &HyperellipticCurve, path: &PathOnCurve) -> Result<()> {
    if !path.is_closed_in_plane() {
        return Err(Error::InvalidInput("loop is not closed in the x-plane".into()));
    }
    if continue_sheet(curve, path, 0.0)? != path.start_sheet {
        return Err(Error::InvalidInput("loop changes sheet; it is not closed on the curve".into()));
    }
    Ok(())
}

/// Piecewise-linear interpolation of uniform samples on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples<T> {
    pub values: Vec<T>,
}

impl<T: Copy> Samples<T> {
    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.values.len() - 1;
        let u = (s.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (u.floor() as usize).min(n.saturating_sub(1));
        (i, u - i as f64)
    }
}

impl Samples<Mat2> {
    pub fn at(&self, s: f64) -> Mat2 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        let (i, f) = self.locate(s);
        self.values[i].scale_re(1.0 - f) + self.values[i + 1].scale_re(f)
    }
}

impl Samples<Complex64> {
    pub fn at(&self, s: f64) -> Complex64 {
        if self.values.len() == 1 {
            return self.values[0];
        }
        let (i, f) = self.locate(s);
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }
}

/// Solves `f′ + (B(s) + t·diag(a(s), −a(s)))·f = 0`, `f(0) = I`, on `[0, 1]`.
pub fn wkb_model_ode<B, Af>(b: &B, a: &Af, t: f64, tol: f64) -> Result<RenormalizedMatrix>
where
    B: Fn(f64) -> Mat2,
    Af: Fn(f64) -> Complex64,
{
    let d = |s: f64| {
        let v = a(s) * t;
        b(s) + Mat2::diag(v, -v)
    };
    propagate(&d, RenormalizedMatrix::identity(), tol).map(|r| r.matrix)
}

/// Sampled-input form of [`wkb_model_ode`].
pub fn wkb_model_ode_sampled(b: &Samples<Mat2>, a: &Samples<Complex64>, t: f64, tol: f64) -> Result<RenormalizedMatrix> {
    if b.values.is_empty() || a.values.is_empty() {
        return Err(Error::InvalidInput("empty samples".into()));
    }
    wkb_model_ode(&|s| b.at(s), &|s| a.at(s), t, tol)
}

/// Index (0 or 1) of the diagonal corner that dominates `f_t(1)` as `t → ∞`:
/// corner (1,1) when `Re∫a < 0`, corner (2,2) when `Re∫a > 0`.
pub fn dominant_corner(re_integral_a: f64) -> usize {
    if re_integral_a > 0.0 {
        1
    } else {
        0
    }
}

/// Largest entry of `m / m[c][c]` other than the `(c, c)` corner itself.
pub fn corner_deviation(m: &RenormalizedMatrix, corner: usize) -> f64 {
    let pivot = m.m.0[corner][corner];
    if pivot.norm() == 0.0 {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            if i == corner && j == corner {
                continue;
            }
            worst = worst.max((m.m.0[i][j] / pivot).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{canonical_generators, Segment, Sheet};
    use crate::differentials::AbelianDifferential;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn x5_minus_x() -> HyperellipticCurve {
        HyperellipticCurve::new(&[c(0., 0.), c(-1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)], 1e-6).unwrap()
    }

    fn sample_system() -> SlTwoSystem {
        SlTwoSystem::new(
            AbelianDifferential::new(c(0.3, -0.2), c(0.1, 0.4)),
            AbelianDifferential::new(c(-0.5, 0.1), c(0.2, 0.0)),
            AbelianDifferential::new(c(0.0, 0.6), c(-0.3, 0.2)),
        )
    }

    #[test]
    fn zero_system_is_identity() {
        let curve = x5_minus_x();
        let gens = canonical_generators(&curve).unwrap();
        let r = representation(&curve, &SlTwoSystem::zero(), 1.0, &gens, 1e-8).unwrap();
        for g in r.gens.iter() {
            assert_eq!(*g, RenormalizedMatrix::identity());
        }
        assert_eq!(r.defect, 0.0);
    }

    #[test]
    fn constant_diagonal_closed_form() {
        let a = c(0.7, -1.3);
        let t = 3.0;
        let m = wkb_model_ode(&|_| Mat2::zero(), &|_| a, t, 1e-12).unwrap();
        let exact = Mat2::diag((-a * t).exp(), (a * t).exp());
        let got = m.to_matrix();
        assert!((got - exact).max_abs() < 1e-10 * exact.max_abs());
    }

    #[test]
    fn log_char_examples() {
        assert!((RenormalizedMatrix::identity().log_char().unwrap() - 2f64.ln()).abs() < 1e-15);
        let s: f64 = 50.0;
        let d = RenormalizedMatrix::from_matrix(Mat2::diag(c(s.exp(), 0.0), c((-s).exp(), 0.0)));
        assert!((d.log_char().unwrap() - s).abs() < 1e-12);
        let rot = RenormalizedMatrix::from_matrix(Mat2::new(c(0., 0.), c(-1., 0.), c(1., 0.), c(0., 0.)));
        assert!(matches!(rot.log_char(), Err(Error::VanishingTrace(_))));
    }

    #[test]
    fn representation_relation_and_unimodularity() {
        let curve = x5_minus_x();
        let gens = canonical_generators(&curve).unwrap();
        let a = sample_system();
        let r = representation(&curve, &a, 1.0, &gens, 1e-8).unwrap();
        assert!(r.defect <= 1e-8);
        for g in r.gens.iter() {
            if let Some(d) = g.unimodularity_defect() {
                assert!(d < 1e-8, "{d}");
            }
        }
    }

    #[test]
    fn gauge_conjugation_preserves_characters() {
        let curve = x5_minus_x();
        let gens = canonical_generators(&curve).unwrap();
        let a = sample_system();
        let g = Mat2::new(c(1.0, 0.2), c(0.5, 0.0), c(-0.3, 0.1), c(0.8, -0.4));
        let g = g.scale(c(1.0, 0.0) / g.det().sqrt());
        let r1 = representation(&curve, &a, 1.0, &gens, 1e-9).unwrap();
        let r2 = representation(&curve, &a.conjugate(&g), 1.0, &gens, 1e-9).unwrap();
        for k in 0..4 {
            let (l1, l2) = (r1.gens[k].log_char().unwrap(), r2.gens[k].log_char().unwrap());
            assert!((l1 - l2).abs() < 1e-9, "{l1} vs {l2}");
        }
    }

    #[test]
    fn inverse_path_gives_inverse() {
        let curve = x5_minus_x();
        let a = sample_system();
        let path = PathOnCurve::new(
            vec![
                Segment::line(c(0.5, 0.5), c(-0.5, 0.6)),
                Segment::arc(c(0.0, 0.0), c(-0.5, 0.6).norm(), c(-0.5, 0.6).arg(), -1.5),
            ],
            Sheet::Plus,
        )
        .unwrap();
        let f = transfer_matrix(&curve, &a, 2.0, &path, 1e-12).unwrap();
        let b = transfer_matrix(&curve, &a, 2.0, &path.reversed(&curve).unwrap(), 1e-12).unwrap();
        assert!(b.mul(&f).distance_to_identity() < 1e-9);
    }

    #[test]
    fn closed_loop_check() {
        let curve = x5_minus_x();
        let one = PathOnCurve::circle(c(1.0, 0.0), 0.2, 0.0, Sheet::Plus);
        assert!(ensure_closed_on_curve(&curve, &one).is_err());
        let two = PathOnCurve::circle(c(0.5, 0.0), 0.7, 0.0, Sheet::Plus);
        assert!(ensure_closed_on_curve(&curve, &two).is_ok());
    }

    #[test]
    fn corner_choice() {
        let m = wkb_model_ode(&|_| Mat2::zero(), &|_| c(1.0, 0.0), 10.0, 1e-12).unwrap();
        assert_eq!(dominant_corner(1.0), 1);
        assert!(corner_deviation(&m, 1) < 1e-8);
    }
}
