//! Double-double parallel transport for relation checks that double precision
//! cannot resolve.
//!
//! The transport equation `F′ = −t·N(x)/y·x′·F` has coefficients analytic away
//! from the branch points, so on a line segment `x = x₀ + h·u` the Taylor
//! coefficients of `p`, `y = √p`, `1/y` and `F` follow from exact recurrences.
//! Steps are capped at a third of the distance to the nearest branch point.
//! Arcs are replaced by inscribed chords; the circular segments they cut off
//! must not contain a branch point, so the homotopy class is unchanged.

use crate::curve::{HyperellipticCurve, PathOnCurve, Segment, SurfaceGroupGenerators, RELATION_WORD};
use crate::differentials::SlTwoSystem;
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::monodromy::RenormalizedMatrix;
use num_complex::{Complex, Complex64};
use std::f64::consts::PI;
use twofloat::TwoFloat;

type Cdd = Complex<TwoFloat>;

/// Taylor terms per step.
const TERMS: usize = 96;
/// Largest angle subtended by one chord replacing an arc.
const CHORD_ANGLE: f64 = PI / 8.0;

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn cdd(z: Complex64) -> Cdd {
    Complex::new(dd(z.re), dd(z.im))
}

fn to_f64(x: TwoFloat) -> f64 {
    x.hi() + x.lo()
}

fn to_c(z: Cdd) -> Complex64 {
    Complex64::new(to_f64(z.re), to_f64(z.im))
}

fn mag(z: &Cdd) -> f64 {
    z.re.hi().hypot(z.im.hi())
}

fn zero() -> Cdd {
    Complex::new(dd(0.0), dd(0.0))
}

/// Square root of `z` on the sign of `near`, refined by Newton steps.
fn sqrt_near(z: Cdd, near: Complex64) -> Cdd {
    let mut w = to_c(z).sqrt();
    if (w - near).norm() > (w + near).norm() {
        w = -w;
    }
    let mut w = cdd(w);
    let half = dd(0.5);
    for _ in 0..2 {
        let q = z / w;
        w = Complex::new((w.re + q.re) * half, (w.im + q.im) * half);
    }
    w
}

/// A 2×2 matrix in double-double times `2^exp`.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedMatrix {
    m: [[Cdd; 2]; 2],
    exp: i32,
}

fn mat_mul(a: &[[Cdd; 2]; 2], b: &[[Cdd; 2]; 2]) -> [[Cdd; 2]; 2] {
    let mut out = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat_max(a: &[[Cdd; 2]; 2]) -> f64 {
    a.iter().flatten().map(mag).fold(0.0, f64::max)
}

fn mat_dd(m: &Mat2) -> [[Cdd; 2]; 2] {
    [[cdd(m.0[0][0]), cdd(m.0[0][1])], [cdd(m.0[1][0]), cdd(m.0[1][1])]]
}

impl ExtendedMatrix {
    pub fn identity() -> Self {
        let one = Complex::new(dd(1.0), dd(0.0));
        Self {
            m: [[one, zero()], [zero(), one]],
            exp: 0,
        }
    }

    fn normalize(&mut self) {
        let s = mat_max(&self.m);
        if s > 1e100 || (s < 1e-100 && s > 0.0) {
            let k = s.log2().round() as i32;
            let f = dd(2f64.powi(-k));
            for row in self.m.iter_mut() {
                for z in row.iter_mut() {
                    *z = Complex::new(z.re * f, z.im * f);
                }
            }
            self.exp += k;
        }
    }

    pub fn mul(&self, o: &ExtendedMatrix) -> Self {
        let mut r = Self {
            m: mat_mul(&self.m, &o.m),
            exp: self.exp + o.exp,
        };
        r.normalize();
        r
    }

    /// Inverse of a unimodular matrix by the adjugate.
    pub fn inverse_unimodular(&self) -> Self {
        let m = &self.m;
        Self {
            m: [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]],
            exp: self.exp,
        }
    }

    /// Frobenius distance from the identity.
    pub fn distance_to_identity(&self) -> f64 {
        if self.exp != 0 {
            return f64::INFINITY;
        }
        let one = Complex::new(dd(1.0), dd(0.0));
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { self.m[i][j] - one } else { self.m[i][j] };
                s += to_c(d).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn to_renormalized(&self) -> RenormalizedMatrix {
        let m = Mat2::new(to_c(self.m[0][0]), to_c(self.m[0][1]), to_c(self.m[1][0]), to_c(self.m[1][1]));
        let mut r = RenormalizedMatrix::from_matrix(m);
        r.log_scale += self.exp as f64 * std::f64::consts::LN_2;
        r
    }
}

/// Line pieces of a path; arcs become chains of chords.
fn polygon(curve: &HyperellipticCurve, path: &PathOnCurve) -> Result<Vec<(Complex64, Complex64)>> {
    let mut out: Vec<(Complex64, Complex64)> = Vec::new();
    let mut cur = path.start();
    for seg in &path.segments {
        match *seg {
            Segment::Line { to, .. } => {
                out.push((cur, to));
                cur = to;
            }
            Segment::Arc {
                center,
                radius,
                sweep,
                ..
            } => {
                let n = (sweep.abs() / CHORD_ANGLE).ceil().max(1.0) as usize;
                for k in 1..=n {
                    let to = seg.point(k as f64 / n as f64);
                    let cross = |u: Complex64, v: Complex64| u.re * v.im - u.im * v.re;
                    for &e in curve.branch_points() {
                        let inside = (e - center).norm() < radius * (1.0 + 1e-9);
                        let beyond = cross(to - cur, e - cur) * cross(to - cur, center - cur) < 0.0;
                        if inside && beyond {
                            return Err(Error::DegenerateConfiguration(format!(
                                "branch point {e} lies between an arc and its chord"
                            )));
                        }
                    }
                    out.push((cur, to));
                    cur = to;
                }
            }
        }
    }
    Ok(out)
}

/// Coefficients of `p(x₀ + h·u)` in `u`.
fn shifted_poly(coeffs: &[Cdd], x0: Cdd, h: Cdd) -> Vec<Cdd> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let t = c[j + 1] * x0;
            c[j] = c[j] + t;
        }
    }
    let mut hp = Complex::new(dd(1.0), dd(0.0));
    for ci in c.iter_mut() {
        *ci = *ci * hp;
        hp = hp * h;
    }
    c
}

struct Stepper<'a> {
    p: Vec<Cdd>,
    m0: [[Cdd; 2]; 2],
    m1: [[Cdd; 2]; 2],
    t: Cdd,
    curve: &'a HyperellipticCurve,
    scale: f64,
}

impl Stepper<'_> {
    /// One Taylor step from `x0` (value `y0`) by `h`; `None` if the series has not converged.
    fn step(&self, f: &[[Cdd; 2]; 2], x0: Complex64, y0: Cdd, h: Complex64) -> Option<([[Cdd; 2]; 2], Cdd)> {
        let hd = cdd(h);
        let pc = shifted_poly(&self.p, cdd(x0), hd);
        let two = dd(2.0);
        let mut y = vec![zero(); TERMS];
        y[0] = y0;
        let inv2y0 = Complex::new(dd(1.0), dd(0.0)) / Complex::new(y0.re * two, y0.im * two);
        for m in 1..TERMS {
            let mut s = if m < pc.len() { pc[m] } else { zero() };
            for j in 1..m {
                s = s - y[j] * y[m - j];
            }
            y[m] = s * inv2y0;
        }
        let mut z = vec![zero(); TERMS];
        z[0] = Complex::new(dd(1.0), dd(0.0)) / y0;
        for m in 1..TERMS {
            let mut s = zero();
            for j in 1..=m {
                s = s + y[j] * z[m - j];
            }
            z[m] = -(s * z[0]);
        }
        // D_m = t·h·(N₀ z_m + h·M₁ z_{m−1}) with N₀ = M₀ + x₀M₁
        let x0d = cdd(x0);
        let mut n0 = self.m0;
        for i in 0..2 {
            for j in 0..2 {
                n0[i][j] = n0[i][j] + x0d * self.m1[i][j];
            }
        }
        let th = self.t * hd;
        let dser: Vec<[[Cdd; 2]; 2]> = (0..TERMS)
            .map(|m| {
                let mut d = [[zero(); 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = n0[i][j] * z[m];
                        if m > 0 {
                            v = v + self.m1[i][j] * hd * z[m - 1];
                        }
                        d[i][j] = v * th;
                    }
                }
                d
            })
            .collect();
        let mut fs: Vec<[[Cdd; 2]; 2]> = vec![*f];
        let mut biggest = mat_max(f);
        for m in 0..TERMS - 1 {
            let mut acc = [[zero(); 2]; 2];
            for j in 0..=m {
                let prod = mat_mul(&dser[j], &fs[m - j]);
                for i in 0..2 {
                    for k in 0..2 {
                        acc[i][k] = acc[i][k] + prod[i][k];
                    }
                }
            }
            let inv = dd(-1.0 / (m as f64 + 1.0));
            // 1/(m+1) is inexact for most m; correct it to double-double
            let inv = inv + (dd(-1.0) - inv * dd(m as f64 + 1.0)) / dd(m as f64 + 1.0);
            for row in acc.iter_mut() {
                for v in row.iter_mut() {
                    *v = Complex::new(v.re * inv, v.im * inv);
                }
            }
            biggest = biggest.max(mat_max(&acc));
            fs.push(acc);
        }
        let tail = mat_max(&fs[TERMS - 1]).max(mat_max(&fs[TERMS - 2]));
        let ytail = mag(&y[TERMS - 1]).max(mag(&y[TERMS - 2]));
        if tail > 1e-34 * biggest || ytail > 1e-34 * mag(&y0) * 1e3 {
            return None;
        }
        let mut fnew = [[zero(); 2]; 2];
        for term in fs.iter().rev() {
            for i in 0..2 {
                for k in 0..2 {
                    fnew[i][k] = fnew[i][k] + term[i][k];
                }
            }
        }
        let mut ynew = zero();
        for v in y.iter().rev() {
            ynew = ynew + *v;
        }
        Some((fnew, ynew))
    }

    fn p_at(&self, x: Cdd) -> Cdd {
        let mut acc = zero();
        for c in self.p.iter().rev() {
            acc = acc * x + *c;
        }
        acc
    }

    fn run_line(&self, f: &mut ExtendedMatrix, y: &mut Cdd, a: Complex64, b: Complex64) -> Result<()> {
        let total = b - a;
        let len = total.norm();
        if len == 0.0 {
            return Ok(());
        }
        let mut s = 0.0;
        while s < 1.0 {
            let x0 = a + total * s;
            let rho = self.curve.distance_to_branch_points(x0);
            let speed = self.scale / to_c(*y).norm();
            let mut ds = ((rho / 3.0).min(4.0 / speed.max(1e-300)) / len).min(1.0 - s);
            loop {
                if ds * len < 1e-12 * self.curve.separation() {
                    return Err(Error::StepUnderflow { s, step: ds });
                }
                let h = total * ds;
                match self.step(&f.m, x0, *y, h) {
                    Some((fnew, ynew)) => {
                        let s_next = if s + ds >= 1.0 - 1e-15 { 1.0 } else { s + ds };
                        let x1 = if s_next == 1.0 { b } else { a + total * s_next };
                        // pin y to the curve at the new point
                        let y1 = sqrt_near(self.p_at(cdd(x1)), to_c(ynew));
                        if (to_c(y1) - to_c(ynew)).norm() > 1e-6 * to_c(y1).norm() {
                            ds *= 0.5;
                            continue;
                        }
                        f.m = fnew;
                        f.normalize();
                        *y = y1;
                        s = s_next;
                        break;
                    }
                    None => ds *= 0.5,
                }
            }
        }
        Ok(())
    }
}

/// Double-double transfer matrix of `dF + tA·F = 0` along `path`.
pub fn transfer_extended(
    curve: &HyperellipticCurve,
    a: &SlTwoSystem,
    t: f64,
    path: &PathOnCurve,
) -> Result<ExtendedMatrix> {
    let tiny = 1e-12 * curve.separation();
    let clearance = path.clearance(curve);
    if clearance <= tiny {
        return Err(Error::PathTooClose { clearance, tol: tiny });
    }
    let (m0, m1) = a.matrices();
    let stepper = Stepper {
        p: curve.p_coeffs().iter().map(|c| cdd(*c)).collect(),
        m0: mat_dd(&m0),
        m1: mat_dd(&m1),
        t: cdd(Complex64::new(t, 0.0)),
        curve,
        scale: t * (m0.norm() + m1.norm() * (1.0 + path.start().norm())) + 1e-300,
    };
    let mut f = ExtendedMatrix::identity();
    let x0 = path.start();
    let mut y = sqrt_near(stepper.p_at(cdd(x0)), curve.y(x0, path.start_sheet));
    for (from, to) in polygon(curve, path)? {
        let scale = t * (m0.norm() + m1.norm() * (1.0 + from.norm().max(to.norm()))) + 1e-300;
        let st = Stepper { scale, ..stepper_clone(&stepper) };
        st.run_line(&mut f, &mut y, from, to)?;
    }
    Ok(f)
}

fn stepper_clone<'a>(s: &Stepper<'a>) -> Stepper<'a> {
    Stepper {
        p: s.p.clone(),
        m0: s.m0,
        m1: s.m1,
        t: s.t,
        curve: s.curve,
        scale: s.scale,
    }
}

/// Generator monodromies and the relation defect, all in double-double.
pub fn relation_defect_extended(
    curve: &HyperellipticCurve,
    a: &SlTwoSystem,
    t: f64,
    gens: &SurfaceGroupGenerators,
) -> Result<([RenormalizedMatrix; 4], f64)> {
    use rayon::prelude::*;
    let mats: Vec<Result<ExtendedMatrix>> = gens.loops.par_iter().map(|lp| transfer_extended(curve, a, t, lp)).collect();
    let mut ext = [ExtendedMatrix::identity(); 4];
    for (o, m) in ext.iter_mut().zip(mats) {
        *o = m?;
    }
    let mut acc = ExtendedMatrix::identity();
    for &(g, inv) in RELATION_WORD.iter() {
        let m = if inv { ext[g].inverse_unimodular() } else { ext[g] };
        acc = m.mul(&acc);
    }
    let gens_f64 = [
        ext[0].to_renormalized(),
        ext[1].to_renormalized(),
        ext[2].to_renormalized(),
        ext[3].to_renormalized(),
    ];
    Ok((gens_f64, acc.distance_to_identity()))
}
