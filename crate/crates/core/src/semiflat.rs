//! Odd periods of the spectral cover, their scaling laws, and the strip model
//! of the semiflat metric with its holomorphic sectional curvature.

use crate::curve::{HyperellipticCurve, PathBranch, Segment, Sheet};
use crate::differentials::QuadraticDifferential;
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

/// Relative distance under which two zeros of `φ` (or a zero and a branch point) collide.
const COLLISION_TOL: f64 = 1e-6;
const TRACK_STEP: f64 = 1.0 / 64.0;

/// A closed loop in the `x`-plane with the starting branch of `√(q/p)`.
///
/// `sheet` selects `±` the principal root at the start. The loop lifts to a
/// closed cycle on the spectral cover when it encloses an even number of
/// points among the zeros of `q` and the branch points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCycle {
    pub segments: Vec<Segment>,
    pub sheet: Sheet,
}

impl SpectralCycle {
    pub fn circle(center: Complex64, radius: f64, sheet: Sheet) -> Self {
        Self {
            segments: vec![Segment::arc(center, radius, 0.0, 2.0 * PI)],
            sheet,
        }
    }

    /// Stadium of half-width `r` around the segment `[a, b]`.
    pub fn capsule(a: Complex64, b: Complex64, r: f64, sheet: Sheet) -> Self {
        let d = (b - a) / (b - a).norm();
        let n = d * Complex64::i();
        let th = d.arg();
        Self {
            segments: vec![
                Segment::line(a + n * r, b + n * r),
                Segment::arc(b, r, th + FRAC_PI_2, -PI),
                Segment::line(b - n * r, a - n * r),
                Segment::arc(a, r, th - FRAC_PI_2, -PI),
            ],
            sheet,
        }
    }

    /// Image under the covering involution.
    pub fn involution(&self) -> Self {
        Self {
            segments: self.segments.clone(),
            sheet: self.sheet.flip(),
        }
    }

    /// The same loop traversed backwards, starting on the branch reached at its end.
    pub fn reversed(&self, end_sheet: Sheet) -> Self {
        Self {
            segments: self.segments.iter().rev().map(|s| s.reversed()).collect(),
            sheet: end_sheet,
        }
    }

    fn start(&self) -> Complex64 {
        self.segments[0].start()
    }

    fn clearance(&self, points: &[Complex64]) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| points.iter().map(move |z| s.distance_to(*z)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Zeros of `q` (two, when `q₂ ≠ 0`).
pub fn spectral_zeros(phi: &QuadraticDifferential) -> Vec<Complex64> {
    let [q0, q1, q2] = phi.coeffs;
    if q2.norm() == 0.0 {
        return if q1.norm() == 0.0 { vec![] } else { vec![-q0 / q1] };
    }
    let disc = (q1 * q1 - q0 * q2 * 4.0).sqrt();
    vec![(-q1 + disc) / (q2 * 2.0), (-q1 - disc) / (q2 * 2.0)]
}

/// Fails with `ZeroCollision` unless `φ` has four simple zeros away from the branch points.
pub fn check_simple_zeros(curve: &HyperellipticCurve, phi: &QuadraticDifferential) -> Result<Vec<Complex64>> {
    let scale = phi.coeff_norm();
    if scale == 0.0 {
        return Err(Error::ZeroCollision(0.0));
    }
    let lead = phi.coeffs[2].norm() / scale;
    if lead < COLLISION_TOL {
        return Err(Error::ZeroCollision(lead));
    }
    let zeros = spectral_zeros(phi);
    let size = 1.0 + curve.branch_points().iter().chain(&zeros).map(|z| z.norm()).fold(0.0, f64::max);
    let mut sep = (zeros[0] - zeros[1]).norm();
    for z in &zeros {
        sep = sep.min(curve.distance_to_branch_points(*z));
    }
    if sep < COLLISION_TOL * size {
        return Err(Error::ZeroCollision(sep / size));
    }
    Ok(zeros)
}

/// `∮ √φ` along each cycle on the spectral cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeriodSet {
    pub phi: QuadraticDifferential,
    pub zeros: Vec<Complex64>,
    pub cycles: Vec<SpectralCycle>,
    pub periods: Vec<Complex64>,
    /// Quadrature error estimates.
    pub errors: Vec<f64>,
    /// Branch of `√(q/p)` at the end of each cycle, relative to the principal root.
    pub end_sheets: Vec<Sheet>,
}

/// Period of one cycle and the branch reached at its end.
pub fn cycle_period(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    cycle: &SpectralCycle,
    tol: f64,
) -> Result<(Complex64, f64, Sheet)> {
    let g = |x: Complex64| phi.numerator(x) / curve.p(x);
    let principal = g(cycle.start()).sqrt();
    let start = principal * cycle.sheet.sign();
    let branch = PathBranch::track(&g, &cycle.segments, start, TRACK_STEP)?;
    let end = branch.end_value();
    let end_principal = g(cycle.segments.last().unwrap().end()).sqrt();
    let end_sheet = Sheet::classify(end, end_principal);
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for (seg, br) in branch.segments.iter().zip(&branch.branches) {
        let est = integrate(
            |s| br.resolve(s, g(seg.point(s)).sqrt()) * seg.derivative(s),
            0.0,
            1.0,
            tol,
            tol,
        )?;
        value += est.value;
        error += est.error;
    }
    Ok((value, error, end_sheet))
}

/// Odd periods of `φ` over the given cycles.
pub fn spectral_periods(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    cycles: &[SpectralCycle],
    tol: f64,
) -> Result<SpectralPeriodSet> {
    let zeros = check_simple_zeros(curve, phi)?;
    let mut marks = zeros.clone();
    marks.extend_from_slice(curve.branch_points());
    let tiny = 1e-9 * curve.separation();
    for c in cycles {
        if c.segments.is_empty() || (c.start() - c.segments.last().unwrap().end()).norm() > 1e-12 {
            return Err(Error::InvalidInput("cycle must be a nonempty closed loop".into()));
        }
        let clearance = c.clearance(&marks);
        if clearance <= tiny {
            return Err(Error::PathTooClose { clearance, tol: tiny });
        }
    }
    let runs: Vec<Result<(Complex64, f64, Sheet)>> =
        cycles.par_iter().map(|c| cycle_period(curve, phi, c, tol)).collect();
    let mut periods = Vec::with_capacity(cycles.len());
    let mut errors = Vec::with_capacity(cycles.len());
    let mut end_sheets = Vec::with_capacity(cycles.len());
    for (r, c) in runs.into_iter().zip(cycles) {
        let (v, e, s) = r?;
        if s != c.sheet {
            return Err(Error::InvalidInput("cycle does not close on the spectral cover".into()));
        }
        periods.push(v);
        errors.push(e);
        end_sheets.push(s);
    }
    Ok(SpectralPeriodSet {
        phi: *phi,
        zeros,
        cycles: cycles.to_vec(),
        periods,
        errors,
        end_sheets,
    })
}

/// Capsules around pairs of marked points (zeros of `φ` and branch points) that
/// enclose nothing else, widest first, at most `max` of them.
pub fn default_cycles(curve: &HyperellipticCurve, phi: &QuadraticDifferential, max: usize) -> Result<Vec<SpectralCycle>> {
    let zeros = check_simple_zeros(curve, phi)?;
    let mut marks = zeros;
    marks.extend_from_slice(curve.branch_points());
    let mut cands: Vec<(f64, SpectralCycle)> = Vec::new();
    for i in 0..marks.len() {
        for j in i + 1..marks.len() {
            let seg = Segment::line(marks[i], marks[j]);
            let others = marks
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i && *k != j)
                .map(|(_, z)| seg.distance_to(*z))
                .fold(f64::INFINITY, f64::min);
            let r = (0.4 * others).min(0.25 * (marks[i] - marks[j]).norm());
            if r > 1e-3 * curve.separation() {
                cands.push((r, SpectralCycle::capsule(marks[i], marks[j], r, Sheet::Plus)));
            }
        }
    }
    cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    Ok(cands.into_iter().take(max).map(|c| c.1).collect())
}

/// `G_ij = Σ_c dZ_c(δ_i)·conj(dZ_c(δ_j))` from Richardson-extrapolated central
/// differences with step `h` along each direction.
pub fn period_form(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    cycles: &[SpectralCycle],
    dirs: &[QuadraticDifferential],
    h: f64,
    tol: f64,
) -> Result<DMatrix<Complex64>> {
    let dz = period_derivatives(curve, phi, cycles, dirs, h, tol)?;
    let k = dirs.len();
    Ok(DMatrix::from_fn(k, k, |i, j| {
        dz[i].iter().zip(&dz[j]).map(|(a, b)| a * b.conj()).sum()
    }))
}

/// `dZ_c(δ_i)` for each direction `i` and cycle `c`.
pub fn period_derivatives(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    cycles: &[SpectralCycle],
    dirs: &[QuadraticDifferential],
    h: f64,
    tol: f64,
) -> Result<Vec<Vec<Complex64>>> {
    let periods = |s: f64, d: &QuadraticDifferential| -> Result<Vec<Complex64>> {
        Ok(spectral_periods(curve, &(*phi + d.scale(Complex64::new(s, 0.0))), cycles, tol)?.periods)
    };
    dirs.iter()
        .map(|d| {
            let central = |step: f64| -> Result<Vec<Complex64>> {
                let p = periods(step, d)?;
                let m = periods(-step, d)?;
                Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * step)).collect())
            };
            let coarse = central(h)?;
            let fine = central(0.5 * h)?;
            Ok(fine.iter().zip(&coarse).map(|(f, c)| (f * 4.0 - c) / 3.0).collect())
        })
        .collect()
}

/// Conic law of the period form under `φ ↦ tφ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicReport {
    pub t: f64,
    /// `max |G_{tφ}(tδ_i, tδ_j) − t·G_φ(δ_i, δ_j)| / max |t·G_φ|`.
    pub form_error: f64,
    /// `max |dZ_{tφ}(tδ) − √t·dZ_φ(δ)| / max |√t·dZ_φ|`.
    pub derivative_error: f64,
    /// `max |dZ_φ(φ) − Z(φ)/2| / max |Z|` (derivative along the dilation ray).
    pub radial_error: f64,
}

/// Checks `α_t*(G) = t·G` at the level of period derivatives, for each `t`.
pub fn conic_scaling_check(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    cycles: &[SpectralCycle],
    t_list: &[f64],
    tol: f64,
) -> Result<Vec<ConicReport>> {
    if t_list.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("dilation factors must be positive".into()));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let dirs = [
        QuadraticDifferential::new(one, zero, zero),
        QuadraticDifferential::new(zero, one, zero),
        QuadraticDifferential::new(zero, zero, one),
    ];
    let h = 1e-3 * phi.coeff_norm();
    let base = period_derivatives(curve, phi, cycles, &dirs, h, tol)?;
    let z = spectral_periods(curve, phi, cycles, tol)?.periods;
    let radial = period_derivatives(curve, phi, cycles, &[*phi], 1e-3, tol)?;
    let zmax = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let radial_error = radial[0]
        .iter()
        .zip(&z)
        .map(|(d, v)| (d - v * 0.5).norm())
        .fold(0.0, f64::max)
        / zmax;
    let gram = |dz: &[Vec<Complex64>]| -> DMatrix<Complex64> {
        DMatrix::from_fn(3, 3, |i, j| dz[i].iter().zip(&dz[j]).map(|(a, b)| a * b.conj()).sum())
    };
    let g0 = gram(&base);
    t_list
        .iter()
        .map(|&t| {
            let tc = Complex64::new(t, 0.0);
            let tdirs: Vec<QuadraticDifferential> = dirs.iter().map(|d| d.scale(tc)).collect();
            let dz = period_derivatives(curve, &phi.scale(tc), cycles, &tdirs, h, tol)?;
            let gt = gram(&dz);
            let target = g0.scale(t);
            let gmax = target.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let form_error = (&gt - &target).iter().map(|v| v.norm()).fold(0.0, f64::max) / gmax;
            let st = t.sqrt();
            let mut dmax = 0.0f64;
            let mut derr = 0.0f64;
            for (row, brow) in dz.iter().zip(&base) {
                for (a, b) in row.iter().zip(brow) {
                    dmax = dmax.max((b * st).norm());
                    derr = derr.max((a - b * st).norm());
                }
            }
            Ok(ConicReport {
                t,
                form_error,
                derivative_error: derr / dmax,
                radial_error,
            })
        })
        .collect()
}

fn cholesky_check(g: &DMatrix<Complex64>) -> Result<()> {
    let herm = (g - g.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let size = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !g.is_square() || herm > 1e-12 * size {
        return Err(Error::NotPositiveDefinite);
    }
    let min = g.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-14 * size) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// Product metric `g ⊕ conj(g⁻¹)` on `V × V*`.
pub fn semiflat_product(g: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    cholesky_check(g)?;
    let n = g.nrows();
    let inv = g.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(g);
    out.view_mut((n, n), (n, n)).copy_from(&inv.map(|v| v.conj()));
    Ok(out)
}

/// Pulls back `g′_sf` under `b(v, p) = (a v, t·(a⁻¹)* p)`, where `g′ = t·a^{-H} g a^{-1}`
/// so that `a*(g′) = t·g`, and returns `max |b*(g′_sf) − t·g_sf| / max |t·g_sf|`.
pub fn scaling_action_check(g: &DMatrix<Complex64>, a: &DMatrix<Complex64>, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    cholesky_check(g)?;
    let n = g.nrows();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::InvalidInput("a must match the dimension of g".into()));
    }
    let ai = a.clone().try_inverse().ok_or(Error::InvalidInput("a is singular".into()))?;
    let gp = (ai.adjoint() * g * &ai).scale(t);
    let gp = (&gp + gp.adjoint()).scale(0.5);
    let sf = semiflat_product(g)?;
    let sfp = semiflat_product(&gp)?;
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(a);
    b.view_mut((n, n), (n, n)).copy_from(&ai.transpose().scale(t));
    let pulled = b.adjoint() * sfp * &b;
    let target = sf.scale(t);
    let size = target.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok((&pulled - &target).iter().map(|v| v.norm()).fold(0.0, f64::max) / size)
}

/// Random Hermitian positive definite matrix with condition number at most ~10.
pub fn random_metric(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let g = &m * m.adjoint() + DMatrix::identity(n, n).scale(0.5 * n as f64);
    (&g + g.adjoint()).scale(0.5)
}

/// Random perturbation of the identity with condition number at most 10.
pub fn random_map(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    loop {
        let a = DMatrix::identity(n, n)
            + DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)));
        let sv = a.singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() <= 10.0 {
            return a;
        }
    }
}

/// Worst deviation of the scaling identity over `count` random metrics and maps per `(n, t)`.
pub fn scaling_action_sweep(dims: &[usize], ts: &[f64], count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in dims {
        for &t in ts {
            for _ in 0..count {
                let g = random_metric(n, &mut rng);
                let a = random_map(n, &mut rng);
                worst = worst.max(scaling_action_check(&g, &a, t)?);
            }
        }
    }
    Ok(worst)
}

/// Finite-difference spacings as fractions of the distance to the strip boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StencilParams {
    /// Spacing for the potential's Hessian.
    pub inner: f64,
    /// Spacing for derivatives of the metric.
    pub outer: f64,
}

impl Default for StencilParams {
    fn default() -> Self {
        Self { inner: 1e-3, outer: 0.03 }
    }
}

/// The potential `−Σ log cos(Re ζ_j)` in the holomorphic coordinates
/// `ζ = (u₁..uₙ, v₁..vₙ)`, `u_k = Re z_k + i·Re w_k`, `v_k = Im z_k + i·Im w_k`.
pub fn model_potential(zeta: &[Complex64]) -> f64 {
    -zeta.iter().map(|z| z.re.cos().ln()).sum::<f64>()
}

/// Holomorphic coordinates of the point `(z, w)` of `T*Rⁿ`.
pub fn model_coordinates(z: &[Complex64], w: &[Complex64]) -> Result<Vec<Complex64>> {
    if z.len() != w.len() || z.is_empty() {
        return Err(Error::InvalidInput("z and w must have the same nonzero length".into()));
    }
    let u = z.iter().zip(w).map(|(a, b)| Complex64::new(a.re, b.re));
    let v = z.iter().zip(w).map(|(a, b)| Complex64::new(a.im, b.im));
    Ok(u.chain(v).collect())
}

/// Distance from `ζ` to the boundary of the product of strips.
pub fn domain_margin(zeta: &[Complex64]) -> f64 {
    FRAC_PI_2 - zeta.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
}

const D1: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
const D2: [(f64, f64); 5] = [
    (-2.0, -1.0 / 12.0),
    (-1.0, 16.0 / 12.0),
    (0.0, -30.0 / 12.0),
    (1.0, 16.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

/// Real coordinates `(Re ζ, Im ζ)` displaced along real directions.
fn shifted(zeta: &[Complex64], moves: &[(usize, f64)]) -> Vec<Complex64> {
    let m = zeta.len();
    let mut out = zeta.to_vec();
    for &(k, d) in moves {
        if k < m {
            out[k].re += d;
        } else {
            out[k - m].im += d;
        }
    }
    out
}

/// Unnormalized `∂_a∂̄_b Φ` by 4th-order central differences with spacing `h`.
fn raw_levi(zeta: &[Complex64], h: f64) -> DMatrix<Complex64> {
    let m = zeta.len();
    let second = |i: usize, j: usize| -> f64 {
        if i == j {
            D2.iter().map(|(o, w)| w * model_potential(&shifted(zeta, &[(i, o * h)]))).sum::<f64>() / (h * h)
        } else {
            let mut s = 0.0;
            for (oi, wi) in D1 {
                for (oj, wj) in D1 {
                    s += wi * wj * model_potential(&shifted(zeta, &[(i, oi * h), (j, oj * h)]));
                }
            }
            s / (h * h)
        }
    };
    let mut hess = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..2 * m {
        for j in i..2 * m {
            let v = second(i, j);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    DMatrix::from_fn(m, m, |a, b| {
        let (xa, ya, xb, yb) = (a, a + m, b, b + m);
        Complex64::new(
            0.25 * (hess[(xa, xb)] + hess[(ya, yb)]),
            0.25 * (hess[(xa, yb)] - hess[(ya, xb)]),
        )
    })
}

/// Global normalization making the metric the identity at the origin.
pub fn normalization() -> f64 {
    static N: OnceLock<f64> = OnceLock::new();
    *N.get_or_init(|| {
        let origin = [Complex64::new(0.0, 0.0)];
        1.0 / raw_levi(&origin, 1e-3 * FRAC_PI_2)[(0, 0)].re
    })
}

fn metric_at(zeta: &[Complex64], inner: f64) -> Result<DMatrix<Complex64>> {
    let margin = domain_margin(zeta);
    if margin <= 0.0 {
        return Err(Error::OutsideDomain(margin));
    }
    Ok(raw_levi(zeta, inner * margin).scale(normalization()))
}

/// Metric, potential and curvature samples at one point of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetricProbe {
    pub n: usize,
    /// Holomorphic coordinates `(u₁..uₙ, v₁..vₙ)`.
    pub point: Vec<Complex64>,
    pub potential: f64,
    /// Row-major `2n×2n` Hermitian matrix `H_ab̄`.
    pub metric: Vec<Vec<Complex64>>,
    pub curvature_samples: Vec<f64>,
}

/// Metric `N·∂∂̄Φ` at the point `ζ` (holomorphic coordinates, length `2n`).
pub fn model_metric(n: usize, zeta: &[Complex64]) -> Result<ModelMetricProbe> {
    if zeta.len() != 2 * n || n == 0 {
        return Err(Error::InvalidInput(format!("expected {} coordinates, got {}", 2 * n, zeta.len())));
    }
    let h = metric_at(zeta, StencilParams::default().inner)?;
    Ok(ModelMetricProbe {
        n,
        point: zeta.to_vec(),
        potential: model_potential(zeta),
        metric: (0..2 * n).map(|i| (0..2 * n).map(|j| h[(i, j)]).collect()).collect(),
        curvature_samples: Vec::new(),
    })
}

/// Closed-form metric `diag(1/cos² Re ζ_j)`.
pub fn exact_model_metric(zeta: &[Complex64]) -> DMatrix<Complex64> {
    let d: Vec<Complex64> = zeta.iter().map(|z| Complex64::new(1.0 / z.re.cos().powi(2), 0.0)).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
}

fn directional(zeta: &[Complex64], v: &[f64], h: f64, f: &dyn Fn(&[Complex64]) -> Result<DMatrix<Complex64>>, order: usize) -> Result<DMatrix<Complex64>> {
    let m = zeta.len();
    let at = |o: f64| -> Vec<Complex64> {
        let moves: Vec<(usize, f64)> = v.iter().enumerate().map(|(k, d)| (k, d * o * h)).collect();
        shifted(zeta, &moves)
    };
    let mut acc = DMatrix::zeros(m, m);
    if order == 1 {
        for (o, w) in D1 {
            acc += f(&at(o))?.scale(w);
        }
        Ok(acc.unscale(h))
    } else {
        for (o, w) in D2 {
            acc += f(&at(o))?.scale(w);
        }
        Ok(acc.unscale(h * h))
    }
}

/// Holomorphic sectional curvature `2R(X,X̄,X,X̄)/H(X,X̄)²` of the model metric,
/// with `R_{ab̄cd̄} = −∂_c∂̄_d H_ab̄ + H^{pq̄}(∂_c H_aq̄)(∂̄_d H_pb̄)`.
pub fn holo_sectional_curvature(zeta: &[Complex64], direction: &[Complex64], params: StencilParams) -> Result<f64> {
    let m = zeta.len();
    if direction.len() != m {
        return Err(Error::InvalidInput("direction has the wrong dimension".into()));
    }
    let len = direction.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if len == 0.0 {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    let x: Vec<Complex64> = direction.iter().map(|d| d / len).collect();
    let margin = domain_margin(zeta);
    if margin <= 0.0 {
        return Err(Error::OutsideDomain(margin));
    }
    let h = params.outer * margin;
    let reach = 2.0 * h + 2.0 * params.inner * margin;
    if reach >= margin {
        return Err(Error::StencilOutsideDomain { margin, reach });
    }
    // real directions V (for X) and W = JV
    let mut v = vec![0.0; 2 * m];
    let mut w = vec![0.0; 2 * m];
    for k in 0..m {
        v[k] = x[k].re;
        v[k + m] = x[k].im;
        w[k] = -x[k].im;
        w[k + m] = x[k].re;
    }
    // the inner spacing is frozen at the base point so that the stencil is one smooth function
    let inner = params.inner * margin;
    let metric = |z: &[Complex64]| -> Result<DMatrix<Complex64>> { Ok(raw_levi(z, inner).scale(normalization())) };
    let hm = metric(zeta)?;
    let quad = |a: &DMatrix<Complex64>| -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                s += x[i] * a[(i, j)] * x[j].conj();
            }
        }
        s
    };
    let dvv = directional(zeta, &v, h, &metric, 2)?;
    let dww = directional(zeta, &w, h, &metric, 2)?;
    let term1 = (quad(&dvv) + quad(&dww)) * 0.25;
    let dv = directional(zeta, &v, h, &metric, 1)?;
    let dw = directional(zeta, &w, h, &metric, 1)?;
    let i = Complex64::i();
    let dh = (&dv - (&dw * i)).scale(0.5);
    let dbh = (&dv + (&dw * i)).scale(0.5);
    let u: Vec<Complex64> = (0..m).map(|q| (0..m).map(|a| x[a] * dh[(a, q)]).sum()).collect();
    let vv: Vec<Complex64> = (0..m).map(|p| (0..m).map(|b| x[b].conj() * dbh[(p, b)]).sum()).collect();
    let minv = hm.transpose().try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let mut term2 = Complex64::new(0.0, 0.0);
    for p in 0..m {
        for q in 0..m {
            term2 += minv[(p, q)] * u[q] * vv[p];
        }
    }
    let r = -term1 + term2;
    let s = quad(&hm);
    Ok((r * 2.0 / (s * s)).re)
}

/// Closed form for the product of strips: `K(X) = −Σ H_j²|X_j|⁴ / (Σ H_j|X_j|²)²`.
pub fn exact_curvature(zeta: &[Complex64], direction: &[Complex64]) -> f64 {
    let hs: Vec<f64> = zeta.iter().map(|z| 1.0 / z.re.cos().powi(2)).collect();
    let num: f64 = hs.iter().zip(direction).map(|(h, x)| h * h * x.norm_sqr().powi(2)).sum();
    let den: f64 = hs.iter().zip(direction).map(|(h, x)| h * x.norm_sqr()).sum();
    -num / (den * den)
}

/// `max |∂_c H_ab̄ − ∂_a H_cb̄|`, the finite-difference defect of `dω = 0`.
pub fn kahler_defect(zeta: &[Complex64], params: StencilParams) -> Result<f64> {
    let m = zeta.len();
    let margin = domain_margin(zeta);
    if margin <= 0.0 {
        return Err(Error::OutsideDomain(margin));
    }
    let h = params.outer * margin;
    let inner = params.inner * margin;
    let metric = |z: &[Complex64]| -> Result<DMatrix<Complex64>> { Ok(raw_levi(z, inner).scale(normalization())) };
    let mut grads = Vec::with_capacity(m);
    for c in 0..m {
        let mut ex = vec![0.0; 2 * m];
        let mut ey = vec![0.0; 2 * m];
        ex[c] = 1.0;
        ey[c + m] = 1.0;
        let dx = directional(zeta, &ex, h, &metric, 1)?;
        let dy = directional(zeta, &ey, h, &metric, 1)?;
        grads.push((&dx - (&dy * Complex64::i())).scale(0.5));
    }
    let mut worst = 0.0f64;
    for c in 0..m {
        for a in 0..m {
            for b in 0..m {
                worst = worst.max((grads[c][(a, b)] - grads[a][(c, b)]).norm());
            }
        }
    }
    Ok(worst)
}

/// Random point with every `|Re ζ_j| ≤ (π/2)·reach` and random imaginary parts.
pub fn random_model_point(m: usize, reach: f64, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..m)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0) * FRAC_PI_2 * reach, rng.gen_range(-2.0..2.0)))
        .collect()
}

/// Random unit direction supported on the given coordinates.
pub fn random_direction(m: usize, support: &[usize], rng: &mut impl Rng) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); m];
    for &k in support {
        x[k] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let len = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    x.iter().map(|v| v / len).collect()
}

/// Curvature samples `(point, direction, K)` with directions supported on `support`.
pub fn curvature_samples(
    m: usize,
    support: &[usize],
    count: usize,
    reach: f64,
    seed: u64,
    params: StencilParams,
) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..count)
        .map(|_| (random_model_point(m, reach, &mut rng), random_direction(m, support, &mut rng)))
        .collect();
    draws
        .into_par_iter()
        .map(|(p, d)| {
            let k = holo_sectional_curvature(&p, &d, params)?;
            Ok((p, d, k))
        })
        .collect()
}
