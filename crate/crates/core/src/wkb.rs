//! Growth rates of characters `log|χ|` in `t` and their comparison with widths.

use crate::curve::{HyperellipticCurve, PathOnCurve, Segment};
use crate::differentials::{det_map, min_relative_size, qd_width, QuadraticDifferential, SlTwoSystem, WidthEstimate};
use crate::error::{Error, Result};
use crate::monodromy::{ensure_closed_on_curve, transfer};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Relative size below which `φ` counts as vanishing on a loop.
const ZERO_TOL: f64 = 1e-8;

/// A `t`-sweep of one loop with its affine fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkbSweep {
    pub t_grid: Vec<f64>,
    /// `log|χ_t|`, `None` where the trace vanished numerically.
    pub log_chars: Vec<Option<f64>>,
    /// Integrator error estimates per grid point.
    pub est_errors: Vec<f64>,
    /// `|det F − 1|` in log form per grid point, `None` once the scale is too large to check.
    pub defects: Vec<Option<f64>>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest deviation from the affine fit over the fitted points.
    pub residual: f64,
    /// Number of points used in the fit.
    pub fitted: usize,
}

/// Least-squares line `y = slope·x + intercept` and the max residual.
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    (slope, intercept, residual)
}

/// Fits the top half of the usable points (at least four).
pub fn fit_sweep(t_grid: &[f64], log_chars: &[Option<f64>]) -> Result<(f64, f64, f64, usize)> {
    let usable: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(log_chars)
        .filter_map(|(t, l)| l.map(|v| (*t, v)))
        .collect();
    if usable.len() < 4 {
        return Err(Error::DegenerateFit(usable.len()));
    }
    let keep = t_grid.len().div_ceil(2).clamp(4, usable.len());
    let top = &usable[usable.len() - keep..];
    let xs: Vec<f64> = top.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = top.iter().map(|p| p.1).collect();
    let (slope, intercept, residual) = affine_fit(&xs, &ys);
    Ok((slope, intercept, residual, keep))
}

/// `log|χ_{ρ_t}(γ)|` over the grid and the fitted growth rate.
pub fn sweep(
    curve: &HyperellipticCurve,
    a: &SlTwoSystem,
    lp: &PathOnCurve,
    t_grid: &[f64],
    tol: f64,
) -> Result<WkbSweep> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("t grid must be strictly increasing".into()));
    }
    ensure_closed_on_curve(curve, lp)?;
    let runs: Vec<Result<(Option<f64>, f64, Option<f64>)>> = t_grid
        .par_iter()
        .map(|&t| {
            let tr = transfer(curve, a, t, lp, tol)?;
            let defect = tr.matrix.unimodularity_defect();
            match tr.matrix.log_char() {
                Ok(v) => Ok((Some(v), tr.est_error, defect)),
                Err(Error::VanishingTrace(_)) => Ok((None, tr.est_error, defect)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut log_chars = Vec::with_capacity(t_grid.len());
    let mut est_errors = Vec::with_capacity(t_grid.len());
    let mut defects = Vec::with_capacity(t_grid.len());
    for r in runs {
        let (l, e, d) = r?;
        log_chars.push(l);
        est_errors.push(e);
        defects.push(d);
    }
    let (slope, intercept, residual, fitted) = fit_sweep(t_grid, &log_chars)?;
    Ok(WkbSweep {
        t_grid: t_grid.to_vec(),
        log_chars,
        est_errors,
        defects,
        slope,
        intercept,
        residual,
        fitted,
    })
}

/// Evenly spaced grid of `n ≥ 2` points on `[t_min, t_max]`.
pub fn linear_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t_min + (t_max - t_min) * i as f64 / (n - 1).max(1) as f64)
        .collect()
}

/// `min |Re(√Q·γ′)| / |√Q·γ′|` along the segments (sampling plus local polish).
pub fn wkb_margin_along<F: Fn(Complex64) -> Complex64>(segments: &[Segment], coeff: F) -> f64 {
    let ratio = |seg: &Segment, s: f64| {
        let z = coeff(seg.point(s)).sqrt() * seg.derivative(s);
        let n = z.norm();
        if n == 0.0 {
            0.0
        } else {
            z.re.abs() / n
        }
    };
    let samples = 512;
    let mut best = f64::INFINITY;
    for seg in segments {
        let vals: Vec<f64> = (0..=samples).map(|i| ratio(seg, i as f64 / samples as f64)).collect();
        for i in 0..=samples {
            best = best.min(vals[i]);
            let local = (i == 0 || vals[i] <= vals[i - 1]) && (i == samples || vals[i] <= vals[i + 1]);
            if !local {
                continue;
            }
            let h = 1.0 / samples as f64;
            let (mut lo, mut hi) = ((i as f64 - 1.0) * h, (i as f64 + 1.0) * h);
            lo = lo.max(0.0);
            hi = hi.min(1.0);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..50 {
                let c = hi - g * (hi - lo);
                let d = lo + g * (hi - lo);
                if ratio(seg, c) < ratio(seg, d) {
                    hi = d;
                } else {
                    lo = c;
                }
            }
            best = best.min(ratio(seg, 0.5 * (lo + hi)));
        }
    }
    best
}

/// Whether `lp` is transverse to the vertical foliation of `φ`, with the margin.
pub fn is_wkb_curve(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    lp: &PathOnCurve,
    tol: f64,
) -> Result<(bool, f64)> {
    let clearance = lp.clearance(curve);
    let tiny = 1e-12 * curve.separation();
    if clearance <= tiny {
        return Err(Error::PathTooClose { clearance, tol: tiny });
    }
    let rel = min_relative_size(&lp.segments, |x| phi.relative_size(x));
    if rel < ZERO_TOL {
        return Err(Error::ZeroOnPath(rel));
    }
    let margin = wkb_margin_along(&lp.segments, |x| phi.numerator(x) / curve.p(x));
    Ok((margin > tol, margin))
}

/// `slope ≤ w·(1 + slack)`.
pub fn check_upper_bound(sweep: &WkbSweep, w: f64, slack: f64) -> bool {
    sweep.slope <= w * (1.0 + slack)
}

/// The quadratic differential whose width is the growth rate of `|χ|`.
///
/// The eigenvalues of `A` are `±√(α² + βγ) = ±√(−det A)`, so the exponent is
/// `w_{−det A}`.
pub fn growth_differential(a: &SlTwoSystem) -> QuadraticDifferential {
    -det_map(a)
}

/// `w_{−det A}(γ)`, the predicted growth rate of `log|χ_{ρ_t}(γ)|` in `t`.
pub fn growth_width(curve: &HyperellipticCurve, a: &SlTwoSystem, lp: &PathOnCurve, atol: f64) -> Result<WidthEstimate> {
    qd_width(curve, &growth_differential(a), lp, atol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Sheet;
    use crate::differentials::AbelianDifferential;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_system_sweep() {
        let curve =
            HyperellipticCurve::new(&[c(0., 0.), c(-1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)], 1e-6).unwrap();
        let lp = PathOnCurve::circle(c(0.5, 0.0), 0.7, 0.0, Sheet::Plus);
        let s = sweep(&curve, &SlTwoSystem::zero(), &lp, &linear_grid(1.0, 8.0, 8), 1e-10).unwrap();
        for l in &s.log_chars {
            assert!((l.unwrap() - 2f64.ln()).abs() < 1e-14);
        }
        assert!(s.slope.abs() < 1e-14);
        assert!(check_upper_bound(&s, 0.0, 0.0));
    }

    #[test]
    fn fit_recovers_line_and_rejects_short_input() {
        let t = linear_grid(0.0, 9.0, 10);
        let l: Vec<Option<f64>> = t.iter().map(|x| Some(2.5 * x - 1.0)).collect();
        let (slope, icpt, res, n) = fit_sweep(&t, &l).unwrap();
        assert!((slope - 2.5).abs() < 1e-13 && (icpt + 1.0).abs() < 1e-12 && res < 1e-12 && n == 5);
        let sparse = vec![Some(1.0), None, None, Some(2.0), None, Some(3.0), None, None, None, None];
        assert!(matches!(fit_sweep(&t, &sparse), Err(Error::DegenerateFit(3))));
    }

    #[test]
    fn synthetic_violation_detected() {
        let w = 0.7;
        let t = linear_grid(10.0, 40.0, 7);
        let l: Vec<Option<f64>> = t.iter().map(|x| Some(2.0 * w * x)).collect();
        let (slope, intercept, residual, fitted) = fit_sweep(&t, &l).unwrap();
        let s = WkbSweep {
            t_grid: t,
            log_chars: l,
            est_errors: vec![0.0; 7],
            defects: vec![None; 7],
            slope,
            intercept,
            residual,
            fitted,
        };
        assert!(!check_upper_bound(&s, w, 0.02));
    }

    #[test]
    fn margins() {
        // flat chart: φ = dz² along a horizontal segment, and along a vertical one
        let h = [Segment::line(c(0.0, 0.0), c(1.0, 0.0))];
        assert!((wkb_margin_along(&h, |_| c(1.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!(wkb_margin_along(&h, |_| c(-1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn zero_on_loop() {
        let curve =
            HyperellipticCurve::new(&[c(0., 0.), c(-1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)], 1e-6).unwrap();
        // q = x² − 0.49 vanishes on the circle |x| = 0.7
        let phi = QuadraticDifferential::new(c(-0.49, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let lp = PathOnCurve::circle(c(0.0, 0.0), 0.7, 0.3, Sheet::Plus);
        assert!(matches!(is_wkb_curve(&curve, &phi, &lp, 1e-3), Err(Error::ZeroOnPath(_))));
    }

    #[test]
    fn growth_differential_sign() {
        let a = SlTwoSystem::new(AbelianDifferential::omega0(), AbelianDifferential::zero(), AbelianDifferential::zero());
        // A = diag(1, −1)·dx/y has eigenvalues ±dx/y, so the growth differential is +dx²/y²
        assert_eq!(growth_differential(&a).coeffs[0], c(1.0, 0.0));
    }
}
