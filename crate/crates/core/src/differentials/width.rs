//! Widths `∫ |Re √φ dz|` along piecewise paths.

use super::QuadraticDifferential;
use crate::curve::{HyperellipticCurve, PathOnCurve, Segment, SegmentBranch};
use crate::error::{Error, Result};
use crate::quadrature::integrate_with_breaks;
use num_complex::Complex64;

/// Relative size below which a quadratic differential counts as vanishing on a path.
const ZERO_TOL: f64 = 1e-8;
const SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthEstimate {
    pub value: f64,
    pub error: f64,
}

/// Smallest value of `size` along the segments, by sampling plus golden-section polish.
pub fn min_relative_size<F: Fn(Complex64) -> f64>(segments: &[Segment], size: F) -> f64 {
    let mut best = f64::INFINITY;
    for seg in segments {
        let vals: Vec<f64> = (0..=SAMPLES)
            .map(|i| size(seg.point(i as f64 / SAMPLES as f64)))
            .collect();
        for i in 0..=SAMPLES {
            best = best.min(vals[i]);
            let local = (i == 0 || vals[i] <= vals[i - 1]) && (i == SAMPLES || vals[i] <= vals[i + 1]);
            if !local {
                continue;
            }
            let h = 1.0 / SAMPLES as f64;
            let (mut a, mut b) = (((i as f64) - 1.0) * h, ((i as f64) + 1.0) * h);
            a = a.max(0.0);
            b = b.min(1.0);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if size(seg.point(c)) < size(seg.point(d)) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best = best.min(size(seg.point(0.5 * (a + b))));
        }
    }
    best
}

/// `∫ |Re(√Q(x) dx)|` along the segments for a holomorphic coefficient `Q`.
///
/// The integrand is independent of the square-root branch. A continuous branch
/// is tracked only to place break points where `Re(√Q·x')` changes sign.
pub fn width_along<F: Fn(Complex64) -> Complex64>(segments: &[Segment], coeff: F, atol: f64) -> Result<WidthEstimate> {
    let mut value = 0.0;
    let mut error = 0.0;
    for seg in segments {
        let branch = SegmentBranch::track(&coeff, seg, coeff(seg.start()).sqrt(), 1.0 / 64.0)?;
        let z = |s: f64| branch.resolve(s, coeff(seg.point(s)).sqrt()) * seg.derivative(s);
        let mut breaks = vec![0.0];
        let n = 512;
        let mut prev = z(0.0).re;
        for i in 1..=n {
            let s = i as f64 / n as f64;
            let cur = z(s).re;
            if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
                let (mut a, mut b) = ((i - 1) as f64 / n as f64, s);
                let fa = prev;
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if z(m).re.signum() == fa.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                breaks.push(0.5 * (a + b));
            }
            prev = cur;
        }
        breaks.push(1.0);
        let f = |s: f64| Complex64::new(z(s).re.abs(), 0.0);
        let est = integrate_with_breaks(f, &breaks, atol / segments.len() as f64, 0.0, 20_000)?;
        value += est.value.re;
        error += est.error;
    }
    Ok(WidthEstimate { value, error })
}

/// Width of `φ` along a path on the curve.
pub fn qd_width(
    curve: &HyperellipticCurve,
    phi: &QuadraticDifferential,
    path: &PathOnCurve,
    atol: f64,
) -> Result<WidthEstimate> {
    let clearance = path.clearance(curve);
    let tiny = 1e-12 * curve.separation();
    if clearance <= tiny {
        return Err(Error::PathTooClose { clearance, tol: tiny });
    }
    let rel = min_relative_size(&path.segments, |x| phi.relative_size(x));
    if rel < ZERO_TOL {
        return Err(Error::ZeroOnPath(rel));
    }
    width_along(&path.segments, |x| phi.numerator(x) / curve.p(x), atol)
}
