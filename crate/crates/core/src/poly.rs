//! Dense complex polynomials with ascending coefficients and an Aberth root finder.

use num_complex::Complex64;

/// Horner evaluation of `c[0] + c[1] x + ... + c[n] x^n`.
pub fn eval(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

/// Value and first derivative in one Horner pass.
pub fn eval_with_derivative(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    let mut p = zero;
    let mut dp = zero;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Strips trailing (numerically) zero leading coefficients.
pub fn trim(coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut out = coeffs.to_vec();
    while out.len() > 1 && out.last().unwrap().norm() <= 1e-300 + 1e-15 * scale {
        out.pop();
    }
    out
}

/// Expands `lead * prod (x - r)` into ascending coefficients.
pub fn from_roots(lead: Complex64, roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![lead];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c
}

/// All roots of a polynomial of degree >= 1.
///
/// Aberth–Ehrlich simultaneous iteration from points on a circle of the Cauchy
/// radius, followed by a few Newton polishing steps on each root. Multiple roots
/// are returned as clusters; callers decide what separation they accept.
pub fn roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let c = trim(coeffs);
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let monic: Vec<Complex64> = c.iter().map(|&v| v / lead).collect();
    let radius = 1.0
        + monic[..n]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(radius * 0.5, ang)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = eval_with_derivative(&monic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    sum += Complex64::new(1.0, 0.0) / (z[i] - z[j]);
                }
            }
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if w.is_finite() {
                z[i] -= w;
                max_step = max_step.max(w.norm() / (1.0 + z[i].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval_with_derivative(&monic, *zi);
            let step = p / dp;
            if !step.is_finite() || step.norm() < 1e-17 * (1.0 + zi.norm()) {
                break;
            }
            *zi -= step;
        }
    }
    z
}

/// Minimum pairwise distance in a point set (infinite for fewer than two points).
pub fn min_separation(points: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min((points[i] - points[j]).norm());
        }
    }
    best
}
