//! Abelian and quadratic differentials on a genus-2 curve in the canonical bases
//! `x^k dx/y` (k = 0, 1) and `x^k dx²/y²` (k = 0, 1, 2), sl₂-systems and the
//! determinant map.

mod norm;
mod width;

pub use norm::{
    belt_pairing, qd_norm, teich_norm, QuadTol, SurfaceQuadrature, SurfaceRule, TeichNormParams,
    TeichNormResult,
};
pub use width::{min_relative_size, qd_width, width_along, WidthEstimate};

use crate::mat2::Mat2;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `ω = (c₀ + c₁x)·dx/y`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AbelianDifferential {
    pub coeffs: [Complex64; 2],
}

impl AbelianDifferential {
    pub const fn new(c0: Complex64, c1: Complex64) -> Self {
        Self { coeffs: [c0, c1] }
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO)
    }

    /// `dx/y`.
    pub const fn omega0() -> Self {
        Self::new(Complex64::new(1.0, 0.0), ZERO)
    }

    /// `x·dx/y`.
    pub const fn omega1() -> Self {
        Self::new(ZERO, Complex64::new(1.0, 0.0))
    }

    /// Polynomial numerator at `x`.
    pub fn numerator(&self, x: Complex64) -> Complex64 {
        self.coeffs[0] + self.coeffs[1] * x
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs[0] * s, self.coeffs[1] * s)
    }

    /// Product of two Abelian differentials; lands exactly in the quadratic basis.
    pub fn times(&self, o: &AbelianDifferential) -> QuadraticDifferential {
        let (a, b) = (self.coeffs, o.coeffs);
        QuadraticDifferential::new(a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[1] * b[1])
    }
}

impl Add for AbelianDifferential {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.coeffs[0] + o.coeffs[0], self.coeffs[1] + o.coeffs[1])
    }
}

impl Sub for AbelianDifferential {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.coeffs[0] - o.coeffs[0], self.coeffs[1] - o.coeffs[1])
    }
}

impl Neg for AbelianDifferential {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.coeffs[0], -self.coeffs[1])
    }
}

/// `φ = (q₀ + q₁x + q₂x²)·dx²/y²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadraticDifferential {
    pub coeffs: [Complex64; 3],
}

impl QuadraticDifferential {
    pub const fn new(q0: Complex64, q1: Complex64, q2: Complex64) -> Self {
        Self { coeffs: [q0, q1, q2] }
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO)
    }

    pub fn from_real(q: [f64; 3]) -> Self {
        Self::new(q[0].into(), q[1].into(), q[2].into())
    }

    pub fn numerator(&self, x: Complex64) -> Complex64 {
        self.coeffs[0] + x * (self.coeffs[1] + x * self.coeffs[2])
    }

    /// Scale-free magnitude of the numerator at `x`, used to detect zeros.
    pub fn relative_size(&self, x: Complex64) -> f64 {
        let r = x.norm();
        let scale = self.coeffs[0].norm() + self.coeffs[1].norm() * r + self.coeffs[2].norm() * r * r;
        if scale == 0.0 {
            0.0
        } else {
            self.numerator(x).norm() / scale
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs[0] * s, self.coeffs[1] * s, self.coeffs[2] * s)
    }

    /// Max-modulus coefficient distance.
    pub fn distance(&self, o: &QuadraticDifferential) -> f64 {
        (0..3)
            .map(|k| (self.coeffs[k] - o.coeffs[k]).norm())
            .fold(0.0, f64::max)
    }

    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Discriminant `q₁² − 4q₀q₂`; zero iff φ is a perfect square of a 1-form.
    pub fn discriminant(&self) -> Complex64 {
        let [q0, q1, q2] = self.coeffs;
        q1 * q1 - q0 * q2 * 4.0
    }
}

impl Add for QuadraticDifferential {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.coeffs[0] + o.coeffs[0],
            self.coeffs[1] + o.coeffs[1],
            self.coeffs[2] + o.coeffs[2],
        )
    }
}

impl Sub for QuadraticDifferential {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(
            self.coeffs[0] - o.coeffs[0],
            self.coeffs[1] - o.coeffs[1],
            self.coeffs[2] - o.coeffs[2],
        )
    }
}

impl Neg for QuadraticDifferential {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul<Complex64> for QuadraticDifferential {
    type Output = Self;
    fn mul(self, s: Complex64) -> Self {
        self.scale(s)
    }
}

/// Traceless matrix `[[α, β], [γ, −α]]` of Abelian differentials.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlTwoSystem {
    pub alpha: AbelianDifferential,
    pub beta: AbelianDifferential,
    pub gamma: AbelianDifferential,
}

impl SlTwoSystem {
    pub const fn new(alpha: AbelianDifferential, beta: AbelianDifferential, gamma: AbelianDifferential) -> Self {
        Self { alpha, beta, gamma }
    }

    pub const fn zero() -> Self {
        Self::new(
            AbelianDifferential::zero(),
            AbelianDifferential::zero(),
            AbelianDifferential::zero(),
        )
    }

    /// `A = M₀⊗dx/y + M₁⊗x·dx/y`.
    pub fn from_matrices(m0: Mat2, m1: Mat2) -> Self {
        let ab = |i: usize, j: usize| AbelianDifferential::new(m0.0[i][j], m1.0[i][j]);
        Self::new(ab(0, 0), ab(0, 1), ab(1, 0))
    }

    /// Coefficient matrices `(M₀, M₁)`.
    pub fn matrices(&self) -> (Mat2, Mat2) {
        let m = |k: usize| Mat2::traceless(self.alpha.coeffs[k], self.beta.coeffs[k], self.gamma.coeffs[k]);
        (m(0), m(1))
    }

    /// Matrix numerator `M₀ + x·M₁`; the connection form is this times `dx/y`.
    pub fn numerator(&self, x: Complex64) -> Mat2 {
        Mat2::traceless(
            self.alpha.numerator(x),
            self.beta.numerator(x),
            self.gamma.numerator(x),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.alpha.scale(s), self.beta.scale(s), self.gamma.scale(s))
    }

    /// Constant gauge action `A ↦ g A g⁻¹`.
    pub fn conjugate(&self, g: &Mat2) -> Self {
        let gi = g.inverse();
        let (m0, m1) = self.matrices();
        Self::from_matrices(*g * m0 * gi, *g * m1 * gi)
    }

    pub fn add(&self, o: &SlTwoSystem) -> Self {
        Self::new(self.alpha + o.alpha, self.beta + o.beta, self.gamma + o.gamma)
    }

    /// Coefficients flattened as `(α₀, α₁, β₀, β₁, γ₀, γ₁)`.
    pub fn flat(&self) -> [Complex64; 6] {
        [
            self.alpha.coeffs[0],
            self.alpha.coeffs[1],
            self.beta.coeffs[0],
            self.beta.coeffs[1],
            self.gamma.coeffs[0],
            self.gamma.coeffs[1],
        ]
    }
}

/// `det(A) = −α² − βγ`.
pub fn det_map(a: &SlTwoSystem) -> QuadraticDifferential {
    -(a.alpha.times(&a.alpha)) - a.beta.times(&a.gamma)
}

/// Derivative of [`det_map`] at `A` in direction `Φ = [[φ₁, φ₂], [φ₃, −φ₁]]`:
/// `−tr(AΦ) = −2αφ₁ − γφ₂ − βφ₃`.
pub fn d_det(a: &SlTwoSystem, phi: &SlTwoSystem) -> QuadraticDifferential {
    let two = Complex64::new(2.0, 0.0);
    -(a.alpha.times(&phi.alpha).scale(two)) - a.gamma.times(&phi.beta) - a.beta.times(&phi.gamma)
}

/// Rank of `(φ₁, φ₂, φ₃) ↦ αφ₁ + βφ₂ + γφ₃` from `Ω¹³` to the quadratic differentials.
///
/// Rank 3 is exactly surjectivity of the differential of the determinant map at `A`.
pub fn noether_rank(a: &SlTwoSystem) -> usize {
    let forms = [a.alpha, a.beta, a.gamma];
    let basis = [AbelianDifferential::omega0(), AbelianDifferential::omega1()];
    let mut m = DMatrix::<Complex64>::zeros(3, 6);
    for (i, f) in forms.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let prod = f.times(b);
            for k in 0..3 {
                m[(k, 2 * i + j)] = prod.coeffs[k];
            }
        }
    }
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * top).count()
}

/// Teichmüller-form Beltrami differential `μ = k·conj(q)/|q|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeltramiRepresentative {
    pub q: QuadraticDifferential,
    pub k: f64,
}

impl BeltramiRepresentative {
    pub fn new(q: QuadraticDifferential, k: f64) -> crate::Result<Self> {
        if !(0.0..1.0).contains(&k) {
            return Err(crate::Error::InvalidInput(format!("Beltrami modulus must lie in [0, 1), got {k}")));
        }
        if q.is_zero() {
            return Err(crate::Error::InvalidInput("Beltrami direction must be nonzero".into()));
        }
        Ok(Self { q, k })
    }
}
