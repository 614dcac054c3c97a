//! Adaptive Gauss–Kronrod quadrature in one dimension and on unions of rectangles.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

/// Kronrod abscissae on [-1, 1] (non-negative half, descending).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
/// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// The 15 Kronrod nodes on [-1, 1] with Kronrod and (embedded) Gauss weights.
pub(crate) fn gk15_rule() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    let mut k = 0;
    for i in 0..7 {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        out[k] = (-XGK[i], WGK[i], wg);
        out[k + 1] = (XGK[i], WGK[i], wg);
        k += 2;
    }
    out[14] = (0.0, WGK[7], WG[3]);
    out
}

/// Fixed Gauss–Legendre rule with `n` points on [-1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Value and error estimate of a 1-D integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

fn gk15_interval<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut k = Complex64::new(0.0, 0.0);
    let mut g = Complex64::new(0.0, 0.0);
    for (x, wk, wg) in gk15_rule() {
        let v = f(mid + half * x);
        k += v * wk;
        g += v * wg;
    }
    (k * half, ((k - g) * half).norm())
}

/// Globally adaptive Gauss–Kronrod (7, 15) on `[a, b]`.
///
/// Stops when the summed error estimate falls below `max(atol, rtol·|I|)`.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, atol: f64, rtol: f64) -> Result<Estimate> {
    integrate_with_breaks(f, &[a, b], atol, rtol, 4000)
}

/// As [`integrate`], starting from the given break points (sorted).
pub fn integrate_with_breaks<F: Fn(f64) -> Complex64>(
    f: F,
    breaks: &[f64],
    atol: f64,
    rtol: f64,
    max_intervals: usize,
) -> Result<Estimate> {
    let mut cells: Vec<(f64, f64, Complex64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15_interval(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    if cells.is_empty() {
        return Ok(Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    loop {
        let value: Complex64 = cells.iter().map(|c| c.2).sum();
        let error: f64 = cells.iter().map(|c| c.3).sum();
        let tol = atol.max(rtol * value.norm());
        if error <= tol {
            return Ok(Estimate { value, error });
        }
        let (idx, worst) = cells
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, c)| (i, *c))
            .unwrap();
        let (a, b) = (worst.0, worst.1);
        let m = 0.5 * (a + b);
        if cells.len() >= max_intervals || m <= a || m >= b {
            return Err(Error::QuadratureNotConverged { estimate: error, tol });
        }
        let (v1, e1) = gk15_interval(&f, a, m);
        let (v2, e2) = gk15_interval(&f, m, b);
        cells[idx] = (a, m, v1, e1);
        cells.push((m, b, v2, e2));
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]` tagged with the piece it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub piece: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Cell {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn split(&self) -> [Cell; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        let c = |x0, x1, y0, y1| Cell {
            piece: self.piece,
            x0,
            x1,
            y0,
            y1,
        };
        [
            c(self.x0, xm, self.y0, ym),
            c(xm, self.x1, self.y0, ym),
            c(self.x0, xm, ym, self.y1),
            c(xm, self.x1, ym, self.y1),
        ]
    }

    /// Tensor Kronrod nodes of this cell with product weights (area included).
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        let rule = gk15_rule();
        let (hx, hy) = (0.5 * (self.x1 - self.x0), 0.5 * (self.y1 - self.y0));
        let (mx, my) = (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1));
        let mut out = Vec::with_capacity(225);
        for &(a, wa, _) in rule.iter() {
            for &(b, wb, _) in rule.iter() {
                out.push((mx + hx * a, my + hy * b, wa * wb * hx * hy));
            }
        }
        out
    }
}

fn tensor_gk<F: Fn(usize, f64, f64) -> Complex64>(f: &F, c: &Cell) -> (Complex64, f64) {
    let rule = gk15_rule();
    let (hx, hy) = (0.5 * (c.x1 - c.x0), 0.5 * (c.y1 - c.y0));
    let (mx, my) = (0.5 * (c.x0 + c.x1), 0.5 * (c.y0 + c.y1));
    let mut k = Complex64::new(0.0, 0.0);
    let mut g = Complex64::new(0.0, 0.0);
    for &(a, wka, wga) in rule.iter() {
        for &(b, wkb, wgb) in rule.iter() {
            let v = f(c.piece, mx + hx * a, my + hy * b);
            k += v * (wka * wkb);
            if wga != 0.0 && wgb != 0.0 {
                g += v * (wga * wgb);
            }
        }
    }
    let area = hx * hy;
    (k * area, ((k - g) * area).norm())
}

/// Result of a 2-D adaptive integration, with the final partition.
#[derive(Debug, Clone)]
pub struct Adaptive2d {
    pub value: Complex64,
    pub error: f64,
    pub leaves: Vec<Cell>,
}

/// Globally adaptive tensor Gauss–Kronrod cubature over a set of cells.
///
/// Cells with the largest error estimates are quadrisected in deterministic
/// batches; batch members are evaluated in parallel. The integrand receives
/// `(piece, x, y)` so that one call can integrate several coordinate patches.
pub fn adaptive_2d<F>(f: &F, initial: &[Cell], atol: f64, rtol: f64, max_cells: usize) -> Result<Adaptive2d>
where
    F: Fn(usize, f64, f64) -> Complex64 + Sync,
{
    let mut cells: Vec<(Cell, Complex64, f64)> = initial
        .par_iter()
        .map(|c| {
            let (v, e) = tensor_gk(f, c);
            (*c, v, e)
        })
        .collect();
    loop {
        let value: Complex64 = cells.iter().map(|c| c.1).sum();
        let error: f64 = cells.iter().map(|c| c.2).sum();
        let tol = atol.max(rtol * value.norm());
        if error <= tol {
            return Ok(Adaptive2d {
                value,
                error,
                leaves: cells.into_iter().map(|c| c.0).collect(),
            });
        }
        if cells.len() >= max_cells {
            return Err(Error::QuadratureNotConverged { estimate: error, tol });
        }
        // split every cell whose error exceeds its fair share, at least the worst one
        let share = tol / cells.len() as f64;
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&i, &j| cells[j].2.partial_cmp(&cells[i].2).unwrap().then(i.cmp(&j)));
        let budget = ((max_cells - cells.len()) / 3).max(1);
        let picked: Vec<usize> = order
            .iter()
            .copied()
            .take_while(|&i| cells[i].2 > share)
            .take(budget.min(cells.len() / 4 + 1))
            .collect();
        let picked = if picked.is_empty() { vec![order[0]] } else { picked };
        let children: Vec<Vec<(Cell, Complex64, f64)>> = picked
            .par_iter()
            .map(|&i| {
                cells[i]
                    .0
                    .split()
                    .iter()
                    .map(|c| {
                        let (v, e) = tensor_gk(f, c);
                        (*c, v, e)
                    })
                    .collect()
            })
            .collect();
        let mut drop = vec![false; cells.len()];
        for &i in &picked {
            drop[i] = true;
        }
        let mut next: Vec<(Cell, Complex64, f64)> = cells
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !drop[*i])
            .map(|(_, c)| c)
            .collect();
        for ch in children {
            next.extend(ch);
        }
        cells = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_integrates_polynomials_exactly() {
        let est = integrate(|x| Complex64::new(x.powi(20), 0.0), -1.0, 1.0, 1e-15, 0.0).unwrap();
        assert!((est.value.re - 2.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_kink() {
        let est = integrate(|x| Complex64::new((x - 0.3).abs(), 0.0), -1.0, 1.0, 1e-13, 0.0).unwrap();
        let exact = 0.5 * (1.3f64.powi(2) + 0.7f64.powi(2));
        assert!((est.value.re - exact).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_weights_sum() {
        for n in [1, 2, 5, 8, 16] {
            let r = gauss_legendre(n);
            let s: f64 = r.iter().map(|p| p.1).sum();
            assert!((s - 2.0).abs() < 1e-13);
            let m: f64 = r.iter().map(|p| p.1 * p.0.powi(2)).sum();
            if n >= 2 {
                assert!((m - 2.0 / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn adaptive_2d_cone() {
        // ∫∫_{[-1,1]^2} sqrt(x²+y²) = (4/3)(√2 + asinh 1)
        let f = |_: usize, x: f64, y: f64| Complex64::new((x * x + y * y).sqrt(), 0.0);
        let cell = Cell {
            piece: 0,
            x0: -1.0,
            x1: 1.0,
            y0: -1.0,
            y1: 1.0,
        };
        let r = adaptive_2d(&f, &[cell], 1e-10, 0.0, 100_000).unwrap();
        let exact = 4.0 / 3.0 * (2f64.sqrt() + 1f64.asinh());
        assert!((r.value.re - exact).abs() < 1e-9, "{} vs {}", r.value.re, exact);
    }
}
