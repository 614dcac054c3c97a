//! Genus-2 hyperelliptic curves `y² = p(x)`, piecewise paths in the x-plane with
//! sheet tracking, and a lasso-based generating system of the surface group.

use crate::error::{Error, Result};
use crate::poly;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest angle (radians) allowed between consecutive tracked square-root values.
const TRACK_ANGLE: f64 = PI / 8.0;
/// Knot spacing cap for tracked branches, in segment parameter units.
const TRACK_MAX_STEP: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperellipticCurve {
    p_coeffs: Vec<Complex64>,
    lead: Complex64,
    branch_points: Vec<Complex64>,
    separation: f64,
}

impl HyperellipticCurve {
    /// Builds the curve from ascending coefficients of `p` (degree 5 or 6).
    pub fn new(p_coeffs: &[Complex64], tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
        }
        let coeffs = poly::trim(p_coeffs);
        let degree = coeffs.len() - 1;
        if degree != 5 && degree != 6 {
            return Err(Error::BadDegree(degree));
        }
        let lead = coeffs[degree];
        let branch_points = poly::roots(&coeffs);
        let separation = poly::min_separation(&branch_points);
        if !(separation >= tol) {
            return Err(Error::RepeatedRoots { separation, tol });
        }
        let rebuilt = poly::from_roots(lead, &branch_points);
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mismatch = rebuilt
            .iter()
            .zip(coeffs.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if mismatch > 1e-10 * scale {
            return Err(Error::InvalidInput(format!(
                "root finder failed to reproduce coefficients (relative mismatch {:e})",
                mismatch / scale
            )));
        }
        Ok(Self {
            p_coeffs: coeffs,
            lead,
            branch_points,
            separation,
        })
    }

    /// Curve with the given finite branch points; degree 5 puts the sixth at infinity.
    pub fn from_branch_points(lead: Complex64, points: &[Complex64], tol: f64) -> Result<Self> {
        Self::new(&poly::from_roots(lead, points), tol)
    }

    pub fn p_coeffs(&self) -> &[Complex64] {
        &self.p_coeffs
    }

    pub fn degree(&self) -> usize {
        self.p_coeffs.len() - 1
    }

    pub fn genus(&self) -> usize {
        2
    }

    pub fn lead(&self) -> Complex64 {
        self.lead
    }

    pub fn branch_points(&self) -> &[Complex64] {
        &self.branch_points
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// True when infinity is a branch point (odd degree model).
    pub fn branched_at_infinity(&self) -> bool {
        self.degree() == 5
    }

    /// `p(x)` in factored form, accurate near the branch points.
    pub fn p(&self, x: Complex64) -> Complex64 {
        self.branch_points.iter().fold(self.lead, |acc, &e| acc * (x - e))
    }

    /// `p(x) / (x - e_j)`.
    pub fn p_without(&self, j: usize, x: Complex64) -> Complex64 {
        self.branch_points
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .fold(self.lead, |acc, (_, &e)| acc * (x - e))
    }

    pub fn distance_to_branch_points(&self, x: Complex64) -> f64 {
        self.branch_points
            .iter()
            .map(|e| (x - e).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `y` on the requested sheet; `Plus` is the principal square root.
    pub fn y(&self, x: Complex64, sheet: Sheet) -> Complex64 {
        self.p(x).sqrt() * sheet.sign()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sheet {
    Plus,
    Minus,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::Plus => 1.0,
            Sheet::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sheet {
        match self {
            Sheet::Plus => Sheet::Minus,
            Sheet::Minus => Sheet::Plus,
        }
    }

    /// Sheet of `value` relative to the principal root `principal` at the same point.
    pub fn classify(value: Complex64, principal: Complex64) -> Sheet {
        if (value - principal).norm() <= (value + principal).norm() {
            Sheet::Plus
        } else {
            Sheet::Minus
        }
    }
}

/// An analytic arc in the x-plane, parametrized by `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Line {
        from: Complex64,
        to: Complex64,
    },
    /// `center + radius·exp(i(start_angle + sweep·s))`.
    Arc {
        center: Complex64,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn line(from: Complex64, to: Complex64) -> Self {
        Segment::Line { from, to }
    }

    pub fn arc(center: Complex64, radius: f64, start_angle: f64, sweep: f64) -> Self {
        Segment::Arc {
            center,
            radius,
            start_angle,
            sweep,
        }
    }

    pub fn point(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { from, to } => from + (to - from) * s,
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => center + Complex64::from_polar(radius, start_angle + sweep * s),
        }
    }

    /// `d point / ds`.
    pub fn derivative(&self, s: f64) -> Complex64 {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => Complex64::new(0.0, sweep) * Complex64::from_polar(radius, start_angle + sweep * s),
        }
    }

    pub fn start(&self) -> Complex64 {
        self.point(0.0)
    }

    pub fn end(&self) -> Complex64 {
        self.point(1.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn reversed(&self) -> Self {
        match *self {
            Segment::Line { from, to } => Segment::Line { from: to, to: from },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center,
                radius,
                start_angle: start_angle + sweep,
                sweep: -sweep,
            },
        }
    }

    /// The piece of this segment over `[s0, s1]`, reparametrized to `[0, 1]`.
    pub fn sub(&self, s0: f64, s1: f64) -> Self {
        match *self {
            Segment::Line { .. } => Segment::Line {
                from: self.point(s0),
                to: self.point(s1),
            },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center,
                radius,
                start_angle: start_angle + sweep * s0,
                sweep: sweep * (s1 - s0),
            },
        }
    }

    /// Euclidean distance from `z` to the segment.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        match *self {
            Segment::Line { from, to } => {
                let d = to - from;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (z - from).norm();
                }
                let s = (((z - from) * d.conj()).re / len2).clamp(0.0, 1.0);
                (z - self.point(s)).norm()
            }
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let rel = z - center;
                let radial = (rel.norm() - radius).abs();
                if sweep.abs() >= 2.0 * PI {
                    return radial;
                }
                let ang = rel.arg();
                // parameter of the angular projection, if it lies on the arc
                let mut delta = (ang - start_angle) * sweep.signum();
                delta = delta.rem_euclid(2.0 * PI);
                if delta <= sweep.abs() {
                    radial
                } else {
                    (z - self.start()).norm().min((z - self.end()).norm())
                }
            }
        }
    }
}

/// A piecewise path in the x-plane together with the sheet of `y` at its start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOnCurve {
    pub segments: Vec<Segment>,
    pub start_sheet: Sheet,
}

impl PathOnCurve {
    pub fn new(segments: Vec<Segment>, start_sheet: Sheet) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("path has no segments".into()));
        }
        for (k, w) in segments.windows(2).enumerate() {
            let gap = (w[0].end() - w[1].start()).norm();
            let scale = 1.0 + w[0].end().norm();
            if gap > 1e-9 * scale {
                return Err(Error::BrokenPath(gap, k));
            }
        }
        Ok(Self {
            segments,
            start_sheet,
        })
    }

    /// Constant path at a point (one degenerate line).
    pub fn constant(x: Complex64, sheet: Sheet) -> Self {
        Self {
            segments: vec![Segment::line(x, x)],
            start_sheet: sheet,
        }
    }

    /// Circle through `center + radius·e^{i·start_angle}`, traversed once counterclockwise.
    pub fn circle(center: Complex64, radius: f64, start_angle: f64, sheet: Sheet) -> Self {
        Self {
            segments: vec![Segment::arc(center, radius, start_angle, 2.0 * PI)],
            start_sheet: sheet,
        }
    }

    pub fn start(&self) -> Complex64 {
        self.segments[0].start()
    }

    pub fn end(&self) -> Complex64 {
        self.segments.last().unwrap().end()
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length()).sum()
    }

    /// Closed in the x-plane (sheet closure is checked by [`continue_sheet`]).
    pub fn is_closed_in_plane(&self) -> bool {
        (self.start() - self.end()).norm() <= 1e-9 * (1.0 + self.start().norm())
    }

    /// Minimal distance from the path to any branch point.
    pub fn clearance(&self, curve: &HyperellipticCurve) -> f64 {
        self.segments
            .iter()
            .flat_map(|seg| curve.branch_points().iter().map(move |&e| seg.distance_to(e)))
            .fold(f64::INFINITY, f64::min)
    }

    /// The same path traversed backwards, starting on `sheet`.
    pub fn reversed_from(&self, sheet: Sheet) -> Self {
        Self {
            segments: self.segments.iter().rev().map(|s| s.reversed()).collect(),
            start_sheet: sheet,
        }
    }

    /// Path reversal: starts where this path ends, on the sheet it ends on.
    pub fn reversed(&self, curve: &HyperellipticCurve) -> Result<Self> {
        let end = continue_sheet(curve, self, 0.0)?;
        Ok(self.reversed_from(end))
    }

    /// Concatenation `self · other`; `other` inherits the end sheet of `self`.
    pub fn then(&self, other: &PathOnCurve) -> Result<Self> {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().copied());
        Self::new(segments, self.start_sheet)
    }

    /// Splits at a point `(segment index, parameter)`.
    pub fn split(&self, curve: &HyperellipticCurve, seg: usize, s: f64) -> Result<(Self, Self)> {
        if seg >= self.segments.len() || !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput("split point outside the path".into()));
        }
        let mut first: Vec<Segment> = self.segments[..seg].to_vec();
        first.push(self.segments[seg].sub(0.0, s));
        let head = Self::new(first, self.start_sheet)?;
        let mid_sheet = continue_sheet(curve, &head, 0.0)?;
        let mut second = vec![self.segments[seg].sub(s, 1.0)];
        second.extend_from_slice(&self.segments[seg + 1..]);
        Ok((head, Self::new(second, mid_sheet)?))
    }
}

/// Continuous square-root branch of a holomorphic function along one segment,
/// stored as knots `(s, value)` close enough that the nearest-sign rule is exact.
#[derive(Debug, Clone)]
pub struct SegmentBranch {
    knots: Vec<(f64, Complex64)>,
}

impl SegmentBranch {
    /// Tracks `sqrt(g)` from `start` (a square root of `g` at the segment start).
    pub fn track<G: Fn(Complex64) -> Complex64>(
        g: &G,
        seg: &Segment,
        start: Complex64,
        max_step: f64,
    ) -> Result<Self> {
        let mut knots = vec![(0.0, start)];
        let mut s = 0.0;
        let mut value = start;
        let mut h = max_step.min(TRACK_MAX_STEP);
        while s < 1.0 {
            let s_next = (s + h).min(1.0);
            let w = g(seg.point(s_next)).sqrt();
            let cand = if (w - value).norm() <= (w + value).norm() { w } else { -w };
            let turn = if value.norm() == 0.0 || cand.norm() == 0.0 {
                PI
            } else {
                (cand / value).arg().abs()
            };
            if turn < TRACK_ANGLE {
                s = s_next;
                value = cand;
                knots.push((s, value));
                h = (h * 1.5).min(max_step.min(TRACK_MAX_STEP));
            } else {
                h *= 0.5;
                if h < 1e-13 {
                    return Err(Error::PathTooClose {
                        clearance: 0.0,
                        tol: 0.0,
                    });
                }
            }
        }
        Ok(Self { knots })
    }

    pub fn end_value(&self) -> Complex64 {
        self.knots.last().unwrap().1
    }

    /// Picks the sign of `root` (some square root of g at parameter `s`) that
    /// continues the tracked branch.
    pub fn resolve(&self, s: f64, root: Complex64) -> Complex64 {
        let idx = self.knots.partition_point(|k| k.0 <= s).saturating_sub(1);
        let near = if idx + 1 < self.knots.len() && (self.knots[idx + 1].0 - s) < (s - self.knots[idx].0) {
            self.knots[idx + 1].1
        } else {
            self.knots[idx].1
        };
        if (root - near).norm() <= (root + near).norm() {
            root
        } else {
            -root
        }
    }
}

/// A square-root branch tracked over every segment of a path.
#[derive(Debug, Clone)]
pub struct PathBranch {
    pub segments: Vec<Segment>,
    pub branches: Vec<SegmentBranch>,
}

impl PathBranch {
    pub fn track<G: Fn(Complex64) -> Complex64>(
        g: &G,
        segments: &[Segment],
        start: Complex64,
        max_step: f64,
    ) -> Result<Self> {
        let mut branches = Vec::with_capacity(segments.len());
        let mut value = start;
        for seg in segments {
            let b = SegmentBranch::track(g, seg, value, max_step)?;
            value = b.end_value();
            branches.push(b);
        }
        Ok(Self {
            segments: segments.to_vec(),
            branches,
        })
    }

    pub fn end_value(&self) -> Complex64 {
        self.branches.last().unwrap().end_value()
    }
}

/// Tracks `y = sqrt(p(x))` along the path, starting on the path's start sheet.
pub fn track_y(curve: &HyperellipticCurve, path: &PathOnCurve, max_step: f64) -> Result<PathBranch> {
    let y0 = curve.y(path.start(), path.start_sheet);
    PathBranch::track(&|x| curve.p(x), &path.segments, y0, max_step)
}

/// Sheet reached at the end of `path` by analytic continuation of `y`.
///
/// `tol` is the minimal admissible clearance (0 skips the check beyond positivity).
pub fn continue_sheet(curve: &HyperellipticCurve, path: &PathOnCurve, tol: f64) -> Result<Sheet> {
    continue_sheet_with_step(curve, path, tol, TRACK_MAX_STEP)
}

/// As [`continue_sheet`], with an explicit cap on the tracking step.
pub fn continue_sheet_with_step(
    curve: &HyperellipticCurve,
    path: &PathOnCurve,
    tol: f64,
    max_step: f64,
) -> Result<Sheet> {
    let clearance = path.clearance(curve);
    if !(clearance > tol) || clearance == 0.0 {
        return Err(Error::PathTooClose { clearance, tol });
    }
    let track = track_y(curve, path, max_step)?;
    let end = path.end();
    Ok(Sheet::classify(track.end_value(), curve.y(end, Sheet::Plus)))
}

/// Index of a generator in [`SurfaceGroupGenerators::loops`].
pub const A1: usize = 0;
pub const B1: usize = 1;
pub const A2: usize = 2;
pub const B2: usize = 3;

/// The surface relation `a1 b1 a1⁻¹ b1⁻¹ a2 b2 a2⁻¹ b2⁻¹` as (generator, inverted) letters,
/// read left to right in traversal order.
pub const RELATION_WORD: [(usize, bool); 8] = [
    (A1, false),
    (B1, false),
    (A1, true),
    (B1, true),
    (A2, false),
    (B2, false),
    (A2, true),
    (B2, true),
];

/// Four sheet-closed loops at a common base point generating the surface group.
///
/// The loops are products of lassos `s_k` (ray from the base point, small
/// counterclockwise circle around one branch point, ray back), labelled by the
/// angular order of the branch points seen from the base point. With
/// `a1 = s1 s2`, `b1 = s3 s2`, `a2 = s4 s5`, `b2 = s6 s5` one gets
/// `[a1,b1][a2,b2] = (s1 s2 s3)² (s4 s5 s6)²`, trivial because `s1⋯s6 = 1`
/// and each `s_k²` lifts to a contractible loop. In the odd-degree model the
/// lasso around infinity is `s6 = (s1⋯s5)⁻¹`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceGroupGenerators {
    pub base_point: Complex64,
    pub lasso_radius: f64,
    /// Branch point indices in angular order around the base point.
    pub order: Vec<usize>,
    pub loops: [PathOnCurve; 4],
}

impl SurfaceGroupGenerators {
    pub fn relation_word(&self) -> [(usize, bool); 8] {
        RELATION_WORD
    }

    /// The relation word as one concatenated closed path.
    pub fn relation_path(&self, curve: &HyperellipticCurve) -> Result<PathOnCurve> {
        let mut segs = Vec::new();
        for &(g, inv) in RELATION_WORD.iter() {
            let lp = if inv {
                self.loops[g].reversed(curve)?
            } else {
                self.loops[g].clone()
            };
            segs.extend(lp.segments);
        }
        PathOnCurve::new(segs, Sheet::Plus)
    }
}

/// Lasso around branch point `e` from `base`: ray, full circle, ray back.
fn lasso(base: Complex64, e: Complex64, radius: f64, ccw: bool) -> Vec<Segment> {
    let dir = e - base;
    let foot = base + dir * (1.0 - radius / dir.norm());
    let start_angle = (base - e).arg();
    let sweep = if ccw { 2.0 * PI } else { -2.0 * PI };
    vec![
        Segment::line(base, foot),
        Segment::arc(e, radius, start_angle, sweep),
        Segment::line(foot, base),
    ]
}

/// Largest lasso radius the routing checks of [`generators_at`] accept at `base`.
fn admissible_radius(curve: &HyperellipticCurve, base: Complex64) -> f64 {
    let pts = curve.branch_points();
    let mut r = curve.separation() / 4.0;
    r = r.min(curve.distance_to_branch_points(base) / 2.0);
    for (i, &e) in pts.iter().enumerate() {
        let ray = Segment::line(base, e);
        for (j, &f) in pts.iter().enumerate() {
            if j != i {
                r = r.min(ray.distance_to(f) / 1.5);
            }
        }
    }
    r
}

/// Generators with the default routing: among base points on rings around the
/// centroid of the finite branch points, the one admitting the largest lasso
/// radius (capped at `separation / 4`).
pub fn canonical_generators(curve: &HyperellipticCurve) -> Result<SurfaceGroupGenerators> {
    let pts = curve.branch_points();
    let centroid = pts.iter().sum::<Complex64>() / pts.len() as f64;
    let spread = pts.iter().map(|e| (e - centroid).norm()).fold(0.0, f64::max);
    let mut best = (0.0, centroid);
    for ring in [0.0, 0.2, 0.35, 0.5, 0.7, 0.9, 1.2] {
        let count = if ring == 0.0 { 1 } else { 24 };
        for k in 0..count {
            let base = centroid + Complex64::from_polar(ring * spread, 0.13 + 2.0 * PI * k as f64 / count as f64);
            let r = admissible_radius(curve, base);
            if r > best.0 * (1.0 + 1e-9) {
                best = (r, base);
            }
        }
    }
    let floor = curve.separation() / 64.0;
    if best.0 < floor {
        return Err(Error::DegenerateConfiguration(format!(
            "best base point admits lasso radius {:e} below {:e}",
            best.0, floor
        )));
    }
    generators_at(curve, best.1, Some(best.0 * (1.0 - 1e-9)))
}

/// Generators from an explicit base point (routing hint); optional lasso radius.
pub fn generators_at(
    curve: &HyperellipticCurve,
    base: Complex64,
    radius: Option<f64>,
) -> Result<SurfaceGroupGenerators> {
    let pts = curve.branch_points();
    let r = radius.unwrap_or(curve.separation() / 4.0);
    if curve.distance_to_branch_points(base) < 2.0 * r {
        return Err(Error::DegenerateConfiguration(format!(
            "base point {base} within {} of a branch point",
            2.0 * r
        )));
    }
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&i, &j| {
        (pts[i] - base)
            .arg()
            .partial_cmp(&(pts[j] - base).arg())
            .unwrap()
    });
    // every ray must keep clear of the other branch points
    for &i in &order {
        let ray = Segment::line(base, pts[i]);
        for (j, &e) in pts.iter().enumerate() {
            if j != i && ray.distance_to(e) < 1.5 * r {
                return Err(Error::DegenerateConfiguration(format!(
                    "ray to branch point {i} passes within {:e} of branch point {j}",
                    ray.distance_to(e)
                )));
            }
        }
    }
    let s = |k: usize, ccw: bool| lasso(base, pts[order[k]], r, ccw);
    let join = |parts: Vec<Vec<Segment>>| -> Result<PathOnCurve> {
        PathOnCurve::new(parts.into_iter().flatten().collect(), Sheet::Plus)
    };
    let s6: Vec<Vec<Segment>> = if curve.branched_at_infinity() {
        (0..5).rev().map(|k| s(k, false)).collect()
    } else {
        vec![s(5, true)]
    };
    let a1 = join(vec![s(0, true), s(1, true)])?;
    let b1 = join(vec![s(2, true), s(1, true)])?;
    let a2 = join(vec![s(3, true), s(4, true)])?;
    let mut b2_parts = s6;
    b2_parts.push(s(4, true));
    let b2 = join(b2_parts)?;
    let gens = SurfaceGroupGenerators {
        base_point: base,
        lasso_radius: r,
        order,
        loops: [a1, b1, a2, b2],
    };
    for lp in gens.loops.iter() {
        if continue_sheet(curve, lp, 0.5 * r)? != Sheet::Plus {
            return Err(Error::DegenerateConfiguration("generator is not sheet-closed".into()));
        }
    }
    Ok(gens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn x5_minus_x() -> HyperellipticCurve {
        let coeffs = [c(0., 0.), c(-1., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)];
        HyperellipticCurve::new(&coeffs, 1e-6).unwrap()
    }

    #[test]
    fn x5_minus_x_has_unit_separation() {
        let curve = x5_minus_x();
        assert!((curve.separation() - 1.0).abs() < 1e-12);
        assert_eq!(curve.genus(), 2);
        assert!(curve.branched_at_infinity());
    }

    #[test]
    fn quintuple_root_rejected() {
        let coeffs = [c(0., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)];
        assert!(matches!(
            HyperellipticCurve::new(&coeffs, 1e-6),
            Err(Error::RepeatedRoots { .. })
        ));
    }

    #[test]
    fn bad_degree_rejected() {
        let coeffs = [c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)];
        assert_eq!(HyperellipticCurve::new(&coeffs, 1e-6).unwrap_err(), Error::BadDegree(3));
    }

    #[test]
    fn sixth_roots_of_unity() {
        let mut coeffs = vec![c(0., 0.); 7];
        coeffs[0] = c(-1., 0.);
        coeffs[6] = c(1., 0.);
        let curve = HyperellipticCurve::new(&coeffs, 1e-6).unwrap();
        for k in 0..6 {
            let w = Complex64::from_polar(1.0, PI * k as f64 / 3.0);
            let best = curve
                .branch_points()
                .iter()
                .map(|e| (e - w).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-13);
        }
        let expect = (c(1., 0.) - Complex64::from_polar(1.0, PI / 3.0)).norm();
        assert!((curve.separation() - expect).abs() < 1e-12);
    }

    #[test]
    fn constant_path_keeps_sheet() {
        let curve = x5_minus_x();
        let p = PathOnCurve::constant(c(0.4, 0.3), Sheet::Minus);
        assert_eq!(continue_sheet(&curve, &p, 0.0).unwrap(), Sheet::Minus);
    }

    #[test]
    fn loop_around_one_branch_point_flips() {
        let curve = x5_minus_x();
        let p = PathOnCurve::circle(c(1., 0.), 0.25, 0.3, Sheet::Plus);
        assert_eq!(continue_sheet(&curve, &p, 0.0).unwrap(), Sheet::Minus);
    }

    #[test]
    fn loop_around_two_branch_points_returns() {
        let curve = x5_minus_x();
        let p = PathOnCurve::circle(c(0.5, 0.), 0.75, 1.0, Sheet::Plus);
        // encloses 0 and 1 only
        assert_eq!(continue_sheet(&curve, &p, 0.0).unwrap(), Sheet::Plus);
        // composed single-point continuations agree
        let one = PathOnCurve::circle(c(1., 0.), 0.25, PI, Sheet::Plus);
        let s1 = continue_sheet(&curve, &one, 0.0).unwrap();
        assert_eq!(s1.flip(), Sheet::Plus);
    }

    #[test]
    fn path_through_branch_point_rejected() {
        let curve = x5_minus_x();
        let p = PathOnCurve::new(vec![Segment::line(c(-0.5, 0.), c(0.5, 0.))], Sheet::Plus).unwrap();
        assert!(matches!(continue_sheet(&curve, &p, 1e-6), Err(Error::PathTooClose { .. })));
    }

    #[test]
    fn generators_are_sheet_closed() {
        let curve = x5_minus_x();
        let gens = canonical_generators(&curve).unwrap();
        for lp in gens.loops.iter() {
            assert!(lp.is_closed_in_plane());
            assert_eq!(continue_sheet(&curve, lp, 0.0).unwrap(), Sheet::Plus);
            assert!(lp.clearance(&curve) >= 0.99 * gens.lasso_radius);
            assert!((lp.start() - gens.base_point).norm() < 1e-12);
        }
    }

    #[test]
    fn loop_then_reverse_is_trivial() {
        let curve = x5_minus_x();
        let gens = canonical_generators(&curve).unwrap();
        for lp in gens.loops.iter() {
            let back = lp.reversed(&curve).unwrap();
            let there_and_back = lp.then(&back).unwrap();
            assert_eq!(continue_sheet(&curve, &there_and_back, 0.0).unwrap(), Sheet::Plus);
        }
    }

    #[test]
    fn arc_distance() {
        let arc = Segment::arc(c(0., 0.), 1.0, 0.0, PI / 2.0);
        assert!((arc.distance_to(c(2., 0.)) - 1.0).abs() < 1e-14);
        assert!((arc.distance_to(c(0., -1.)) - 2f64.sqrt()).abs() < 1e-14);
        let rev = arc.reversed();
        assert!((rev.start() - arc.end()).norm() < 1e-15);
        assert!((rev.distance_to(c(0., -1.)) - 2f64.sqrt()).abs() < 1e-14);
    }
}
