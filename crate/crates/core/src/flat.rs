//! Half-translation surfaces glued from polygons, straight-line flow, Birkhoff
//! averages and the construction of closed curves that are nearly horizontal
//! for one quadratic differential and strictly shorter in width for another.
//!
//! Charts are the polygons themselves: the reference differential `φ` is `dz²`
//! in every polygon, and a second differential `ψ` is given by the ratio `ψ/φ`
//! per chart.

use crate::curve::Segment;
use crate::differentials::width_along;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const EDGE_TOL: f64 = 1e-12;

fn cross(u: Complex64, v: Complex64) -> f64 {
    u.re * v.im - u.im * v.re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gluing {
    /// `z ↦ z + c`; the paired edges are opposite vectors.
    Translation,
    /// `z ↦ −z + c`; the paired edges are equal vectors.
    Flip,
}

/// Edge `edge` of polygon `polygon` runs from vertex `edge` to vertex `edge + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRef {
    pub polygon: usize,
    pub edge: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePair {
    pub a: EdgeRef,
    pub b: EdgeRef,
    pub gluing: Gluing,
}

/// Input description of a surface: counterclockwise polygons and edge pairings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub polygons: Vec<Vec<Complex64>>,
    pub pairings: Vec<EdgePair>,
    /// Optional declared genus, checked against the gluing.
    #[serde(default)]
    pub genus: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub class: usize,
    pub angle: f64,
}

/// Where an edge leads: partner edge, gluing sign and the constant of the map.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Link {
    to: EdgeRef,
    sign: f64,
    shift: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfTranslationSurface {
    pub polygons: Vec<Vec<Complex64>>,
    pub pairings: Vec<EdgePair>,
    links: Vec<Vec<Link>>,
    /// Vertex class of each polygon corner.
    pub vertex_class: Vec<Vec<usize>>,
    /// Total angle of every vertex class.
    pub class_angles: Vec<f64>,
    pub genus: usize,
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut k = i;
    while parent[k] != r {
        let next = parent[k];
        parent[k] = r;
        k = next;
    }
    r
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

fn polygon_area(v: &[Complex64]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

impl HalfTranslationSurface {
    pub fn new(spec: &SurfaceSpec) -> Result<Self> {
        let polys = &spec.polygons;
        if polys.is_empty() {
            return Err(Error::InvalidInput("surface needs at least one polygon".into()));
        }
        for (i, p) in polys.iter().enumerate() {
            if p.len() < 3 {
                return Err(Error::InvalidInput(format!("polygon {i} has fewer than three vertices")));
            }
            if polygon_area(p) <= 0.0 {
                return Err(Error::InvalidInput(format!("polygon {i} is not counterclockwise")));
            }
        }
        let scale = polys
            .iter()
            .flat_map(|p| p.iter())
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        let edge = |r: &EdgeRef| -> Result<(Complex64, Complex64)> {
            let p = polys
                .get(r.polygon)
                .ok_or_else(|| Error::MismatchedEdges(format!("no polygon {}", r.polygon)))?;
            if r.edge >= p.len() {
                return Err(Error::MismatchedEdges(format!("polygon {} has no edge {}", r.polygon, r.edge)));
            }
            Ok((p[r.edge], p[(r.edge + 1) % p.len()]))
        };
        let mut links: Vec<Vec<Option<Link>>> = polys.iter().map(|p| vec![None; p.len()]).collect();
        for pair in &spec.pairings {
            let (a0, a1) = edge(&pair.a)?;
            let (b0, b1) = edge(&pair.b)?;
            let (ea, eb) = (a1 - a0, b1 - b0);
            let (gap, sign, shift) = match pair.gluing {
                Gluing::Translation => ((ea + eb).norm(), 1.0, b1 - a0),
                Gluing::Flip => ((ea - eb).norm(), -1.0, b1 + a0),
            };
            if gap > EDGE_TOL * scale {
                return Err(Error::MismatchedEdges(format!(
                    "edges {:?} and {:?} differ by {gap:e}",
                    pair.a, pair.b
                )));
            }
            if pair.a == pair.b {
                return Err(Error::MismatchedEdges(format!("edge {:?} paired with itself", pair.a)));
            }
            for (from, to, s, c) in [(pair.a, pair.b, sign, shift), (pair.b, pair.a, sign, -shift * sign)] {
                let slot = &mut links[from.polygon][from.edge];
                if slot.is_some() {
                    return Err(Error::MismatchedEdges(format!("edge {from:?} paired twice")));
                }
                *slot = Some(Link { to, sign: s, shift: c });
            }
        }
        let mut full = Vec::with_capacity(polys.len());
        for (i, row) in links.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (e, l) in row.into_iter().enumerate() {
                out.push(l.ok_or_else(|| Error::MismatchedEdges(format!("edge {e} of polygon {i} is unpaired")))?);
            }
            full.push(out);
        }

        // connectivity over polygons
        let mut parent: Vec<usize> = (0..polys.len()).collect();
        for pair in &spec.pairings {
            union(&mut parent, pair.a.polygon, pair.b.polygon);
        }
        if (0..polys.len()).any(|i| find(&mut parent, i) != 0) {
            return Err(Error::Disconnected);
        }

        // vertex classes: the start of edge a meets the end of edge b, and vice versa
        let offsets: Vec<usize> = polys
            .iter()
            .scan(0, |acc, p| {
                let o = *acc;
                *acc += p.len();
                Some(o)
            })
            .collect();
        let corner = |poly: usize, v: usize| offsets[poly] + v % polys[poly].len();
        let total: usize = polys.iter().map(|p| p.len()).sum();
        let mut vparent: Vec<usize> = (0..total).collect();
        for pair in &spec.pairings {
            let (a, b) = (pair.a, pair.b);
            union(&mut vparent, corner(a.polygon, a.edge), corner(b.polygon, b.edge + 1));
            union(&mut vparent, corner(a.polygon, a.edge + 1), corner(b.polygon, b.edge));
        }
        let mut roots: Vec<usize> = Vec::new();
        let mut vertex_class = Vec::with_capacity(polys.len());
        let mut class_angles: Vec<f64> = Vec::new();
        for (pi, p) in polys.iter().enumerate() {
            let n = p.len();
            let mut row = Vec::with_capacity(n);
            for v in 0..n {
                let r = find(&mut vparent, corner(pi, v));
                let cls = match roots.iter().position(|&x| x == r) {
                    Some(k) => k,
                    None => {
                        roots.push(r);
                        class_angles.push(0.0);
                        roots.len() - 1
                    }
                };
                let prev = p[(v + n - 1) % n] - p[v];
                let next = p[(v + 1) % n] - p[v];
                // interior angle of a counterclockwise polygon, in (0, 2π)
                let ang = (prev / next).arg().rem_euclid(2.0 * PI);
                class_angles[cls] += ang;
                row.push(cls);
            }
            vertex_class.push(row);
        }
        let v = class_angles.len() as i64;
        let e = spec.pairings.len() as i64;
        let f = polys.len() as i64;
        let chi = v - e + f;
        if chi > 2 || (2 - chi) % 2 != 0 {
            return Err(Error::InvalidInput(format!("Euler characteristic {chi} is not that of a closed surface")));
        }
        let genus = ((2 - chi) / 2) as usize;
        let excess: f64 = class_angles.iter().map(|a| a - 2.0 * PI).sum();
        let expect = 2.0 * PI * (2.0 * genus as f64 - 2.0);
        if (excess - expect).abs() > 1e-9 {
            return Err(Error::MismatchedEdges(format!(
                "angle excess {excess} violates Gauss–Bonnet for genus {genus}"
            )));
        }
        if let Some(g) = spec.genus {
            if g != genus {
                return Err(Error::InvalidInput(format!("declared genus {g}, gluing gives {genus}")));
            }
        }
        Ok(Self {
            polygons: polys.clone(),
            pairings: spec.pairings.clone(),
            links: full,
            vertex_class,
            class_angles,
            genus,
        })
    }

    /// `[0,1]²` with opposite sides identified by translations.
    pub fn unit_torus() -> Self {
        let c = |x: f64, y: f64| Complex64::new(x, y);
        let r = |polygon, edge| EdgeRef { polygon, edge };
        Self::new(&SurfaceSpec {
            polygons: vec![vec![c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.)]],
            pairings: vec![
                EdgePair {
                    a: r(0, 0),
                    b: r(0, 2),
                    gluing: Gluing::Translation,
                },
                EdgePair {
                    a: r(0, 1),
                    b: r(0, 3),
                    gluing: Gluing::Translation,
                },
            ],
            genus: Some(1),
        })
        .expect("torus spec is valid")
    }

    /// Regular octagon with unit sides, opposite sides glued by translation.
    pub fn regular_octagon() -> Self {
        let r = 0.5 / (PI / 8.0).sin();
        let verts: Vec<Complex64> = (0..8)
            .map(|k| Complex64::from_polar(r, PI / 8.0 + k as f64 * PI / 4.0))
            .collect();
        let pairings = (0..4)
            .map(|k| EdgePair {
                a: EdgeRef { polygon: 0, edge: k },
                b: EdgeRef { polygon: 0, edge: k + 4 },
                gluing: Gluing::Translation,
            })
            .collect();
        Self::new(&SurfaceSpec {
            polygons: vec![verts],
            pairings,
            genus: Some(2),
        })
        .expect("octagon spec is valid")
    }

    /// Vertex classes whose angle differs from 2π.
    pub fn cone_points(&self) -> Vec<ConePoint> {
        self.class_angles
            .iter()
            .enumerate()
            .filter(|(_, a)| (*a - 2.0 * PI).abs() > 1e-9)
            .map(|(class, &angle)| ConePoint { class, angle })
            .collect()
    }

    /// Total flat area, i.e. `‖φ‖` for the reference differential.
    pub fn area(&self) -> f64 {
        self.polygons.iter().map(|p| polygon_area(p)).sum()
    }

    pub fn contains(&self, p: &FlatPoint) -> bool {
        let Some(v) = self.polygons.get(p.polygon) else {
            return false;
        };
        let n = v.len();
        // winding test, strict interior
        let mut wind = 0.0;
        for i in 0..n {
            let (a, b) = (v[i] - p.z, v[(i + 1) % n] - p.z);
            if a.norm() < EDGE_TOL || b.norm() < EDGE_TOL {
                return false;
            }
            wind += (b / a).arg();
        }
        wind.abs() > PI
    }

    /// First exit of the ray `z + τd` (τ > 0) from polygon `poly`, skipping `skip`.
    fn exit(&self, poly: usize, z: Complex64, d: Complex64, skip: Option<usize>) -> Option<(f64, usize, f64)> {
        let v = &self.polygons[poly];
        let n = v.len();
        let mut best: Option<(f64, usize, f64)> = None;
        for e in 0..n {
            if Some(e) == skip {
                continue;
            }
            let a = v[e];
            let ev = v[(e + 1) % n] - a;
            let denom = cross(d, ev);
            if denom.abs() < 1e-300 {
                continue;
            }
            let tau = cross(a - z, ev) / denom;
            let s = cross(a - z, d) / denom;
            if tau > 1e-14 && (-EDGE_TOL..=1.0 + EDGE_TOL).contains(&s) && best.is_none_or(|b| tau < b.0) {
                best = Some((tau, e, s));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatPoint {
    pub polygon: usize,
    pub z: Complex64,
}

/// A straight piece inside one polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatSegment {
    pub polygon: usize,
    pub from: Complex64,
    pub to: Complex64,
}

impl FlatSegment {
    pub fn length(&self) -> f64 {
        (self.to - self.from).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTrajectory {
    pub start: FlatPoint,
    /// Chart direction angle at the start.
    pub direction: f64,
    pub time: f64,
    pub segments: Vec<FlatSegment>,
    pub end: FlatPoint,
    /// Unit direction at the end (gluing flips may reverse it).
    pub end_direction: Complex64,
}

/// Chart direction of the horizontal foliation of `e^{iθ}φ` (`φ = dz²`).
pub fn horizontal_direction(theta: f64) -> f64 {
    -theta / 2.0
}

/// Straight-line flow for time `t` in chart direction `angle`.
pub fn flow(surface: &HalfTranslationSurface, start: FlatPoint, angle: f64, t: f64) -> Result<FlatTrajectory> {
    flow_dir(surface, start, Complex64::from_polar(1.0, angle), t)
}

fn flow_dir(surface: &HalfTranslationSurface, start: FlatPoint, dir: Complex64, t: f64) -> Result<FlatTrajectory> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("flow time must be nonnegative, got {t}")));
    }
    if !surface.contains(&start) {
        return Err(Error::InvalidInput("start point is not interior to its polygon".into()));
    }
    let mut poly = start.polygon;
    let mut z = start.z;
    let mut d = dir / dir.norm();
    let mut left = t;
    let mut skip = None;
    let mut segments = Vec::new();
    while left > 0.0 {
        let (tau, e, s) = surface
            .exit(poly, z, d, skip)
            .ok_or_else(|| Error::InvalidInput("trajectory left its polygon".into()))?;
        if tau >= left {
            let end = z + d * left;
            segments.push(FlatSegment { polygon: poly, from: z, to: end });
            z = end;
            break;
        }
        let len = (surface.polygons[poly][(e + 1) % surface.polygons[poly].len()] - surface.polygons[poly][e]).norm();
        if s * len < EDGE_TOL * len.max(1.0) * 1e2 || (1.0 - s) * len < EDGE_TOL * len.max(1.0) * 1e2 {
            let v = if s < 0.5 { e } else { (e + 1) % surface.polygons[poly].len() };
            let class = surface.vertex_class[poly][v];
            return Err(Error::HitsConePoint {
                class,
                angle: surface.class_angles[class],
            });
        }
        let hit = z + d * tau;
        segments.push(FlatSegment { polygon: poly, from: z, to: hit });
        left -= tau;
        let link = surface.links[poly][e];
        // exact point on the partner edge at parameter 1 − s
        let tv = &surface.polygons[link.to.polygon];
        let (b0, b1) = (tv[link.to.edge], tv[(link.to.edge + 1) % tv.len()]);
        z = b1 + (b0 - b1) * s;
        d *= link.sign;
        poly = link.to.polygon;
        skip = Some(link.to.edge);
    }
    Ok(FlatTrajectory {
        start,
        direction: dir.arg(),
        time: t,
        segments,
        end: FlatPoint { polygon: poly, z },
        end_direction: d,
    })
}

/// Flow back along the trajectory from its end; returns the reached point.
pub fn reverse(surface: &HalfTranslationSurface, traj: &FlatTrajectory) -> Result<FlatTrajectory> {
    flow_dir(surface, traj.end, -traj.end_direction, traj.time)
}

/// `(1/T)∫₀ᵀ f(α(t)) dt` along the trajectory, by Gauss–Legendre per segment.
pub fn birkhoff_average<F: Fn(usize, Complex64) -> f64>(traj: &FlatTrajectory, f: &F) -> f64 {
    if traj.time == 0.0 {
        return f(traj.start.polygon, traj.start.z);
    }
    let rule = gauss_legendre(8);
    let mut total = 0.0;
    for seg in &traj.segments {
        let len = seg.length();
        let pieces = (len * 4.0).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let a = seg.from + (seg.to - seg.from) * (k as f64 / pieces as f64);
            let b = seg.from + (seg.to - seg.from) * ((k + 1) as f64 / pieces as f64);
            let half = 0.5 * len / pieces as f64;
            for &(x, w) in &rule {
                total += w * half * f(seg.polygon, a + (b - a) * (0.5 * (x + 1.0)));
            }
        }
    }
    total / traj.time
}

/// Birkhoff average of a surface function along a freshly computed trajectory.
pub fn birkhoff_average_from<F: Fn(usize, Complex64) -> f64>(
    surface: &HalfTranslationSurface,
    f: &F,
    start: FlatPoint,
    angle: f64,
    t: f64,
) -> Result<f64> {
    Ok(birkhoff_average(&flow(surface, start, angle, t)?, f))
}

/// `ψ/φ` per chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChartRatio {
    Constant { value: Complex64 },
    /// Ascending polynomial coefficients, one list per polygon.
    Polynomial { coeffs: Vec<Vec<Complex64>> },
}

impl ChartRatio {
    pub fn at(&self, polygon: usize, z: Complex64) -> Complex64 {
        match self {
            ChartRatio::Constant { value } => *value,
            ChartRatio::Polynomial { coeffs } => crate::poly::eval(&coeffs[polygon], z),
        }
    }

    fn is_identity(&self) -> bool {
        match self {
            ChartRatio::Constant { value } => (*value - 1.0).norm() < 1e-14,
            ChartRatio::Polynomial { coeffs } => coeffs.iter().all(|c| {
                c.first().is_some_and(|c0| (*c0 - 1.0).norm() < 1e-14) && c.iter().skip(1).all(|x| x.norm() < 1e-14)
            }),
        }
    }

    /// `max |√(ψ/φ)|` over a chart segment (sampled, with 1% safety factor).
    pub fn max_sqrt_on(&self, seg: &FlatSegment) -> f64 {
        match self {
            ChartRatio::Constant { value } => value.norm().sqrt(),
            ChartRatio::Polynomial { .. } => {
                let m = (0..=256)
                    .map(|i| self.at(seg.polygon, seg.from + (seg.to - seg.from) * (i as f64 / 256.0)).norm().sqrt())
                    .fold(0.0, f64::max);
                1.01 * m
            }
        }
    }
}

/// `f_θ = |Re √(ψ/(e^{iθ}φ))|` at a chart point.
pub fn f_theta(ratio: &ChartRatio, theta: f64, polygon: usize, z: Complex64) -> f64 {
    (ratio.at(polygon, z) * Complex64::from_polar(1.0, -theta)).sqrt().re.abs()
}

/// `‖ψ‖ = ∫|ψ/φ| dA` by collapsed Gauss rules on a vertex-0 fan of each polygon.
pub fn ratio_norm(surface: &HalfTranslationSurface, ratio: &ChartRatio) -> f64 {
    if let ChartRatio::Constant { value } = ratio {
        return value.norm() * surface.area();
    }
    let rule = gauss_legendre(16);
    let mut total = 0.0;
    for (pi, v) in surface.polygons.iter().enumerate() {
        for k in 1..v.len() - 1 {
            let (a, b, c) = (v[0], v[k], v[k + 1]);
            let area = 0.5 * cross(b - a, c - a);
            for &(x, wx) in &rule {
                let u = 0.5 * (x + 1.0);
                for &(y, wy) in &rule {
                    let w = 0.5 * (y + 1.0);
                    // Duffy map of the unit square onto the triangle
                    let p = a + (b - a) * u * (1.0 - w) + (c - a) * u * w;
                    total += 0.25 * wx * wy * u * 2.0 * area * ratio.at(pi, p).norm();
                }
            }
        }
    }
    total
}

/// A closed chain of chart segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatCurve {
    pub segments: Vec<FlatSegment>,
    /// The short closing segment, absent when the chain already closed.
    pub closing_insert: Option<FlatSegment>,
    pub eps: f64,
}

impl FlatCurve {
    pub fn all_segments(&self) -> Vec<FlatSegment> {
        let mut v = self.segments.clone();
        v.extend(self.closing_insert);
        v
    }

    /// Certified bound on how much the insert changes the `ψ`-width, and (with
    /// ratio 1) the `φ`-width: `|insert|·max|√(ψ/φ)|`.
    pub fn insert_bound(&self, ratio: &ChartRatio) -> f64 {
        self.closing_insert
            .map(|s| s.length() * ratio.max_sqrt_on(&s))
            .unwrap_or(0.0)
    }
}

/// `w_φ` (φ = dz²) of chart segments: the total horizontal displacement.
pub fn phi_width(segments: &[FlatSegment]) -> f64 {
    segments.iter().map(|s| (s.to - s.from).re.abs()).sum()
}

/// `w_ψ` of chart segments through the general width integrator.
pub fn psi_width(segments: &[FlatSegment], ratio: &ChartRatio, atol: f64) -> Result<f64> {
    let mut total = 0.0;
    for s in segments {
        if s.length() == 0.0 {
            continue;
        }
        let seg = [Segment::line(s.from, s.to)];
        total += width_along(&seg, |z| ratio.at(s.polygon, z), atol / segments.len() as f64)?.value;
    }
    Ok(total)
}

/// Minimum over the segments of `|Re(dz)|/|dz|` (transversality to the vertical foliation of `dz²`).
pub fn phi_margin(segments: &[FlatSegment]) -> f64 {
    segments
        .iter()
        .filter(|s| s.length() > 0.0)
        .map(|s| (s.to - s.from).re.abs() / s.length())
        .fold(f64::INFINITY, f64::min)
}

/// Closes a trajectory whose end lies within `eps` of its start in the same chart.
pub fn close_up(traj: &FlatTrajectory, eps: f64, angle_bound: f64) -> Result<FlatCurve> {
    if traj.end.polygon != traj.start.polygon {
        return Err(Error::NotCloseEnough {
            distance: f64::INFINITY,
            eps,
        });
    }
    let gap = traj.start.z - traj.end.z;
    let distance = gap.norm();
    if distance > eps {
        return Err(Error::NotCloseEnough { distance, eps });
    }
    if distance < 1e-10 {
        return Ok(FlatCurve {
            segments: traj.segments.clone(),
            closing_insert: None,
            eps,
        });
    }
    // angle to the horizontal, modulo π
    let angle = gap.arg().abs().min(PI - gap.arg().abs());
    if angle > angle_bound {
        return Err(Error::InsertTooSteep {
            angle,
            bound: angle_bound,
        });
    }
    Ok(FlatCurve {
        segments: traj.segments.clone(),
        closing_insert: Some(FlatSegment {
            polygon: traj.start.polygon,
            from: traj.end.z,
            to: traj.start.z,
        }),
        eps,
    })
}

/// Search settings for [`find_wkb_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FindWkbParams {
    /// Largest rotation angle θ searched.
    pub theta0: f64,
    pub n_theta: usize,
    pub n_starts: usize,
    /// Minimal flow time before a close return counts.
    pub min_time: f64,
    pub max_time: f64,
    pub eps: f64,
    pub seed: u64,
    /// Times θ₀ is halved after a failed pass.
    pub retries: usize,
}

impl Default for FindWkbParams {
    fn default() -> Self {
        Self {
            theta0: 0.3,
            n_theta: 7,
            n_starts: 8,
            min_time: 1.0,
            max_time: 400.0,
            eps: 1e-2,
            seed: 1,
            retries: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkbCurve {
    pub curve: FlatCurve,
    pub theta: f64,
    pub start: FlatPoint,
    pub w_phi: f64,
    pub w_psi: f64,
    /// `w_φ − w_ψ`.
    pub margin: f64,
    /// Transversality margin of the curve for `φ` (min `|cos|` of segment angles).
    pub transversality: f64,
    /// Width quadrature tolerance used for the certificate.
    pub width_tol: f64,
}

fn sample_starts(surface: &HalfTranslationSurface, n: usize, seed: u64) -> Vec<FlatPoint> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let polygon = rng.gen_range(0..surface.polygons.len());
        let v = &surface.polygons[polygon];
        let (lo_x, hi_x) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, z| (a.0.min(z.re), a.1.max(z.re)));
        let (lo_y, hi_y) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, z| (a.0.min(z.im), a.1.max(z.im)));
        let p = FlatPoint {
            polygon,
            z: Complex64::new(rng.gen_range(lo_x..hi_x), rng.gen_range(lo_y..hi_y)),
        };
        if surface.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Flows horizontally for `e^{iθ}φ` from `start` until the trajectory crosses the
/// horizontal line through the start within `eps` (in the start chart) after
/// `min_time`; the closing insert is then exactly horizontal.
fn close_return(
    surface: &HalfTranslationSurface,
    start: FlatPoint,
    theta: f64,
    params: &FindWkbParams,
) -> Result<Option<FlatCurve>> {
    let traj = flow(surface, start, horizontal_direction(theta), params.max_time)?;
    let mut elapsed = 0.0;
    let mut chain = Vec::new();
    for seg in &traj.segments {
        let len = seg.length();
        if seg.polygon == start.polygon && elapsed + len >= params.min_time {
            let d = seg.to - seg.from;
            let hit = if d.im.abs() < 1e-14 * len {
                // horizontal segment on the start line: it closes if it passes the start
                let on_line = (seg.from.im - start.z.im).abs() < 1e-12;
                let s = (start.z.re - seg.from.re) / d.re;
                (on_line && (0.0..=1.0).contains(&s)).then_some(s)
            } else {
                let s = (start.z.im - seg.from.im) / d.im;
                (0.0..=1.0).contains(&s).then_some(s)
            };
            if let Some(s) = hit {
                let p = seg.from + d * s;
                if elapsed + len * s >= params.min_time && (p - start.z).norm() <= params.eps {
                    chain.push(FlatSegment {
                        polygon: seg.polygon,
                        from: seg.from,
                        to: p,
                    });
                    let closing = FlatTrajectory {
                        start,
                        direction: traj.direction,
                        time: elapsed + len * s,
                        segments: chain,
                        end: FlatPoint { polygon: start.polygon, z: p },
                        end_direction: traj.end_direction,
                    };
                    return close_up(&closing, params.eps, 1e-9).map(Some);
                }
            }
        }
        chain.push(*seg);
        elapsed += len;
    }
    Ok(None)
}

/// A closed curve transverse to the vertical foliation of `φ` with `w_ψ < w_φ`.
///
/// Cells `(θ index, start index)` are searched concurrently; the first certified
/// cell in that order wins, so the result does not depend on scheduling.
pub fn find_wkb_curve(surface: &HalfTranslationSurface, ratio: &ChartRatio, params: &FindWkbParams) -> Result<WkbCurve> {
    if ratio.is_identity() {
        return Err(Error::InvalidInput("ψ equals φ; no curve can separate their widths".into()));
    }
    let (n_phi, n_psi) = (surface.area(), ratio_norm(surface, ratio));
    if n_psi > n_phi * (1.0 + 1e-9) {
        return Err(Error::InvalidInput(format!("‖ψ‖ = {n_psi} exceeds ‖φ‖ = {n_phi}")));
    }
    if params.n_theta == 0 || params.n_starts == 0 {
        return Err(Error::InvalidInput("search grid is empty".into()));
    }
    let width_tol = 1e-11;
    let starts = sample_starts(surface, params.n_starts, params.seed);
    let mut theta0 = params.theta0;
    let mut best_margin = f64::NEG_INFINITY;
    for _ in 0..=params.retries {
        let cells: Vec<(f64, FlatPoint)> = (0..params.n_theta)
            .flat_map(|k| {
                let theta = if params.n_theta == 1 {
                    0.0
                } else {
                    theta0 * k as f64 / (params.n_theta - 1) as f64
                };
                starts.iter().map(move |s| (theta, *s))
            })
            .collect();
        let outcomes: Vec<Option<WkbCurve>> = cells
            .par_iter()
            .map(|&(theta, start)| {
                let curve = close_return(surface, start, theta, params).ok().flatten()?;
                let segs = curve.all_segments();
                let w_phi = phi_width(&segs);
                let w_psi = psi_width(&segs, ratio, width_tol).ok()?;
                Some(WkbCurve {
                    transversality: phi_margin(&segs),
                    curve,
                    theta,
                    start,
                    w_phi,
                    w_psi,
                    margin: w_phi - w_psi,
                    width_tol,
                })
            })
            .collect();
        for o in outcomes.iter().flatten() {
            best_margin = best_margin.max(o.margin);
        }
        if let Some(found) = outcomes
            .into_iter()
            .flatten()
            .find(|o| o.transversality > 1e-6 && o.margin > 10.0 * width_tol * o.w_phi.max(1.0))
        {
            return Ok(found);
        }
        theta0 *= 0.5;
    }
    Err(Error::SearchExhausted { best_margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn torus_and_octagon_topology() {
        let t = HalfTranslationSurface::unit_torus();
        assert_eq!(t.genus, 1);
        assert!(t.cone_points().is_empty());
        let o = HalfTranslationSurface::regular_octagon();
        assert_eq!(o.genus, 2);
        let cones = o.cone_points();
        assert_eq!(cones.len(), 1);
        assert!((cones[0].angle - 6.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn broken_pairing_rejected() {
        let r = |polygon, edge| EdgeRef { polygon, edge };
        let spec = SurfaceSpec {
            polygons: vec![vec![c(0., 0.), c(1., 0.), c(1., 1.2), c(0., 1.)]],
            pairings: vec![
                EdgePair {
                    a: r(0, 0),
                    b: r(0, 2),
                    gluing: Gluing::Translation,
                },
                EdgePair {
                    a: r(0, 1),
                    b: r(0, 3),
                    gluing: Gluing::Translation,
                },
            ],
            genus: None,
        };
        assert!(matches!(HalfTranslationSurface::new(&spec), Err(Error::MismatchedEdges(_))));
    }

    #[test]
    fn disconnected_rejected() {
        let r = |polygon, edge| EdgeRef { polygon, edge };
        let sq = vec![c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.)];
        let mut pairings = Vec::new();
        for p in 0..2 {
            pairings.push(EdgePair {
                a: r(p, 0),
                b: r(p, 2),
                gluing: Gluing::Translation,
            });
            pairings.push(EdgePair {
                a: r(p, 1),
                b: r(p, 3),
                gluing: Gluing::Translation,
            });
        }
        let spec = SurfaceSpec {
            polygons: vec![sq.clone(), sq],
            pairings,
            genus: None,
        };
        assert!(matches!(HalfTranslationSurface::new(&spec), Err(Error::Disconnected)));
    }

    #[test]
    fn pillowcase_by_flips() {
        // a unit square and its mirror image across the real axis: top and bottom
        // are glued by translations, the vertical sides by flips; a sphere with
        // four cone points of angle π
        let r = |polygon, edge| EdgeRef { polygon, edge };
        let sq = vec![c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.)];
        let mirror = vec![c(0., -1.), c(1., -1.), c(1., 0.), c(0., 0.)];
        let pair = |a, b, gluing| EdgePair {
            a: r(0, a),
            b: r(1, b),
            gluing,
        };
        let spec = SurfaceSpec {
            polygons: vec![sq, mirror],
            pairings: vec![
                pair(0, 2, Gluing::Translation),
                pair(2, 0, Gluing::Translation),
                pair(1, 1, Gluing::Flip),
                pair(3, 3, Gluing::Flip),
            ],
            genus: Some(0),
        };
        let s = HalfTranslationSurface::new(&spec).unwrap();
        assert_eq!(s.genus, 0);
        let cones = s.cone_points();
        assert_eq!(cones.len(), 4);
        assert!(cones.iter().all(|cp| (cp.angle - PI).abs() < 1e-12));
        // a flip reverses the direction; the flow is still reversible
        let start = FlatPoint { polygon: 0, z: c(0.3, 0.45) };
        let tr = flow(&s, start, 0.37, 30.0).unwrap();
        let back = reverse(&s, &tr).unwrap();
        assert!((back.end.z - start.z).norm() < 1e-10 && back.end.polygon == 0);
    }

    #[test]
    fn torus_horizontal_period() {
        let t = HalfTranslationSurface::unit_torus();
        let start = FlatPoint { polygon: 0, z: c(0.5, 0.5) };
        let tr = flow(&t, start, 0.0, 1.0).unwrap();
        assert!((tr.end.z - start.z).norm() < 1e-14);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let tr = flow(&t, start, g.atan(), 100.0).unwrap();
        assert!((tr.end.z - start.z).norm() > 1e-3);
    }

    #[test]
    fn octagon_reversibility() {
        let o = HalfTranslationSurface::regular_octagon();
        let start = FlatPoint { polygon: 0, z: c(0.1, -0.2) };
        let tr = flow(&o, start, 0.731, 50.0).unwrap();
        let back = reverse(&o, &tr).unwrap();
        assert_eq!(back.end.polygon, 0);
        assert!((back.end.z - start.z).norm() < 1e-10);
        let len: f64 = tr.segments.iter().map(|s| s.length()).sum();
        assert!((len - 50.0).abs() < 1e-10);
    }

    #[test]
    fn constant_birkhoff() {
        let o = HalfTranslationSurface::regular_octagon();
        let tr = flow(&o, FlatPoint { polygon: 0, z: c(0.0, 0.3) }, 0.2, 20.0).unwrap();
        assert!((birkhoff_average(&tr, &|_, _| 3.5) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn close_up_cases() {
        let t = HalfTranslationSurface::unit_torus();
        let start = FlatPoint { polygon: 0, z: c(0.3, 0.2) };
        let tr = flow(&t, start, 0.5f64.atan(), 5f64.sqrt()).unwrap();
        let closed = close_up(&tr, 1e-6, 0.1).unwrap();
        assert!(closed.closing_insert.is_none());
        let tr = flow(&t, start, 0.0, 1.02).unwrap();
        assert!(matches!(close_up(&tr, 0.01, 0.1), Err(Error::NotCloseEnough { .. })));
        let tr = flow(&t, start, 0.0, 1.005).unwrap();
        let closed = close_up(&tr, 0.01, 0.1).unwrap();
        assert!((closed.closing_insert.unwrap().length() - 0.005).abs() < 1e-12);
    }

    #[test]
    fn torus_rotated_pair() {
        let t = HalfTranslationSurface::unit_torus();
        let ratio = ChartRatio::Constant {
            value: Complex64::from_polar(1.0, PI / 3.0),
        };
        let found = find_wkb_curve(&t, &ratio, &FindWkbParams::default()).unwrap();
        assert!(found.margin > 0.0);
        assert!(found.theta.abs() < 1e-15);
        assert!((found.w_psi - (PI / 6.0).cos() * found.w_phi).abs() < 1e-9);
        assert!(matches!(
            find_wkb_curve(&t, &ChartRatio::Constant { value: c(1.0, 0.0) }, &FindWkbParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }
}
