//! The single-operation subcommands.

use crate::inputs::*;
use crate::output::{emit, json_file, note};
use crate::{Common, Failure, Format};
use clap::Args;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::PathBuf;
use wkblab_core::curve::{canonical_generators, HyperellipticCurve, PathOnCurve};
use wkblab_core::demo::sample_loops;
use wkblab_core::differentials::{det_map, qd_norm, qd_width, QuadTol, SlTwoSystem};
use wkblab_core::fiber::{regular_probe, solve_fiber, FiberReport};
use wkblab_core::flat::{find_wkb_curve as search_curve, ChartRatio, FindWkbParams, WkbCurve};
use wkblab_core::monodromy::{integrator_tol, representation, transfer_matrix, Representation, RenormalizedMatrix};
use wkblab_core::semiflat::{
    conic_scaling_check, curvature_samples, default_cycles, model_metric as metric_probe, spectral_periods,
    ConicReport, SpectralPeriodSet, StencilParams,
};
use wkblab_core::wkb::{growth_differential, growth_width, is_wkb_curve, linear_grid, sweep, WkbSweep};
use wkblab_core::Error;

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Branch points `RE,IM;RE,IM;...` (five or six); the demo curve if neither this nor --p-coeffs is given.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "p_coeffs")]
    branch_points: Option<ComplexList>,
    /// Ascending coefficients of p, `RE,IM;...`.
    #[arg(long, allow_hyphen_values = true)]
    p_coeffs: Option<ComplexList>,
    /// Leading coefficient used with --branch-points.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, default_value = "1,0")]
    lead: Complex64,
}

impl CurveArgs {
    pub fn spec(&self) -> CurveSpec {
        CurveSpec {
            branch_points: self.branch_points.clone().map(|l| l.0),
            p_coeffs: self.p_coeffs.clone().map(|l| l.0),
            lead: self.lead,
            ..CurveSpec::default()
        }
    }

    fn build(&self) -> Result<HyperellipticCurve, Failure> {
        self.spec().build()
    }
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn log_abs_char(m: &RenormalizedMatrix) -> Result<Option<f64>, Failure> {
    match m.log_char() {
        Ok(v) => Ok(Some(v)),
        Err(Error::VanishingTrace(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Args)]
pub struct MonodromyArgs {
    #[command(flatten)]
    curve: CurveArgs,
    /// `demo`, `zero`, `random` or six coefficients `a0;a1;b0;b1;g0;g1`.
    #[arg(long, default_value = "demo", allow_hyphen_values = true)]
    system: String,
    /// Values of t, `T1;T2;...`.
    #[arg(long, default_value = "1")]
    t: RealList,
    /// Extra loop to transport around (repeatable).
    #[arg(long = "loop")]
    loops: Vec<LoopSpec>,
}

#[derive(Debug, Serialize)]
pub struct MatrixRow {
    pub t: f64,
    pub loop_id: String,
    pub log_scale: f64,
    pub m00_re: f64,
    pub m00_im: f64,
    pub m01_re: f64,
    pub m01_im: f64,
    pub m10_re: f64,
    pub m10_im: f64,
    pub m11_re: f64,
    pub m11_im: f64,
    pub log_abs_char: Option<f64>,
    pub relation_defect: Option<f64>,
    pub extended: Option<bool>,
}

impl MatrixRow {
    pub fn new(t: f64, loop_id: &str, m: &RenormalizedMatrix) -> Result<Self, Failure> {
        let e = m.m.0;
        Ok(Self {
            t,
            loop_id: loop_id.into(),
            log_scale: m.log_scale,
            m00_re: e[0][0].re,
            m00_im: e[0][0].im,
            m01_re: e[0][1].re,
            m01_im: e[0][1].im,
            m10_re: e[1][0].re,
            m10_im: e[1][0].im,
            m11_re: e[1][1].re,
            m11_im: e[1][1].im,
            log_abs_char: log_abs_char(m)?,
            relation_defect: None,
            extended: None,
        })
    }
}

/// Generator rows followed by a `relation` row carrying the defect.
pub fn representation_rows(rep: &Representation) -> Result<Vec<MatrixRow>, Failure> {
    let mut rows = Vec::with_capacity(5);
    for (name, g) in GENERATOR_NAMES.iter().zip(&rep.gens) {
        rows.push(MatrixRow::new(rep.t, name, g)?);
    }
    let mut rel = MatrixRow::new(rep.t, "relation", &Representation::relation_matrix(&rep.gens))?;
    rel.relation_defect = Some(rep.defect);
    rel.extended = Some(rep.extended);
    rows.push(rel);
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct LoopMonodromy {
    id: String,
    t: f64,
    matrix: RenormalizedMatrix,
}

#[derive(Debug, Serialize)]
struct MonodromyReport {
    branch_points: Vec<Complex64>,
    system: SlTwoSystem,
    tol: f64,
    representations: Vec<Representation>,
    loops: Vec<LoopMonodromy>,
}

pub fn monodromy(c: &Common, a: &MonodromyArgs) -> Result<(), Failure> {
    let tol = c.tol_or(1e-8)?;
    let curve = a.curve.build()?;
    let system = SystemSpec::parse(&a.system, c.seed())?.build(&curve, c.seed())?;
    let gens = canonical_generators(&curve)?;
    let loops: Vec<(String, PathOnCurve)> = a
        .loops
        .iter()
        .map(|l| Ok((l.id(), l.build(&curve)?)))
        .collect::<Result<_, Failure>>()?;
    let mut rows = Vec::new();
    let mut report = MonodromyReport {
        branch_points: curve.branch_points().to_vec(),
        system,
        tol,
        representations: Vec::new(),
        loops: Vec::new(),
    };
    for &t in &a.t.0 {
        let rep = match representation(&curve, &system, t, &gens, tol) {
            Err(Error::RelationViolation { defect, tol }) => {
                return Err(Failure::Check(format!("relation defect {defect:e} above {tol:e} at t = {t}")))
            }
            r => r?,
        };
        rows.extend(representation_rows(&rep)?);
        report.representations.push(rep);
        for (id, lp) in &loops {
            let m = transfer_matrix(&curve, &system, t, lp, integrator_tol(tol))?;
            rows.push(MatrixRow::new(t, id, &m)?);
            report.loops.push(LoopMonodromy { id: id.clone(), t, matrix: m });
        }
    }
    emit(c.format, &rows, &report)
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub loop_id: String,
    pub log_abs_char: Option<f64>,
    pub defect: Option<f64>,
    pub est_error: f64,
}

pub fn sweep_rows(loop_id: &str, s: &WkbSweep) -> Vec<SweepRow> {
    (0..s.t_grid.len())
        .map(|i| SweepRow {
            t: s.t_grid[i],
            loop_id: loop_id.into(),
            log_abs_char: s.log_chars[i],
            defect: s.defects[i],
            est_error: s.est_errors[i],
        })
        .collect()
}

/// Fitted slope against the growth width `w_{−det A}` of one loop.
#[derive(Debug, Clone, Serialize)]
pub struct WkbVerdict {
    pub loop_id: String,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub fitted: usize,
    pub width: f64,
    pub width_error: f64,
    /// `|slope − width| / width`, or `|slope|` when the width vanishes.
    pub rel_error: f64,
    /// Whether the loop is certified transverse to the vertical foliation.
    pub is_wkb: bool,
    pub margin: f64,
    /// Equality within `slack` on a certified loop, otherwise `slope ≤ width·(1 + slack)`.
    pub pass: bool,
}

pub struct WkbSettings {
    pub tol: f64,
    pub width_tol: f64,
    pub slack: f64,
    pub margin_tol: f64,
}

pub fn wkb_verdict(
    curve: &HyperellipticCurve,
    a: &SlTwoSystem,
    loop_id: &str,
    lp: &PathOnCurve,
    grid: &[f64],
    s: &WkbSettings,
) -> Result<(WkbSweep, WkbVerdict), Failure> {
    let w = growth_width(curve, a, lp, s.width_tol)?;
    let (is_wkb, margin) = match is_wkb_curve(curve, &growth_differential(a), lp, s.margin_tol) {
        Ok(v) => v,
        Err(Error::ZeroOnPath(_)) => (false, 0.0),
        Err(e) => return Err(e.into()),
    };
    let sw = sweep(curve, a, lp, grid, s.tol)?;
    let rel_error = if w.value > 0.0 {
        (sw.slope - w.value).abs() / w.value
    } else {
        sw.slope.abs()
    };
    let pass = if is_wkb {
        rel_error <= s.slack
    } else {
        sw.slope <= w.value * (1.0 + s.slack) + s.slack * f64::from(w.value == 0.0)
    };
    let verdict = WkbVerdict {
        loop_id: loop_id.into(),
        slope: sw.slope,
        intercept: sw.intercept,
        residual: sw.residual,
        fitted: sw.fitted,
        width: w.value,
        width_error: w.error,
        rel_error,
        is_wkb,
        margin,
        pass,
    };
    Ok((sw, verdict))
}

#[derive(Debug, Args)]
pub struct WkbSweepArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[arg(long, default_value = "demo", allow_hyphen_values = true)]
    system: String,
    /// `demo`, `a1`..`b2`, `sample:K` or `circle:CX,CY,R`.
    #[arg(long = "loop", default_value = "demo")]
    lp: LoopSpec,
    #[arg(long, default_value_t = 10.0)]
    t_min: f64,
    #[arg(long, default_value_t = 40.0)]
    t_max: f64,
    #[arg(long, default_value_t = 13)]
    points: usize,
    /// Allowed relative excess of the slope over the width.
    #[arg(long, default_value_t = 0.02)]
    slack: f64,
    /// Transversality margin required to certify the loop.
    #[arg(long, default_value_t = 1e-2)]
    margin: f64,
    /// Write the verdict JSON here instead of stderr.
    #[arg(long)]
    verdict: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    sweep: &'a WkbSweep,
    verdict: &'a WkbVerdict,
}

pub fn wkb_sweep(c: &Common, a: &WkbSweepArgs) -> Result<(), Failure> {
    let tol = c.tol_or(1e-12)?;
    if a.points < 4 {
        return Err(Failure::Usage("--points must be at least 4".into()));
    }
    if !(a.t_max > a.t_min && a.t_min >= 0.0) {
        return Err(Failure::Usage("need 0 <= --t-min < --t-max".into()));
    }
    let settings = WkbSettings {
        tol,
        width_tol: tol,
        slack: positive("--slack", a.slack)?,
        margin_tol: a.margin,
    };
    let curve = a.curve.build()?;
    let system = SystemSpec::parse(&a.system, c.seed())?.build(&curve, c.seed())?;
    let lp = a.lp.build(&curve)?;
    let id = a.lp.id();
    let (sw, verdict) = wkb_verdict(&curve, &system, &id, &lp, &linear_grid(a.t_min, a.t_max, a.points), &settings)?;
    emit(c.format, &sweep_rows(&id, &sw), &SweepReport { sweep: &sw, verdict: &verdict })?;
    match (&a.verdict, c.format) {
        (Some(path), _) => json_file(path, &verdict)?,
        (None, Format::Csv) => note(&verdict),
        (None, Format::Json) => {}
    }
    if verdict.pass {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "slope {:.6} against width {:.6} (certified {})",
            verdict.slope, verdict.width, verdict.is_wkb
        )))
    }
}

#[derive(Debug, Args)]
pub struct WidthArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[arg(long, default_value = "demo", allow_hyphen_values = true)]
    system: String,
    /// Quadratic differential `q0;q1;q2`; overrides the one derived from --system.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<ComplexList>,
    /// Use det A instead of the growth differential −det A.
    #[arg(long)]
    literal_det: bool,
    /// Loops (repeatable); the ten sample loops by default.
    #[arg(long = "loop")]
    loops: Vec<LoopSpec>,
    /// Also report the L1 norm of the differential.
    #[arg(long)]
    norm: bool,
}

#[derive(Debug, Serialize)]
struct WidthRow {
    id: String,
    value: f64,
    est_error: f64,
}

pub fn width(c: &Common, a: &WidthArgs) -> Result<(), Failure> {
    let tol = c.tol_or(1e-10)?;
    let curve = a.curve.build()?;
    let phi = match &a.phi {
        Some(v) => quadratic(&v.0)?,
        None => {
            let system = SystemSpec::parse(&a.system, c.seed())?.build(&curve, c.seed())?;
            if a.literal_det {
                det_map(&system)
            } else {
                growth_differential(&system)
            }
        }
    };
    let loops: Vec<(String, PathOnCurve)> = if a.loops.is_empty() {
        sample_loops(&curve)?
            .into_iter()
            .enumerate()
            .map(|(k, l)| (format!("sample-{k}"), l))
            .collect()
    } else {
        a.loops
            .iter()
            .map(|l| Ok((l.id(), l.build(&curve)?)))
            .collect::<Result<_, Failure>>()?
    };
    let mut rows = Vec::with_capacity(loops.len() + 1);
    for (id, lp) in &loops {
        let w = qd_width(&curve, &phi, lp, tol)?;
        rows.push(WidthRow {
            id: id.clone(),
            value: w.value,
            est_error: w.error,
        });
    }
    if a.norm {
        let n = qd_norm(&curve, &phi, QuadTol::new(tol, tol))?;
        rows.push(WidthRow {
            id: "norm".into(),
            value: n.value.re,
            est_error: n.error,
        });
    }
    emit(c.format, &rows, &rows)
}

#[derive(Debug, Args)]
pub struct FindWkbArgs {
    /// `torus`, `octagon` or a surface document (TOML, or JSON by extension).
    #[arg(long, default_value = "torus")]
    surface: String,
    /// ψ/φ = e^{i·angle} on every chart.
    #[arg(long, default_value_t = PI / 3.0, allow_hyphen_values = true)]
    psi_angle: f64,
    /// Chart ratio document; overrides --psi-angle.
    #[arg(long)]
    ratio: Option<PathBuf>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    min_time: Option<f64>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    retries: Option<usize>,
}

impl FindWkbArgs {
    fn params(&self, seed: u64) -> FindWkbParams {
        let d = FindWkbParams::default();
        FindWkbParams {
            theta0: self.theta0.unwrap_or(d.theta0),
            n_theta: self.n_theta.unwrap_or(d.n_theta),
            n_starts: self.n_starts.unwrap_or(d.n_starts),
            min_time: self.min_time.unwrap_or(d.min_time),
            max_time: self.max_time.unwrap_or(d.max_time),
            eps: self.eps.unwrap_or(d.eps),
            seed,
            retries: self.retries.unwrap_or(d.retries),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FlatSegmentRow {
    pub index: usize,
    pub polygon: usize,
    pub from_re: f64,
    pub from_im: f64,
    pub to_re: f64,
    pub to_im: f64,
    pub closing_insert: bool,
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    theta: f64,
    w_phi: f64,
    w_psi: f64,
    margin: f64,
    transversality: f64,
}

pub fn curve_rows(found: &WkbCurve) -> Vec<FlatSegmentRow> {
    let n = found.curve.segments.len();
    found
        .curve
        .all_segments()
        .iter()
        .enumerate()
        .map(|(index, s)| FlatSegmentRow {
            index,
            polygon: s.polygon,
            from_re: s.from.re,
            from_im: s.from.im,
            to_re: s.to.re,
            to_im: s.to.im,
            closing_insert: index >= n,
        })
        .collect()
}

pub fn find_wkb_curve(c: &Common, a: &FindWkbArgs) -> Result<(), Failure> {
    let surface = SurfaceChoice::from_arg(&a.surface)?.build()?;
    let ratio: ChartRatio = match &a.ratio {
        Some(path) => read_document(path)?,
        None => ChartRatio::Constant {
            value: Complex64::from_polar(1.0, a.psi_angle),
        },
    };
    let found = match search_curve(&surface, &ratio, &a.params(c.seed())) {
        Err(Error::SearchExhausted { best_margin }) => {
            return Err(Failure::Check(format!("no certified curve, best margin {best_margin}")))
        }
        r => r?,
    };
    emit(c.format, &curve_rows(&found), &found)?;
    if c.format == Format::Csv {
        note(&CurveSummary {
            theta: found.theta,
            w_phi: found.w_phi,
            w_psi: found.w_psi,
            margin: found.margin,
            transversality: found.transversality,
        });
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct DetFiberArgs {
    /// Target `q0;q1;q2`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<ComplexList>,
    #[arg(long, default_value_t = 200)]
    starts: usize,
    /// Also probe regularity on a circle of this radius around the target.
    #[arg(long)]
    probe_radius: Option<f64>,
    #[arg(long, default_value_t = 8)]
    probes: usize,
}

#[derive(Debug, Serialize)]
pub struct FiberRow {
    pub index: usize,
    pub d1_re: f64,
    pub d1_im: f64,
    pub e_re: f64,
    pub e_im: f64,
    pub f_re: f64,
    pub f_im: f64,
    pub g_re: f64,
    pub g_im: f64,
    pub shift_re: f64,
    pub shift_im: f64,
    pub residual: f64,
    pub noether_rank: Option<usize>,
}

pub fn fiber_rows(r: &FiberReport) -> Vec<FiberRow> {
    r.solutions
        .iter()
        .enumerate()
        .map(|(index, s)| FiberRow {
            index,
            d1_re: s.d1.re,
            d1_im: s.d1.im,
            e_re: s.e.re,
            e_im: s.e.im,
            f_re: s.f.re,
            f_im: s.f.im,
            g_re: s.g.re,
            g_im: s.g.im,
            shift_re: s.shift.re,
            shift_im: s.shift.im,
            residual: r.residuals[index],
            noether_rank: r.noether_ranks.get(index).copied(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FiberSummary {
    degree_estimate: usize,
    converged: usize,
    starts_used: usize,
    min_jacobian: f64,
    ramification_suspect: bool,
    regular: Option<bool>,
}

#[derive(Debug, Serialize)]
struct FiberOutput<'a> {
    report: &'a FiberReport,
    regular: Option<bool>,
}

pub fn det_fiber(c: &Common, a: &DetFiberArgs) -> Result<(), Failure> {
    let tol = c.tol_or(1e-10)?;
    let phi = match &a.phi {
        Some(v) => quadratic(&v.0)?,
        None => demo_fiber_phi(),
    };
    if a.starts == 0 {
        return Err(Failure::Usage("--starts must be positive".into()));
    }
    let report = solve_fiber(&phi, a.starts, c.seed(), tol)?;
    let regular = match a.probe_radius {
        Some(r) => Some(regular_probe(&phi, positive("--probe-radius", r)?, a.probes, a.starts, c.seed())?),
        None => None,
    };
    emit(c.format, &fiber_rows(&report), &FiberOutput { report: &report, regular })?;
    if c.format == Format::Csv {
        note(&FiberSummary {
            degree_estimate: report.degree_estimate,
            converged: report.converged,
            starts_used: report.starts_used,
            min_jacobian: report.min_jacobian,
            ramification_suspect: report.ramification_suspect,
            regular,
        });
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    curve: CurveArgs,
    /// Quadratic differential `q0;q1;q2` with simple zeros off the branch points.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<ComplexList>,
    /// Largest number of capsule cycles.
    #[arg(long, default_value_t = 4)]
    cycles: usize,
    /// Dilation factors for the conic check, `T1;T2;...`.
    #[arg(long, default_value = "4;0.3")]
    t_list: RealList,
    /// Largest allowed conic-law error.
    #[arg(long, default_value_t = 1e-6)]
    conic_tol: f64,
}

#[derive(Debug, Serialize)]
struct PeriodRow {
    cycle: usize,
    period_re: f64,
    period_im: f64,
    est_error: f64,
}

#[derive(Debug, Serialize)]
struct SpectralOutput<'a> {
    periods: &'a SpectralPeriodSet,
    conic: &'a [ConicReport],
}

pub fn conic_error(r: &[ConicReport]) -> f64 {
    r.iter()
        .map(|r| r.form_error.max(r.derivative_error).max(r.radial_error))
        .fold(0.0, f64::max)
}

pub fn spectral(c: &Common, a: &SpectralArgs) -> Result<(), Failure> {
    let tol = c.tol_or(1e-13)?;
    let curve = a.curve.build()?;
    let phi = match &a.phi {
        Some(v) => quadratic(&v.0)?,
        None => demo_spectral_phi(),
    };
    let cycles = default_cycles(&curve, &phi, a.cycles)?;
    let set = spectral_periods(&curve, &phi, &cycles, tol)?;
    let conic = conic_scaling_check(&curve, &phi, &cycles, &a.t_list.0, tol)?;
    let rows: Vec<PeriodRow> = set
        .periods
        .iter()
        .zip(&set.errors)
        .enumerate()
        .map(|(cycle, (p, e))| PeriodRow {
            cycle,
            period_re: p.re,
            period_im: p.im,
            est_error: *e,
        })
        .collect();
    emit(c.format, &rows, &SpectralOutput { periods: &set, conic: &conic })?;
    if c.format == Format::Csv {
        note(&conic);
    }
    let err = conic_error(&conic);
    if err <= a.conic_tol {
        Ok(())
    } else {
        Err(Failure::Check(format!("conic law error {err:e} above {:e}", a.conic_tol)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    /// Directions in the first n coordinates.
    U,
    /// Directions in all 2n coordinates.
    All,
}

impl Support {
    pub fn coords(self, n: usize) -> Vec<usize> {
        match self {
            Support::U => (0..n).collect(),
            Support::All => (0..2 * n).collect(),
        }
    }

    /// Upper end of the curvature range.
    pub fn upper(self, n: usize) -> f64 {
        match self {
            Support::U => -1.0 / n as f64,
            Support::All => -1.0 / (2 * n) as f64,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelMetricArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Points are drawn with |Re ζ| below reach·π/2.
    #[arg(long, default_value_t = 0.8)]
    reach: f64,
    #[arg(long, value_enum, default_value = "u")]
    support: Support,
    #[arg(long)]
    inner: Option<f64>,
    #[arg(long)]
    outer: Option<f64>,
    /// Print the metric at this point `RE,IM;...` (2n coordinates) instead of sampling.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<ComplexList>,
}

#[derive(Debug, Serialize)]
pub struct CurvatureRow {
    pub sample: usize,
    pub curvature: f64,
}

#[derive(Debug, Serialize)]
struct MetricEntry {
    i: usize,
    j: usize,
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize)]
struct CurvatureSummary {
    n: usize,
    min: f64,
    max: f64,
    lower: f64,
    upper: f64,
    pass: bool,
}

pub fn model_metric(c: &Common, a: &ModelMetricArgs) -> Result<(), Failure> {
    let tol = c.tol_or(1e-3)?;
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    if let Some(p) = &a.point {
        let probe = metric_probe(a.n, &p.0)?;
        let mut rows = Vec::new();
        for (i, r) in probe.metric.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                rows.push(MetricEntry { i, j, re: v.re, im: v.im });
            }
        }
        return emit(c.format, &rows, &probe);
    }
    let d = StencilParams::default();
    let params = StencilParams {
        inner: positive("--inner", a.inner.unwrap_or(d.inner))?,
        outer: positive("--outer", a.outer.unwrap_or(d.outer))?,
    };
    let samples = curvature_samples(2 * a.n, &a.support.coords(a.n), a.samples, a.reach, c.seed(), params)?;
    let rows: Vec<CurvatureRow> = samples
        .iter()
        .enumerate()
        .map(|(sample, s)| CurvatureRow { sample, curvature: s.2 })
        .collect();
    let (min, max) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |m, r| (m.0.min(r.curvature), m.1.max(r.curvature)));
    let upper = a.support.upper(a.n);
    let summary = CurvatureSummary {
        n: a.n,
        min,
        max,
        lower: -1.0,
        upper,
        pass: rows.is_empty() || (min >= -1.0 - tol && max <= upper + tol),
    };
    emit(c.format, &rows, &samples)?;
    if c.format == Format::Csv {
        note(&summary);
    }
    if summary.pass {
        Ok(())
    } else {
        Err(Failure::Check(format!("curvatures in [{min}, {max}] outside [-1, {upper}]")))
    }
}
