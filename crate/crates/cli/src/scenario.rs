//! `wkblab run`: a scenario document lists the inputs and the checks to run;
//! the results go to `summary.json` plus one CSV per sweep.

use crate::commands::{
    conic_error, curve_rows, fiber_rows, representation_rows, sweep_rows, wkb_verdict, Support, WkbSettings,
};
use crate::inputs::*;
use crate::output::{csv_file, json_file};
use crate::{Common, Failure};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;
use wkblab_core::curve::{canonical_generators, HyperellipticCurve, PathOnCurve};
use wkblab_core::differentials::SlTwoSystem;
use wkblab_core::fiber::{regular_probe, solve_fiber};
use wkblab_core::flat::{find_wkb_curve, ChartRatio, FindWkbParams};
use wkblab_core::monodromy::representation;
use wkblab_core::semiflat::{
    conic_scaling_check, curvature_samples, default_cycles, scaling_action_sweep, spectral_periods, StencilParams,
};
use wkblab_core::wkb::linear_grid;
use wkblab_core::Error;

pub const SCHEMA: &str = "wkblab.summary";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedLoop {
    pub id: String,
    pub path: LoopSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberTarget {
    pub id: String,
    /// `[q0, q1, q2]`, each `[re, im]`.
    pub phi: [Complex64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    Points(Vec<f64>),
    Linear { min: f64, max: f64, points: usize },
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid::Linear {
            min: 10.0,
            max: 40.0,
            points: 13,
        }
    }
}

impl TGrid {
    fn values(&self) -> Vec<f64> {
        match self {
            TGrid::Points(v) => v.clone(),
            TGrid::Linear { min, max, points } => linear_grid(*min, *max, *points),
        }
    }

    fn validate(&self) -> Result<(), String> {
        let v = self.values();
        if v.len() < 4 {
            return Err("t_grid needs at least four points".into());
        }
        if v.first().is_some_and(|t| !(*t >= 0.0)) || v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("t_grid must be nonnegative and strictly increasing".into());
        }
        Ok(())
    }
}

macro_rules! tolerances {
    ($($(#[$doc:meta])* $name:ident = $default:expr;)*) => {
        /// Every tolerance of a run; all are written into the summary.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Tolerances {
            $($(#[$doc])* pub $name: f64,)*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Self { $($name: $default,)* }
            }
        }

        impl Tolerances {
            fn validate(&self) -> Result<(), String> {
                $(if !(self.$name > 0.0 && self.$name.is_finite()) {
                    return Err(format!("tolerance {} must be positive, got {}", stringify!($name), self.$name));
                })*
                Ok(())
            }
        }
    };
}

tolerances! {
    /// Relation-word defect of the monodromy representation.
    relation = 1e-8;
    /// Integrator tolerance for the t-sweeps.
    integrator = 1e-12;
    /// Width quadrature.
    width = 1e-12;
    /// Relative slope slack for the WKB checks.
    slack = 0.02;
    /// Transversality margin that certifies a WKB loop.
    wkb_margin = 1e-2;
    /// Residual for fiber solutions.
    fiber = 1e-10;
    /// Radius of the regularity probe around a fiber target.
    probe_radius = 1e-2;
    /// Period quadrature.
    spectral = 1e-13;
    /// √t scaling of the spectral periods.
    period_scaling = 1e-10;
    /// Conic law of the period form.
    conic = 1e-6;
    /// Scaling action identity on random metrics.
    scaling_action = 1e-12;
    /// Slack on the curvature range of the model metric.
    curvature = 1e-3;
}

fn default_cycles_count() -> usize {
    4
}

fn default_t_list() -> Vec<f64> {
    vec![4.0, 0.3]
}

fn default_starts() -> usize {
    200
}

fn default_true() -> bool {
    true
}

fn default_psi_angle() -> f64 {
    PI / 3.0
}

fn default_dims() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

fn default_ts() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 7.0]
}

fn default_count() -> usize {
    20
}

fn default_samples() -> usize {
    100
}

fn default_reach() -> f64 {
    0.8
}

fn default_support() -> Support {
    Support::U
}

fn default_monodromy_t() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckKind {
    /// Relation defect of the generator monodromy at each t.
    Monodromy {
        #[serde(default = "default_monodromy_t")]
        t: Vec<f64>,
    },
    /// Certified loop, slope within `slack` of the width, and the error shrinks
    /// when `t_max` doubles.
    WkbEquality {
        #[serde(rename = "loop")]
        lp: String,
    },
    /// `slope ≤ width·(1 + slack)` on each loop (all scenario loops if empty).
    WkbBound {
        #[serde(default)]
        loops: Vec<String>,
    },
    /// Fiber over a target: solutions found, degree stable under doubling the
    /// starts and changing the seed, and (optionally) the regularity probe.
    Fiber {
        target: String,
        #[serde(default = "default_starts")]
        starts: usize,
        #[serde(default = "default_true")]
        probe: bool,
    },
    /// Certified curve on the scenario surface for `ψ/φ = e^{i·psi_angle}`.
    Flat {
        #[serde(default = "default_psi_angle")]
        psi_angle: f64,
    },
    /// √t scaling of spectral periods and the conic law of the period form.
    Spectral {
        #[serde(default)]
        phi: Option<[Complex64; 3]>,
        #[serde(default = "default_cycles_count")]
        cycles: usize,
        #[serde(default = "default_t_list")]
        t_list: Vec<f64>,
    },
    ScalingAction {
        #[serde(default = "default_dims")]
        dims: Vec<usize>,
        #[serde(default = "default_ts")]
        ts: Vec<f64>,
        #[serde(default = "default_count")]
        count: usize,
    },
    /// Holomorphic sectional curvatures within `[−1, upper]`.
    ModelMetric {
        n: usize,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_reach")]
        reach: f64,
        #[serde(default = "default_support")]
        support: Support,
    },
}

impl CheckKind {
    fn name(&self) -> &'static str {
        match self {
            CheckKind::Monodromy { .. } => "monodromy",
            CheckKind::WkbEquality { .. } => "wkb-equality",
            CheckKind::WkbBound { .. } => "wkb-bound",
            CheckKind::Fiber { .. } => "fiber",
            CheckKind::Flat { .. } => "flat",
            CheckKind::Spectral { .. } => "spectral",
            CheckKind::ScalingAction { .. } => "scaling-action",
            CheckKind::ModelMetric { .. } => "model-metric",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    #[serde(flatten)]
    pub kind: CheckKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub curve: CurveSpec,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub loops: Vec<NamedLoop>,
    #[serde(default)]
    pub t_grid: TGrid,
    #[serde(default)]
    pub surface: SurfaceChoice,
    #[serde(default)]
    pub fiber_targets: Vec<FiberTarget>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: Vec<Check>,
}

fn unique<'a>(what: &str, ids: impl Iterator<Item = &'a String>) -> Result<HashSet<&'a str>, String> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(format!("duplicate {what} id {id:?}"));
        }
    }
    Ok(seen)
}

impl Scenario {
    pub fn validate(&self) -> Result<(), String> {
        self.tolerances.validate()?;
        self.t_grid.validate()?;
        let loops = unique("loop", self.loops.iter().map(|l| &l.id))?;
        let targets = unique("fiber target", self.fiber_targets.iter().map(|t| &t.id))?;
        unique("check", self.checks.iter().map(|c| &c.id))?;
        for c in &self.checks {
            let missing = |what: &str, id: &str| format!("check {:?} refers to unknown {what} {id:?}", c.id);
            match &c.kind {
                CheckKind::WkbEquality { lp } if !loops.contains(lp.as_str()) => return Err(missing("loop", lp)),
                CheckKind::WkbBound { loops: ls } => {
                    if let Some(l) = ls.iter().find(|l| !loops.contains(l.as_str())) {
                        return Err(missing("loop", l));
                    }
                    if self.loops.is_empty() {
                        return Err(format!("check {:?} needs at least one loop", c.id));
                    }
                }
                CheckKind::Fiber { target, starts, .. } => {
                    if !targets.contains(target.as_str()) {
                        return Err(missing("fiber target", target));
                    }
                    if *starts == 0 {
                        return Err(format!("check {:?}: starts must be positive", c.id));
                    }
                }
                CheckKind::ModelMetric { n, .. } if *n == 0 => {
                    return Err(format!("check {:?}: n must be at least 1", c.id));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub id: String,
    pub kind: String,
    pub pass: bool,
    /// The quantity compared against its tolerance, when there is one.
    pub max_error: Option<f64>,
    pub detail: String,
    /// Set when the check could not be carried out.
    pub error: Option<String>,
    /// Data files written for this check, relative to the output directory.
    pub files: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub schema: &'static str,
    pub schema_version: u32,
    pub scenario: Option<&'a str>,
    pub seed: u64,
    pub tolerances: &'a Tolerances,
    pub checks: Vec<CheckRecord>,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
}

struct Outcome {
    pass: bool,
    max_error: Option<f64>,
    detail: String,
    files: Vec<String>,
}

fn outcome(pass: bool, max_error: Option<f64>, detail: String) -> Outcome {
    Outcome {
        pass,
        max_error,
        detail,
        files: Vec::new(),
    }
}

/// Lazily built curve, system and loops shared by the checks.
struct Context<'a> {
    scenario: &'a Scenario,
    out_dir: &'a Path,
    built: Option<(HyperellipticCurve, SlTwoSystem, Vec<(String, PathOnCurve)>)>,
}

impl Context<'_> {
    fn inputs(&mut self) -> Result<&(HyperellipticCurve, SlTwoSystem, Vec<(String, PathOnCurve)>), Failure> {
        if self.built.is_none() {
            let s = self.scenario;
            let curve = s.curve.build()?;
            let system = s.system.build(&curve, s.seed)?;
            let loops = s
                .loops
                .iter()
                .map(|l| Ok((l.id.clone(), l.path.build(&curve)?)))
                .collect::<Result<Vec<_>, Failure>>()?;
            self.built = Some((curve, system, loops));
        }
        Ok(self.built.as_ref().unwrap())
    }

    fn settings(&self) -> WkbSettings {
        let t = &self.scenario.tolerances;
        WkbSettings {
            tol: t.integrator,
            width_tol: t.width,
            slack: t.slack,
            margin_tol: t.wkb_margin,
        }
    }

    fn run(&mut self, check: &Check) -> Result<Outcome, Failure> {
        let tol = self.scenario.tolerances.clone();
        let seed = self.scenario.seed;
        match &check.kind {
            CheckKind::Monodromy { t } => {
                let out_dir = self.out_dir;
                let (curve, system, _) = self.inputs()?;
                let gens = canonical_generators(curve)?;
                let mut worst = 0.0f64;
                let mut rows = Vec::new();
                for &ti in t {
                    match representation(curve, system, ti, &gens, tol.relation) {
                        Ok(rep) => {
                            worst = worst.max(rep.defect);
                            rows.extend(representation_rows(&rep)?);
                        }
                        Err(Error::RelationViolation { defect, .. }) => {
                            return Ok(outcome(false, Some(defect), format!("relation defect {defect:.3e} at t = {ti}")));
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                let file = format!("{}.csv", check.id);
                csv_file(&out_dir.join(&file), &rows)?;
                let mut o = outcome(
                    worst <= tol.relation,
                    Some(worst),
                    format!("max relation defect {worst:.3e} over {} values of t", t.len()),
                );
                o.files.push(file);
                Ok(o)
            }
            CheckKind::WkbEquality { lp } => {
                let settings = self.settings();
                let grid = self.scenario.t_grid.values();
                let (t_min, t_max) = (grid[0], *grid.last().unwrap());
                let out_dir = self.out_dir;
                let (curve, system, loops) = self.inputs()?;
                let path = &loops.iter().find(|(id, _)| id == lp).unwrap().1;
                let (s1, v1) = wkb_verdict(curve, system, lp, path, &grid, &settings)?;
                let doubled = linear_grid(t_min, 2.0 * t_max, grid.len());
                let (s2, v2) = wkb_verdict(curve, system, lp, path, &doubled, &settings)?;
                let mut rows = sweep_rows(lp, &s1);
                rows.extend(sweep_rows(lp, &s2));
                let file = format!("{}.csv", check.id);
                csv_file(&out_dir.join(&file), &rows)?;
                let pass = v1.is_wkb && v1.rel_error <= tol.slack && v2.rel_error < v1.rel_error;
                let mut o = outcome(
                    pass,
                    Some(v1.rel_error),
                    format!(
                        "certified {} (margin {:.4}), width {:.6}, rel. error {:.3e} at t_max {t_max}, {:.3e} at t_max {}",
                        v1.is_wkb,
                        v1.margin,
                        v1.width,
                        v1.rel_error,
                        v2.rel_error,
                        2.0 * t_max
                    ),
                );
                o.files.push(file);
                Ok(o)
            }
            CheckKind::WkbBound { loops: wanted } => {
                let settings = self.settings();
                let grid = self.scenario.t_grid.values();
                let out_dir = self.out_dir;
                let (curve, system, loops) = self.inputs()?;
                let mut rows = Vec::new();
                let (mut pass, mut worst, mut count) = (true, f64::NEG_INFINITY, 0);
                for (id, path) in loops.iter().filter(|(id, _)| wanted.is_empty() || wanted.contains(id)) {
                    let (sw, v) = wkb_verdict(curve, system, id, path, &grid, &settings)?;
                    let excess = if v.width > 0.0 { v.slope / v.width - 1.0 } else { v.slope };
                    pass &= v.slope <= v.width * (1.0 + settings.slack) + settings.slack * f64::from(v.width == 0.0);
                    worst = worst.max(excess);
                    count += 1;
                    rows.extend(sweep_rows(id, &sw));
                }
                let file = format!("{}.csv", check.id);
                csv_file(&out_dir.join(&file), &rows)?;
                let mut o = outcome(pass, Some(worst), format!("{count} loops, max slope/width - 1 = {worst:+.3e}"));
                o.files.push(file);
                Ok(o)
            }
            CheckKind::Fiber { target, starts, probe } => {
                let t = self.scenario.fiber_targets.iter().find(|t| &t.id == target).unwrap();
                let phi = quadratic(&t.phi)?;
                let r1 = solve_fiber(&phi, *starts, seed, tol.fiber)?;
                let r2 = solve_fiber(&phi, 2 * starts, seed, tol.fiber)?;
                let r3 = solve_fiber(&phi, *starts, seed.wrapping_add(1), tol.fiber)?;
                let regular = if *probe {
                    Some(regular_probe(&phi, tol.probe_radius, 8, *starts, seed)?)
                } else {
                    None
                };
                let residual = r1.residuals.iter().cloned().fold(0.0, f64::max);
                let stable = r1.degree_estimate == r2.degree_estimate && r1.degree_estimate == r3.degree_estimate;
                let file = format!("{}.csv", check.id);
                csv_file(&self.out_dir.join(&file), &fiber_rows(&r1))?;
                let mut o = outcome(
                    !r1.solutions.is_empty() && stable && regular != Some(false),
                    Some(residual),
                    format!(
                        "degree {}/{}/{} ({starts}, {} starts, next seed), {} converged, regular {:?}, ramification suspect {}",
                        r1.degree_estimate,
                        r2.degree_estimate,
                        r3.degree_estimate,
                        2 * starts,
                        r1.converged,
                        regular,
                        r1.ramification_suspect
                    ),
                );
                o.files.push(file);
                Ok(o)
            }
            CheckKind::Flat { psi_angle } => {
                let surface = self.scenario.surface.build()?;
                let ratio = ChartRatio::Constant {
                    value: Complex64::from_polar(1.0, *psi_angle),
                };
                let params = FindWkbParams {
                    seed,
                    ..FindWkbParams::default()
                };
                match find_wkb_curve(&surface, &ratio, &params) {
                    Ok(found) => {
                        let file = format!("{}.csv", check.id);
                        csv_file(&self.out_dir.join(&file), &curve_rows(&found))?;
                        let mut o = outcome(
                            found.margin > 0.0 && found.transversality > 0.0,
                            None,
                            format!(
                                "theta {:.4}, w_phi {:.6}, w_psi {:.6}, margin {:.4}, transversality {:.4}",
                                found.theta, found.w_phi, found.w_psi, found.margin, found.transversality
                            ),
                        );
                        o.files.push(file);
                        Ok(o)
                    }
                    Err(Error::SearchExhausted { best_margin }) => {
                        Ok(outcome(false, None, format!("no certified curve, best margin {best_margin}")))
                    }
                    Err(e) => Err(e.into()),
                }
            }
            CheckKind::Spectral { phi, cycles, t_list } => {
                let (curve, _, _) = self.inputs()?;
                let phi = match phi {
                    Some(v) => quadratic(v)?,
                    None => demo_spectral_phi(),
                };
                let cyc = default_cycles(curve, &phi, *cycles)?;
                let base = spectral_periods(curve, &phi, &cyc, tol.spectral)?;
                let scaled = spectral_periods(curve, &phi.scale(Complex64::new(9.0, 0.0)), &cyc, tol.spectral)?;
                let sqrt_err = base
                    .periods
                    .iter()
                    .zip(&scaled.periods)
                    .map(|(a, b)| (b - a * 3.0).norm() / (1.0 + a.norm()))
                    .fold(0.0, f64::max);
                let conic = conic_error(&conic_scaling_check(curve, &phi, &cyc, t_list, tol.spectral)?);
                Ok(outcome(
                    sqrt_err <= tol.period_scaling && conic <= tol.conic,
                    Some(conic.max(sqrt_err)),
                    format!("{} cycles, sqrt(t) scaling {sqrt_err:.2e}, conic law {conic:.2e}", cyc.len()),
                ))
            }
            CheckKind::ScalingAction { dims, ts, count } => {
                let worst = scaling_action_sweep(dims, ts, *count, seed)?;
                Ok(outcome(
                    worst <= tol.scaling_action,
                    Some(worst),
                    format!("max deviation {worst:.2e} over {count} metrics per (n, t)"),
                ))
            }
            CheckKind::ModelMetric {
                n,
                samples,
                reach,
                support,
            } => {
                let ks: Vec<f64> =
                    curvature_samples(2 * n, &support.coords(*n), *samples, *reach, seed, StencilParams::default())?
                        .iter()
                        .map(|s| s.2)
                        .collect();
                let (lo, hi) = ks
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |m, k| (m.0.min(*k), m.1.max(*k)));
                let upper = support.upper(*n);
                let excess = if ks.is_empty() { 0.0 } else { (-1.0 - lo).max(hi - upper) };
                Ok(outcome(
                    excess <= tol.curvature,
                    Some(excess.max(0.0)),
                    format!("{} samples in [{lo:.4}, {hi:.4}], allowed [-1, {upper:.4}]", ks.len()),
                ))
            }
        }
    }
}

pub fn run(c: &Common, path: &Path, out_dir: &Path) -> Result<(), Failure> {
    let mut scenario: Scenario = read_document(path)?;
    if let Some(t) = c.tol {
        return Err(Failure::Usage(format!(
            "--tol {t} is not used by run; set tolerances in the scenario"
        )));
    }
    if let Some(seed) = c.seed {
        scenario.seed = seed;
    }
    scenario.validate().map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut ctx = Context {
        scenario: &scenario,
        out_dir,
        built: None,
    };
    let mut records = Vec::with_capacity(scenario.checks.len());
    for check in &scenario.checks {
        let rec = match ctx.run(check) {
            Ok(o) => CheckRecord {
                id: check.id.clone(),
                kind: check.kind.name().into(),
                pass: o.pass,
                max_error: o.max_error,
                detail: o.detail,
                error: None,
                files: o.files,
            },
            Err(Failure::Usage(m)) => return Err(Failure::Usage(format!("check {:?}: {m}", check.id))),
            Err(f) => CheckRecord {
                id: check.id.clone(),
                kind: check.kind.name().into(),
                pass: false,
                max_error: None,
                detail: String::new(),
                error: Some(f.to_string()),
                files: Vec::new(),
            },
        };
        eprintln!("{} {} ({}) {}", if rec.pass { "PASS" } else { "FAIL" }, rec.id, rec.kind, rec.error.as_deref().unwrap_or(&rec.detail));
        records.push(rec);
    }
    let passed = records.iter().filter(|r| r.pass).count();
    let failed = records.len() - passed;
    let summary = Summary {
        schema: SCHEMA,
        schema_version: SCHEMA_VERSION,
        scenario: scenario.name.as_deref(),
        seed: scenario.seed,
        tolerances: &scenario.tolerances,
        checks: records,
        passed,
        failed,
        pass: failed == 0,
    };
    json_file(&out_dir.join("summary.json"), &summary)?;
    if failed == 0 {
        Ok(())
    } else {
        let ids: Vec<&str> = summary.checks.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
        Err(Failure::Check(format!("{failed} of {} checks failed: {}", summary.checks.len(), ids.join(", "))))
    }
}
