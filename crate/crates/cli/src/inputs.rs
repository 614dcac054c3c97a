//! Curves, systems, loops and differentials as given on the command line or in
//! a scenario file. Complex numbers are `RE,IM` on the command line and
//! `[re, im]` in scenario files.

use crate::Failure;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;
use wkblab_core::curve::{canonical_generators, HyperellipticCurve, PathOnCurve, Sheet};
use wkblab_core::demo;
use wkblab_core::differentials::{AbelianDifferential, QuadraticDifferential, SlTwoSystem};
use wkblab_core::flat::{HalfTranslationSurface, SurfaceSpec};

pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("not a number: {p:?}"));
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [re] => Ok(Complex64::new(num(re)?, 0.0)),
        [re, im] => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected RE or RE,IM, got {s:?}")),
    }
}

/// Semicolon-separated complex numbers, e.g. `-1,0;0,1;1,0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexList(pub Vec<Complex64>);

impl FromStr for ComplexList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(parse_complex)
            .collect::<Result<Vec<_>, _>>()
            .map(ComplexList)
    }
}

/// Semicolon-separated reals, e.g. `0.5;1;2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealList(pub Vec<f64>);

impl FromStr for RealList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: {p:?}")))
            .collect::<Result<Vec<_>, _>>()
            .map(RealList)
    }
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn curve_tol() -> f64 {
    1e-9
}

/// Either branch points (with a leading coefficient) or ascending coefficients of
/// `p`; neither means the built-in demo curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    #[serde(default)]
    pub branch_points: Option<Vec<Complex64>>,
    #[serde(default)]
    pub p_coeffs: Option<Vec<Complex64>>,
    #[serde(default = "one")]
    pub lead: Complex64,
    #[serde(default = "curve_tol")]
    pub tol: f64,
}

impl Default for CurveSpec {
    fn default() -> Self {
        Self {
            branch_points: None,
            p_coeffs: None,
            lead: one(),
            tol: curve_tol(),
        }
    }
}

impl CurveSpec {
    pub fn build(&self) -> Result<HyperellipticCurve, Failure> {
        match (&self.branch_points, &self.p_coeffs) {
            (Some(_), Some(_)) => Err(Failure::Usage("give either branch points or p coefficients, not both".into())),
            (Some(b), None) => Ok(HyperellipticCurve::from_branch_points(self.lead, b, self.tol)?),
            (None, Some(p)) => Ok(HyperellipticCurve::new(p, self.tol)?),
            (None, None) => Ok(demo::wkb_experiment()?.curve),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    /// The system of the built-in WKB experiment.
    #[default]
    Demo,
    Zero,
    /// Random entries rescaled to `‖det A‖ = 1` on the curve; the seed defaults
    /// to the global one.
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
    Explicit {
        alpha: [Complex64; 2],
        beta: [Complex64; 2],
        gamma: [Complex64; 2],
    },
}

impl SystemSpec {
    /// `demo`, `zero`, `random` (seeded by `--seed`) or six numbers `a0;a1;b0;b1;g0;g1`.
    pub fn parse(s: &str, seed: u64) -> Result<Self, Failure> {
        match s {
            "demo" => Ok(SystemSpec::Demo),
            "zero" => Ok(SystemSpec::Zero),
            "random" => Ok(SystemSpec::Random { seed: Some(seed) }),
            list => {
                let v = ComplexList::from_str(list).map_err(Failure::Usage)?.0;
                if v.len() != 6 {
                    return Err(Failure::Usage(format!("a system needs six coefficients, got {}", v.len())));
                }
                Ok(SystemSpec::Explicit {
                    alpha: [v[0], v[1]],
                    beta: [v[2], v[3]],
                    gamma: [v[4], v[5]],
                })
            }
        }
    }

    pub fn build(&self, curve: &HyperellipticCurve, default_seed: u64) -> Result<SlTwoSystem, Failure> {
        Ok(match self {
            SystemSpec::Demo => demo::wkb_experiment()?.system,
            SystemSpec::Zero => SlTwoSystem::zero(),
            SystemSpec::Random { seed } => {
                demo::random_system(curve, &mut ChaCha8Rng::seed_from_u64(seed.unwrap_or(default_seed)))?
            }
            SystemSpec::Explicit { alpha, beta, gamma } => SlTwoSystem::new(
                AbelianDifferential::new(alpha[0], alpha[1]),
                AbelianDifferential::new(beta[0], beta[1]),
                AbelianDifferential::new(gamma[0], gamma[1]),
            ),
        })
    }
}

fn plus() -> Sheet {
    Sheet::Plus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoopSpec {
    /// The circle of radius 0.6 about the origin used by the WKB experiment.
    Demo,
    /// `a1, b1, a2, b2` for index 0..4.
    Generator { index: usize },
    /// One of the ten products of generators in `demo::sample_loops`.
    Sample { index: usize },
    Circle {
        center: Complex64,
        radius: f64,
        #[serde(default = "plus")]
        sheet: Sheet,
    },
}

pub const GENERATOR_NAMES: [&str; 4] = ["a1", "b1", "a2", "b2"];

impl FromStr for LoopSpec {
    type Err = String;

    /// `demo`, `a1`..`b2`, `sample:K` or `circle:CX,CY,R`.
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "demo" {
            return Ok(LoopSpec::Demo);
        }
        if let Some(i) = GENERATOR_NAMES.iter().position(|n| *n == s) {
            return Ok(LoopSpec::Generator { index: i });
        }
        if let Some(k) = s.strip_prefix("sample:") {
            let index = k.parse().map_err(|_| format!("bad sample index {k:?}"))?;
            return Ok(LoopSpec::Sample { index });
        }
        if let Some(rest) = s.strip_prefix("circle:") {
            let v: Vec<f64> = rest
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: {p:?}")))
                .collect::<Result<_, _>>()?;
            if v.len() != 3 {
                return Err("circle needs CX,CY,R".into());
            }
            return Ok(LoopSpec::Circle {
                center: Complex64::new(v[0], v[1]),
                radius: v[2],
                sheet: Sheet::Plus,
            });
        }
        Err(format!("unknown loop {s:?}; expected demo, a1, b1, a2, b2, sample:K or circle:CX,CY,R"))
    }
}

impl LoopSpec {
    pub fn id(&self) -> String {
        match self {
            LoopSpec::Demo => "demo".into(),
            LoopSpec::Generator { index } => GENERATOR_NAMES.get(*index).copied().unwrap_or("generator").into(),
            LoopSpec::Sample { index } => format!("sample-{index}"),
            LoopSpec::Circle { .. } => "circle".into(),
        }
    }

    pub fn build(&self, curve: &HyperellipticCurve) -> Result<PathOnCurve, Failure> {
        match self {
            LoopSpec::Demo => Ok(demo::wkb_experiment()?.lp),
            LoopSpec::Generator { index } => {
                let g = canonical_generators(curve)?;
                g.loops
                    .get(*index)
                    .cloned()
                    .ok_or_else(|| Failure::Usage(format!("generator index {index} out of range 0..4")))
            }
            LoopSpec::Sample { index } => demo::sample_loops(curve)?
                .get(*index)
                .cloned()
                .ok_or_else(|| Failure::Usage(format!("sample loop index {index} out of range 0..10"))),
            LoopSpec::Circle { center, radius, sheet } => Ok(PathOnCurve::circle(*center, *radius, 0.0, *sheet)),
        }
    }
}

pub fn quadratic(v: &[Complex64]) -> Result<QuadraticDifferential, Failure> {
    match v {
        [q0, q1, q2] => Ok(QuadraticDifferential::new(*q0, *q1, *q2)),
        _ => Err(Failure::Usage(format!("a quadratic differential needs three coefficients, got {}", v.len()))),
    }
}

/// `(x − 1.5 − 0.2i)(x − 1.9 + 0.3i)`: two simple zeros away from the demo branch points.
pub fn demo_spectral_phi() -> QuadraticDifferential {
    let (z1, z2) = (Complex64::new(1.5, 0.2), Complex64::new(1.9, -0.3));
    QuadraticDifferential::new(z1 * z2, -(z1 + z2), one())
}

/// A generic target for the fiber solver.
pub fn demo_fiber_phi() -> QuadraticDifferential {
    QuadraticDifferential::new(Complex64::new(0.8, -0.3), Complex64::new(-0.4, 0.6), Complex64::new(0.5, 0.25))
}

/// Reads a TOML document, or JSON when the file name ends in `.json`.
pub fn read_document<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceChoice {
    #[default]
    Torus,
    Octagon,
    /// Polygons and pairings given explicitly.
    Custom(SurfaceSpec),
}

impl SurfaceChoice {
    /// `torus`, `octagon` or the path of a surface document.
    pub fn from_arg(s: &str) -> Result<Self, Failure> {
        match s {
            "torus" => Ok(SurfaceChoice::Torus),
            "octagon" => Ok(SurfaceChoice::Octagon),
            path => Ok(SurfaceChoice::Custom(read_document(Path::new(path))?)),
        }
    }

    pub fn build(&self) -> Result<HalfTranslationSurface, Failure> {
        Ok(match self {
            SurfaceChoice::Torus => HalfTranslationSurface::unit_torus(),
            SurfaceChoice::Octagon => HalfTranslationSurface::regular_octagon(),
            SurfaceChoice::Custom(spec) => HalfTranslationSurface::new(spec)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_and_list_syntax() {
        assert_eq!(parse_complex("-1.5,2").unwrap(), Complex64::new(-1.5, 2.0));
        assert_eq!(parse_complex(" 3 ").unwrap(), Complex64::new(3.0, 0.0));
        assert!(parse_complex("1,2,3").is_err());
        assert_eq!(ComplexList::from_str("1,0;0,1;").unwrap().0.len(), 2);
        assert!(RealList::from_str("1;x").is_err());
    }

    #[test]
    fn loop_syntax() {
        assert_eq!("b2".parse::<LoopSpec>().unwrap(), LoopSpec::Generator { index: 3 });
        assert_eq!("sample:7".parse::<LoopSpec>().unwrap().id(), "sample-7");
        assert!(matches!(
            "circle:0.5,-1,0.2".parse::<LoopSpec>().unwrap(),
            LoopSpec::Circle { radius, .. } if radius == 0.2
        ));
        assert!("circle:1,2".parse::<LoopSpec>().is_err());
        assert!("c3".parse::<LoopSpec>().is_err());
    }

    #[test]
    fn system_syntax() {
        assert_eq!(SystemSpec::parse("random", 4).unwrap(), SystemSpec::Random { seed: Some(4) });
        assert!(SystemSpec::parse("1;2;3", 1).is_err());
        let s = SystemSpec::parse("1;0;0;1;0,1;0", 1).unwrap();
        let curve = CurveSpec::default().build().unwrap();
        let a = s.build(&curve, 1).unwrap();
        assert_eq!(a.gamma.coeffs[0], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn scenario_numbers_are_pairs() {
        let spec: CurveSpec = toml::from_str("branch_points = [[1.0, 0.0], [0.0, 1.0]]").unwrap();
        assert_eq!(spec.branch_points.unwrap()[1], Complex64::new(0.0, 1.0));
        let lp: LoopSpec = toml::from_str("kind = \"circle\"\ncenter = [0.1, 0.2]\nradius = 0.5").unwrap();
        assert_eq!(lp.id(), "circle");
        assert!(toml::from_str::<LoopSpec>("kind = \"generator\"\nindex = 0\nextra = 1").is_err());
    }
}
