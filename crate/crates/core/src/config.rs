//! Run configuration: one JSON document carries all the physics of an
//! experiment (domain, grids, data, absorption term, truncation schedule).
//! Command-line flags only pick files and output directories, so a run is
//! reproducible from its echoed config alone.
//!
//! Every field has a default and deserialized configs materialize them, which
//! is what lets the output manifest echo the complete effective input.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::boundary::{BoundaryMeasure, BoundarySide};
use crate::capacity::{CapacityKind, LateralSide};
use crate::error::RmlError;
use crate::grid::{SpaceGrid, TimeGrid};
use crate::measure::{Atom, GridMeasure};
use crate::nonlinearity::{GKind, NonlinearitySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub x_l: f64,
    pub x_r: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { x_l: -1.0, x_r: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nt: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 399, nt: 400 }
    }
}

/// Density part of a measure literal: a named profile (sampled at cell
/// midpoints) or an explicit per-cell vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DensityProfile {
    #[default]
    Zero,
    Uniform {
        c: f64,
    },
    Gaussian {
        center: f64,
        sigma: f64,
        mass: f64,
    },
    Cells(Vec<f64>),
}

impl DensityProfile {
    /// Cell averages over `ncells` equal cells tiling `[a, b]`.
    pub fn sample(&self, a: f64, b: f64, ncells: usize) -> Result<Vec<f64>, RmlError> {
        let h = (b - a) / ncells as f64;
        match self {
            DensityProfile::Zero => Ok(vec![0.0; ncells]),
            DensityProfile::Uniform { c } => Ok(vec![*c; ncells]),
            DensityProfile::Gaussian { center, sigma, mass } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(RmlError::InvalidConfig(format!(
                        "gaussian sigma {sigma} must be positive"
                    )));
                }
                let norm = mass / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                Ok((0..ncells)
                    .map(|j| {
                        let x = a + (j as f64 + 0.5) * h;
                        let z = (x - center) / sigma;
                        norm * (-0.5 * z * z).exp()
                    })
                    .collect())
            }
            DensityProfile::Cells(v) => {
                if v.len() != ncells {
                    return Err(RmlError::InvalidConfig(format!(
                        "density sample vector has {} entries, grid has {} cells",
                        v.len(),
                        ncells
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

impl FromStr for DensityProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        if t == "zero" {
            return Ok(DensityProfile::Zero);
        }
        let parse_args = |name: &str| -> Result<Vec<f64>, String> {
            let inner = t
                .strip_prefix(name)
                .and_then(|r| r.trim().strip_prefix('('))
                .and_then(|r| r.trim_end().strip_suffix(')'))
                .ok_or_else(|| format!("malformed profile {t:?}"))?;
            inner
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
                .collect()
        };
        if t.starts_with("uniform") {
            let args = parse_args("uniform")?;
            if args.len() != 1 {
                return Err(format!("uniform takes one argument, got {}", args.len()));
            }
            return Ok(DensityProfile::Uniform { c: args[0] });
        }
        if t.starts_with("gaussian") {
            let args = parse_args("gaussian")?;
            if args.len() != 3 {
                return Err(format!("gaussian takes (center, sigma, mass), got {} args", args.len()));
            }
            return Ok(DensityProfile::Gaussian { center: args[0], sigma: args[1], mass: args[2] });
        }
        Err(format!(
            "unknown density profile {t:?} (expected \"zero\", \"uniform(c)\", \"gaussian(center,sigma,mass)\", or a sample vector)"
        ))
    }
}

impl fmt::Display for DensityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityProfile::Zero => write!(f, "zero"),
            DensityProfile::Uniform { c } => write!(f, "uniform({c})"),
            DensityProfile::Gaussian { center, sigma, mass } => {
                write!(f, "gaussian({center},{sigma},{mass})")
            }
            DensityProfile::Cells(_) => write!(f, "<sample vector>"),
        }
    }
}

impl Serialize for DensityProfile {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DensityProfile::Cells(v) => v.serialize(s),
            named => s.serialize_str(&named.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for DensityProfile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ProfileVisitor;

        impl<'de> Visitor<'de> for ProfileVisitor {
            type Value = DensityProfile;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a profile name like \"uniform(0.5)\" or a sample vector")
            }

            fn visit_str<E: serde::de::Error>(self, s: &str) -> Result<Self::Value, E> {
                s.parse().map_err(E::custom)
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut v = Vec::new();
                while let Some(x) = seq.next_element::<f64>()? {
                    v.push(x);
                }
                Ok(DensityProfile::Cells(v))
            }
        }

        d.deserialize_any(ProfileVisitor)
    }
}

/// Initial-measure literal: atoms in space plus a density profile over the
/// domain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureLiteral {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub density: DensityProfile,
}

/// Atom on the time axis of one lateral boundary line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeAtom {
    pub time: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySideLiteral {
    #[serde(default)]
    pub atoms: Vec<TimeAtom>,
    #[serde(default)]
    pub density: DensityProfile,
}

/// Boundary-measure literal keyed by endpoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryLiteral {
    #[serde(default)]
    pub left: BoundarySideLiteral,
    #[serde(default)]
    pub right: BoundarySideLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    K,
    Grid,
    Both,
}

fn default_lateral_side() -> LateralSide {
    LateralSide::Left
}

fn default_capacity_horizon() -> f64 {
    0.5
}

/// Capacity problem description for sweep runs (the `capacity` subcommand
/// takes the same data as shortcut flags instead).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub kind: CapacityKind,
    #[serde(default = "default_lateral_side")]
    pub side: LateralSide,
    pub intervals: Vec<(f64, f64)>,
    #[serde(default = "default_capacity_horizon")]
    pub t_final: f64,
}

fn default_grid_levels() -> Vec<(usize, usize)> {
    vec![(199, 100), (399, 400), (799, 1600)]
}

fn default_joint_caps() -> Vec<f64> {
    vec![1e4, 1e5, 1e6]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// (nx, nt) per refinement level.
    #[serde(default = "default_grid_levels")]
    pub grid_levels: Vec<(usize, usize)>,
    /// Top truncation level per joint cell (axis = both).
    #[serde(default = "default_joint_caps")]
    pub joint_caps: Vec<f64>,
    #[serde(default)]
    pub capacity: Option<CapacityConfig>,
    /// Wall-clock cap; cells past it are skipped and the report flagged.
    #[serde(default)]
    pub budget_seconds: Option<f64>,
}

impl SweepConfig {
    pub fn default_levels() -> Vec<(usize, usize)> {
        default_grid_levels()
    }

    pub fn default_caps() -> Vec<f64> {
        default_joint_caps()
    }
}

fn default_t_final() -> f64 {
    0.25
}

fn default_g() -> GKind {
    GKind::Zero
}

/// Truncation levels 4^j, j = 0..=10; geometric ladders expose the monotone
/// tail cheaply.
pub fn default_schedule() -> Vec<f64> {
    (0..=10).map(|j| 4f64.powi(j)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub measure: Option<MeasureLiteral>,
    #[serde(default)]
    pub boundary: Option<BoundaryLiteral>,
    #[serde(default = "default_g")]
    pub g: GKind,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<f64>,
    /// Goodness-verdict tolerance; `null` means 5% of the data's mass.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainConfig::default(),
            grid: GridConfig::default(),
            t_final: default_t_final(),
            measure: None,
            boundary: None,
            g: default_g(),
            schedule: default_schedule(),
            tol: None,
            seed: 0,
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, RmlError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn space_grid(&self) -> Result<SpaceGrid, RmlError> {
        SpaceGrid::new(self.domain.x_l, self.domain.x_r, self.grid.nx)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, RmlError> {
        TimeGrid::new(self.t_final, self.grid.nt)
    }

    /// Absorption term at the untruncated level; the schedule supplies the
    /// truncation ladder.
    pub fn nonlinearity(&self) -> Result<NonlinearitySpec, RmlError> {
        NonlinearitySpec::new(self.g.clone(), f64::INFINITY)
    }

    pub fn initial_measure(&self) -> Result<GridMeasure, RmlError> {
        let lit = self.measure.as_ref().ok_or_else(|| {
            RmlError::InvalidConfig("this run needs a \"measure\" entry".into())
        })?;
        let sg = self.space_grid()?;
        let density = lit.density.sample(sg.x_l, sg.x_r, sg.ncell())?;
        GridMeasure::new(sg, lit.atoms.clone(), density)
    }

    pub fn boundary_measure(&self) -> Result<BoundaryMeasure, RmlError> {
        let lit = self.boundary.as_ref().ok_or_else(|| {
            RmlError::InvalidConfig("this run needs a \"boundary\" entry".into())
        })?;
        let tg = self.time_grid()?;
        let build = |side: &BoundarySideLiteral| -> Result<BoundarySide, RmlError> {
            Ok(BoundarySide {
                atoms: side.atoms.iter().map(|a| Atom { loc: a.time, mass: a.mass }).collect(),
                density: side.density.sample(0.0, tg.t_final, tg.nt)?,
            })
        };
        BoundaryMeasure::new(tg, build(&lit.left)?, build(&lit.right)?)
    }

    pub fn sweep_config(&self) -> Result<&SweepConfig, RmlError> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| RmlError::InvalidConfig("this run needs a \"sweep\" entry".into()))?;
        if sw.grid_levels.is_empty() {
            return Err(RmlError::InvalidConfig("sweep grid_levels must not be empty".into()));
        }
        if matches!(sw.axis, SweepAxis::Both) && sw.joint_caps.len() != sw.grid_levels.len() {
            return Err(RmlError::InvalidConfig(format!(
                "joint sweep needs one cap per grid level, got {} caps for {} levels",
                sw.joint_caps.len(),
                sw.grid_levels.len()
            )));
        }
        Ok(sw)
    }
}
