//! Run configuration: a TOML document mirroring [`RunConfig`], validated and
//! turned into a solver [`Problem`].

use std::path::{Path, PathBuf};

use lbsplit::catastrophic::{read_kernel_params, read_removal_table, synthetic_removal, KernelParams};
use lbsplit::grid::{AngularAxis, Axis, DepthAxis, EnergyGrid, Geometry, Grids, Region};
use lbsplit::physics::{Component, Element, Material};
use lbsplit::{BeamSpec, Problem, SolverConfig, SplitOrder};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub beam: BeamConfig,
    pub grid: GridConfig,
    pub materials: Vec<MaterialConfig>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub catastrophic: CatastrophicConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub energy_mev: f64,
    #[serde(default = "default_sigma_e")]
    pub sigma_e_mev: f64,
    #[serde(default = "default_spot")]
    pub sigma_y_cm: f64,
    #[serde(default = "default_spot")]
    pub sigma_z_cm: f64,
    /// Angular spread in tangent units; tiny values give a pencil beam.
    #[serde(default = "default_divergence")]
    pub sigma_u: f64,
    #[serde(default = "default_divergence")]
    pub sigma_v: f64,
}

fn default_sigma_e() -> f64 {
    1.0
}
fn default_spot() -> f64 {
    0.3
}
fn default_divergence() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub energy_min_mev: f64,
    pub energy_max_mev: f64,
    pub groups: usize,
    pub depth_cm: f64,
    pub slabs: usize,
    /// Lateral domain is (-half_width, half_width) in y and z.
    pub lateral_half_width_cm: f64,
    pub lateral_cells: usize,
    /// Intervals per angular axis on (-1, 1); the unknowns sit on the interior nodes.
    pub angular_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub name: String,
    /// Overrides the built-in density, required for custom compositions.
    #[serde(default)]
    pub density: Option<f64>,
    /// Element weight fractions; omit to use the built-in material `name`.
    #[serde(default)]
    pub components: Vec<ComponentConfig>,
    #[serde(default)]
    pub removal: Removal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub element: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Removal {
    #[default]
    None,
    /// Non-clinical placeholder cross sections.
    Synthetic,
    /// Table file with header `group,sigma_ct_per_cm`.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Material filling the domain outside every region; defaults to the first material.
    #[serde(default)]
    pub background: Option<String>,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub material: String,
    pub lo_cm: [f64; 3],
    pub hi_cm: [f64; 3],
    #[serde(default)]
    pub density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatastrophicConfig {
    pub max_order: usize,
    /// Kernel parameter file (`group,lambda_per_mev,alpha,beta_per_rad`); synthetic kernels when absent.
    #[serde(default)]
    pub kernels: Option<PathBuf>,
}

impl Default for CatastrophicConfig {
    fn default() -> Self {
        Self { max_order: 1, kernels: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    First,
    #[default]
    Strang,
    StrangEnergyInner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default)]
    pub split: SplitName,
    #[serde(default = "yes")]
    pub energy: bool,
    #[serde(default = "yes")]
    pub lateral: bool,
    #[serde(default = "yes")]
    pub angular: bool,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    /// Stop when the in-flight energy drops below this fraction of the injected energy; 0 disables.
    #[serde(default = "default_termination")]
    pub termination: f64,
    #[serde(default = "default_explicit_limit")]
    pub explicit_limit: f64,
}

fn yes() -> bool {
    true
}
fn default_penalty() -> f64 {
    lbsplit::energy_dg::DEFAULT_PENALTY
}
fn default_termination() -> f64 {
    1e-10
}
fn default_explicit_limit() -> f64 {
    0.5
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            split: SplitName::Strang,
            energy: true,
            lateral: true,
            angular: true,
            penalty: default_penalty(),
            termination: default_termination(),
            explicit_limit: default_explicit_limit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Depths of the `spot_<x>.csv` slices.
    #[serde(default)]
    pub spot_depths_cm: Vec<f64>,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { spot_depths_cm: vec![0.0], workers: 1 }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// Reads a config file; relative table paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for m in &mut self.materials {
            if let Removal::File(p) = &mut m.removal {
                fix(p);
            }
        }
        if let Some(p) = &mut self.catastrophic.kernels {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let b = &self.beam;
        positive("beam.energy_mev", b.energy_mev)?;
        for (n, x) in [
            ("beam.sigma_e_mev", b.sigma_e_mev),
            ("beam.sigma_y_cm", b.sigma_y_cm),
            ("beam.sigma_z_cm", b.sigma_z_cm),
            ("beam.sigma_u", b.sigma_u),
            ("beam.sigma_v", b.sigma_v),
        ] {
            positive(n, x)?;
        }
        let g = &self.grid;
        positive("grid.energy_min_mev", g.energy_min_mev)?;
        if !(g.energy_max_mev > g.energy_min_mev) {
            return Err(bad("grid.energy_max_mev must exceed grid.energy_min_mev"));
        }
        if !(b.energy_mev > g.energy_min_mev && b.energy_mev < g.energy_max_mev) {
            return Err(bad(format!(
                "beam energy {} MeV outside the energy grid ({}, {})",
                b.energy_mev, g.energy_min_mev, g.energy_max_mev
            )));
        }
        positive("grid.depth_cm", g.depth_cm)?;
        positive("grid.lateral_half_width_cm", g.lateral_half_width_cm)?;
        for (n, k, min) in [
            ("grid.groups", g.groups, 1),
            ("grid.slabs", g.slabs, 1),
            ("grid.lateral_cells", g.lateral_cells, 1),
            ("grid.angular_intervals", g.angular_intervals, 2),
        ] {
            if k < min {
                return Err(bad(format!("{n} must be at least {min}, got {k}")));
            }
        }
        if self.materials.is_empty() {
            return Err(bad("at least one material is required"));
        }
        for (k, m) in self.materials.iter().enumerate() {
            if self.materials[..k].iter().any(|o| o.name == m.name) {
                return Err(bad(format!("material '{}' defined twice", m.name)));
            }
            if let Some(d) = m.density {
                positive(&format!("density of '{}'", m.name), d)?;
            }
            if m.components.is_empty() && Material::preset(&m.name).is_none() {
                return Err(bad(format!("material '{}' is not built in and lists no components", m.name)));
            }
            if !m.components.is_empty() && m.density.is_none() {
                return Err(bad(format!("material '{}' needs a density", m.name)));
            }
        }
        if let Some(bg) = &self.geometry.background {
            self.material_index(bg)?;
        }
        for r in &self.geometry.regions {
            self.material_index(&r.material)?;
            if let Some(d) = r.density {
                positive("region density", d)?;
            }
            if (0..3).any(|k| !(r.hi_cm[k] >= r.lo_cm[k])) {
                return Err(bad(format!("region of '{}' has hi < lo", r.material)));
            }
        }
        let s = &self.solver;
        positive("solver.penalty", s.penalty)?;
        positive("solver.explicit_limit", s.explicit_limit)?;
        if !(s.termination >= 0.0) {
            return Err(bad("solver.termination must be non-negative"));
        }
        for &x in &self.output.spot_depths_cm {
            if !(x >= 0.0 && x <= g.depth_cm) {
                return Err(bad(format!("spot depth {x} cm outside [0, {}]", g.depth_cm)));
            }
        }
        if self.output.workers == 0 {
            return Err(bad("output.workers must be at least 1"));
        }
        Ok(())
    }

    fn material_index(&self, name: &str) -> Result<usize, CliError> {
        self.materials
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| bad(format!("unknown material '{name}'")))
    }

    pub fn grids(&self) -> Result<Grids, CliError> {
        let g = &self.grid;
        let w = g.lateral_half_width_cm;
        let e = |x: lbsplit::grid::GridError| bad(x.to_string());
        Ok(Grids {
            energy: EnergyGrid::uniform(g.energy_min_mev, g.energy_max_mev, g.groups).map_err(e)?,
            depth: DepthAxis::new(g.slabs, g.depth_cm).map_err(e)?,
            y: Axis::new(g.lateral_cells, -w, w).map_err(e)?,
            z: Axis::new(g.lateral_cells, -w, w).map_err(e)?,
            u: AngularAxis::new(g.angular_intervals).map_err(e)?,
            v: AngularAxis::new(g.angular_intervals).map_err(e)?,
        })
    }

    fn material(m: &MaterialConfig) -> Result<Material, CliError> {
        let built = if m.components.is_empty() {
            let mut mat = Material::preset(&m.name).ok_or_else(|| bad(format!("unknown material '{}'", m.name)))?;
            if let Some(d) = m.density {
                mat.density = d;
            }
            mat
        } else {
            let comps = m
                .components
                .iter()
                .map(|c| Ok(Component { element: Element::by_symbol(&c.element)?, weight: c.weight }))
                .collect::<Result<Vec<_>, lbsplit::physics::PhysicsError>>()
                .map_err(|e| bad(e.to_string()))?;
            Material::new(&m.name, m.density.unwrap_or(f64::NAN), comps).map_err(|e| bad(e.to_string()))?
        };
        Ok(built)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            split: match s.split {
                SplitName::First => SplitOrder::FirstOrder,
                SplitName::Strang => SplitOrder::Strang,
                SplitName::StrangEnergyInner => SplitOrder::StrangEnergyInner,
            },
            max_order: self.catastrophic.max_order,
            energy: s.energy,
            lateral: s.lateral,
            angular: s.angular,
            penalty: s.penalty,
            termination: (s.termination > 0.0).then_some(s.termination),
            explicit_limit: s.explicit_limit,
            record_stages: false,
        }
    }

    /// Validates and assembles the solver problem, reading any table files.
    pub fn problem(&self) -> Result<Problem, CliError> {
        self.validate()?;
        let grids = self.grids()?;
        let materials = self.materials.iter().map(Self::material).collect::<Result<Vec<_>, _>>()?;
        let background = match &self.geometry.background {
            Some(n) => self.material_index(n)?,
            None => 0,
        };
        let regions = self
            .geometry
            .regions
            .iter()
            .map(|r| {
                Ok(Region { lo: r.lo_cm, hi: r.hi_cm, material: self.material_index(&r.material)?, density: r.density })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let groups = grids.energy.groups();
        let mut removal = Vec::with_capacity(materials.len());
        for (m, mat) in self.materials.iter().zip(&materials) {
            removal.push(match &m.removal {
                Removal::None => None,
                Removal::Synthetic => Some(synthetic_removal(&grids.energy, mat.density)),
                Removal::File(p) => Some(read_removal_table(p, groups).map_err(CliError::from_catastrophic)?),
            });
        }
        let kernels = match &self.catastrophic.kernels {
            Some(p) => read_kernel_params(p, groups).map_err(CliError::from_catastrophic)?,
            None => KernelParams::synthetic(groups),
        };
        let b = &self.beam;
        let beam = BeamSpec {
            energy: b.energy_mev,
            sigma_e: b.sigma_e_mev,
            sigma_y: b.sigma_y_cm,
            sigma_z: b.sigma_z_cm,
            sigma_u: b.sigma_u,
            sigma_v: b.sigma_v,
        };
        Ok(Problem { grids, geometry: Geometry { materials, background, regions }, beam, removal, kernels })
    }
}
