use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::units::{format_quantity, parse_quantity, parse_vector, Dimension};
use super::ConfigError;
use crate::linsolve::SolverSettings;
use crate::mesh::{Mesh, Point3, RawMesh};
use crate::solidify::{EnergyOptions, MaterialModel, PropertyTable, SolidifyOptions, ThermalBc};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mesh: RawMeshSection,
    material: RawMaterial,
    initial: RawInitial,
    #[serde(default)]
    boundary: BTreeMap<String, RawBoundary>,
    time: RawTime,
    #[serde(default)]
    physics: RawPhysics,
    #[serde(default)]
    probes: RawProbes,
    #[serde(default)]
    solver: RawSolver,
    campaign: Option<RawCampaign>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeshSection {
    file: Option<String>,
    shape: Option<String>,
    cells: Option<[usize; 3]>,
    size: Option<String>,
    /// Fractions of the x and z extents where the bracket's corner block
    /// is cut away.
    cut: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawTable {
    Constant(String),
    Points(Vec<(String, String)>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    preset: Option<String>,
    c0: Option<String>,
    density: Option<String>,
    viscosity: Option<String>,
    specific_heat: Option<String>,
    conductivity: Option<RawTable>,
    conductivity_shift: Option<String>,
    latent_heat: Option<String>,
    expansion: Option<String>,
    t_ref: Option<String>,
    partition: Option<String>,
    t_freeze: Option<String>,
    t_liquidus: Option<String>,
    t_solidus: Option<String>,
    smear_width: Option<String>,
    dendrite_spacing: Option<String>,
    diffusivity: Option<String>,
    gravity: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    temperature: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    #[serde(rename = "type")]
    kind: String,
    temperature: Option<String>,
    start: Option<String>,
    rate: Option<String>,
    offset: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: String,
    end: String,
    #[serde(default = "yes")]
    stop_when_solid: bool,
    #[serde(default)]
    output_every: usize,
    #[serde(default = "default_courant")]
    max_courant: f64,
}

fn default_courant() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    #[serde(default = "yes")]
    convection: bool,
    #[serde(default = "yes")]
    gravity: bool,
}

impl Default for RawPhysics {
    fn default() -> Self {
        Self { convection: true, gravity: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbes {
    #[serde(default)]
    points: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<f64>,
    max_iter: Option<usize>,
    energy_tol: Option<f64>,
    energy_max_outer: Option<usize>,
    omega: Option<f64>,
    div_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCampaign {
    level: usize,
    order: Option<usize>,
    outputs: Vec<String>,
    #[serde(default)]
    test_points: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_resolution")]
    surface_resolution: usize,
    #[serde(default)]
    inputs: Vec<RawInput>,
}

fn default_resolution() -> usize {
    21
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    name: String,
    field: String,
    mean: String,
    sd: String,
}

/// Where the mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Box { cells: [usize; 3], size: [f64; 3] },
    LBracket { cells: [usize; 3], size: [f64; 3], cut: [f64; 2] },
}

impl MeshSource {
    pub fn load(&self) -> Result<Mesh, crate::mesh::MeshError> {
        match self {
            MeshSource::File(p) => Mesh::load_msh(p),
            MeshSource::Box { cells, size } => Mesh::from_raw(RawMesh::structured_box(*cells, *size)),
            MeshSource::LBracket { cells, size, cut } => Mesh::from_raw(RawMesh::l_bracket(*cells, *size, cut[0], cut[1])),
        }
    }
}

/// One deterministic simulation, all values in SI units.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub material: MaterialModel,
    pub initial_temperature: f64,
    /// Thermal condition per named patch; unnamed patches are insulated.
    pub boundary: BTreeMap<String, ThermalBc>,
    pub dt: f64,
    pub end_time: f64,
    pub stop_when_solid: bool,
    /// Steps between field snapshots, 0 for final fields only.
    pub output_every: usize,
    /// Largest cell Courant number tolerated by the explicit convection.
    pub max_courant: f64,
    pub probes: Vec<Point3>,
    pub options: SolidifyOptions,
}

/// Output functional a campaign expands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Functional {
    SolidificationTime,
    MaxSdas,
    MinYield,
    MaxGrain,
    /// Temperature of the hottest probe at the end of the run.
    HottestProbeTemperature,
}

impl Functional {
    pub const ALL: [Functional; 5] = [
        Functional::SolidificationTime,
        Functional::MaxSdas,
        Functional::MinYield,
        Functional::MaxGrain,
        Functional::HottestProbeTemperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::SolidificationTime => "solidification_time",
            Functional::MaxSdas => "max_sdas",
            Functional::MinYield => "min_yield",
            Functional::MaxGrain => "max_grain",
            Functional::HottestProbeTemperature => "hottest_probe_temperature",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// Random input bound to one configuration field.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticInput {
    pub name: String,
    /// Dotted path such as `boundary.xmin.offset`.
    pub field: String,
    pub dimension: Dimension,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    /// The parsed configuration file, used as the template for samples.
    pub template: toml::Table,
    pub base_dir: PathBuf,
    pub base: RunConfig,
    pub inputs: Vec<StochasticInput>,
    pub level: usize,
    /// Total order of the expansion; `level - 1` when unset.
    pub order: Option<usize>,
    pub outputs: Vec<Functional>,
    pub test_points: usize,
    pub seed: u64,
    pub surface_resolution: usize,
}

fn material_dimension(key: &str) -> Option<Dimension> {
    use Dimension::*;
    Some(match key {
        "c0" => Composition,
        "density" => Density,
        "viscosity" => Viscosity,
        "specific_heat" => SpecificHeat,
        "conductivity_shift" => Conductivity,
        "latent_heat" => SpecificEnergy,
        "expansion" => Expansion,
        "t_ref" | "t_freeze" | "t_liquidus" | "t_solidus" => Temperature,
        "partition" => Dimensionless,
        "smear_width" => TemperatureDifference,
        "dendrite_spacing" => Length,
        "diffusivity" => Diffusivity,
        "gravity" => Acceleration,
        _ => return None,
    })
}

/// Dimension of a scalar field a stochastic input may drive.
fn field_dimension(path: &[&str]) -> Option<Dimension> {
    match path {
        ["material", key] => material_dimension(key),
        ["initial", "temperature"] => Some(Dimension::Temperature),
        ["boundary", _, "temperature" | "start"] => Some(Dimension::Temperature),
        ["boundary", _, "offset"] => Some(Dimension::TemperatureDifference),
        ["boundary", _, "rate"] => Some(Dimension::CoolingRate),
        _ => None,
    }
}

fn q(key: &str, text: &str, dim: Dimension) -> Result<f64, ConfigError> {
    parse_quantity(key, text, dim)
}

fn opt_q(key: &str, text: &Option<String>, dim: Dimension) -> Result<Option<f64>, ConfigError> {
    text.as_deref().map(|t| q(key, t, dim)).transpose()
}

fn material_from_raw(m: &RawMaterial) -> Result<MaterialModel, ConfigError> {
    use Dimension::*;
    let c0 = opt_q("material.c0", &m.c0, Composition)?;
    let mut mat = match m.preset.as_deref() {
        Some("al-si") => MaterialModel::al_si(c0.ok_or(ConfigError::Missing("material.c0".into()))?),
        Some(other) => return Err(ConfigError::Value { key: "material.preset".into(), msg: format!("unknown preset `{other}`") }),
        None => {
            let need = |key: &str, v: &Option<String>, dim| {
                opt_q(&format!("material.{key}"), v, dim)?.ok_or_else(|| ConfigError::Missing(format!("material.{key}")))
            };
            MaterialModel {
                density: need("density", &m.density, Density)?,
                viscosity: need("viscosity", &m.viscosity, Viscosity)?,
                specific_heat: need("specific_heat", &m.specific_heat, SpecificHeat)?,
                conductivity: PropertyTable::constant(0.0),
                latent_heat: need("latent_heat", &m.latent_heat, SpecificEnergy)?,
                expansion: need("expansion", &m.expansion, Expansion)?,
                t_ref: need("t_ref", &m.t_ref, Temperature)?,
                partition: need("partition", &m.partition, Dimensionless)?,
                t_freeze: need("t_freeze", &m.t_freeze, Temperature)?,
                t_liquidus: need("t_liquidus", &m.t_liquidus, Temperature)?,
                t_solidus: need("t_solidus", &m.t_solidus, Temperature)?,
                smear_width: need("smear_width", &m.smear_width, TemperatureDifference)?,
                dendrite_spacing: need("dendrite_spacing", &m.dendrite_spacing, Length)?,
                diffusivity: need("diffusivity", &m.diffusivity, Diffusivity)?,
                c0: c0.ok_or(ConfigError::Missing("material.c0".into()))?,
                gravity: Point3::new(0.0, 0.0, -9.81),
            }
        }
    };
    if m.preset.is_none() && m.conductivity.is_none() {
        return Err(ConfigError::Missing("material.conductivity".into()));
    }
    if m.preset.is_some() {
        // Explicit values override the preset.
        let set = |slot: &mut f64, key: &str, v: &Option<String>, dim| -> Result<(), ConfigError> {
            if let Some(x) = opt_q(&format!("material.{key}"), v, dim)? {
                *slot = x;
            }
            Ok(())
        };
        set(&mut mat.density, "density", &m.density, Density)?;
        set(&mut mat.viscosity, "viscosity", &m.viscosity, Viscosity)?;
        set(&mut mat.specific_heat, "specific_heat", &m.specific_heat, SpecificHeat)?;
        set(&mut mat.latent_heat, "latent_heat", &m.latent_heat, SpecificEnergy)?;
        set(&mut mat.expansion, "expansion", &m.expansion, Expansion)?;
        set(&mut mat.t_ref, "t_ref", &m.t_ref, Temperature)?;
        set(&mut mat.partition, "partition", &m.partition, Dimensionless)?;
        set(&mut mat.t_freeze, "t_freeze", &m.t_freeze, Temperature)?;
        set(&mut mat.t_liquidus, "t_liquidus", &m.t_liquidus, Temperature)?;
        set(&mut mat.t_solidus, "t_solidus", &m.t_solidus, Temperature)?;
        set(&mut mat.smear_width, "smear_width", &m.smear_width, TemperatureDifference)?;
        set(&mut mat.dendrite_spacing, "dendrite_spacing", &m.dendrite_spacing, Length)?;
        set(&mut mat.diffusivity, "diffusivity", &m.diffusivity, Diffusivity)?;
    }
    if let Some(table) = &m.conductivity {
        mat.conductivity = match table {
            RawTable::Constant(s) => PropertyTable::constant(q("material.conductivity", s, Conductivity)?),
            RawTable::Points(points) => {
                let pts = points
                    .iter()
                    .map(|(t, k)| Ok((q("material.conductivity", t, Temperature)?, q("material.conductivity", k, Conductivity)?)))
                    .collect::<Result<Vec<_>, ConfigError>>()?;
                PropertyTable::new(pts).map_err(|e| ConfigError::Value { key: "material.conductivity".into(), msg: e.to_string() })?
            }
        };
    }
    if let Some(shift) = opt_q("material.conductivity_shift", &m.conductivity_shift, Conductivity)? {
        mat.conductivity = mat.conductivity.map_values(|k| k + shift);
    }
    if let Some(g) = opt_q("material.gravity", &m.gravity, Acceleration)? {
        mat.gravity = Point3::new(0.0, 0.0, -g);
    }
    mat.validate().map_err(|e| ConfigError::Value { key: "material".into(), msg: e.to_string() })?;
    Ok(mat)
}

fn boundary_from_raw(name: &str, b: &RawBoundary) -> Result<ThermalBc, ConfigError> {
    use Dimension::*;
    let key = |k: &str| format!("boundary.{name}.{k}");
    let need = |k: &str, v: &Option<String>, dim| opt_q(&key(k), v, dim)?.ok_or_else(|| ConfigError::Missing(key(k)));
    let offset = opt_q(&key("offset"), &b.offset, TemperatureDifference)?.unwrap_or(0.0);
    match b.kind.as_str() {
        "insulated" => Ok(ThermalBc::Insulated),
        "fixed" => Ok(ThermalBc::Fixed(need("temperature", &b.temperature, Temperature)? + offset)),
        // The offset shifts the whole wall trace.
        "ramp" => Ok(ThermalBc::Ramp { start: need("start", &b.start, Temperature)? + offset, rate: need("rate", &b.rate, CoolingRate)? }),
        other => Err(ConfigError::Value { key: key("type"), msg: format!("unknown boundary type `{other}`") }),
    }
}

fn mesh_from_raw(m: &RawMeshSection, base_dir: &Path) -> Result<MeshSource, ConfigError> {
    let size = || -> Result<[f64; 3], ConfigError> {
        let text = m.size.as_deref().ok_or(ConfigError::Missing("mesh.size".into()))?;
        let v = parse_vector("mesh.size", text, Dimension::Length)?;
        <[f64; 3]>::try_from(v).map_err(|_| ConfigError::Value { key: "mesh.size".into(), msg: "need three lengths".into() })
    };
    let cells = || m.cells.ok_or(ConfigError::Missing("mesh.cells".into()));
    match (&m.file, m.shape.as_deref()) {
        (Some(f), None) => Ok(MeshSource::File(base_dir.join(f))),
        (None, Some("box")) => Ok(MeshSource::Box { cells: cells()?, size: size()? }),
        (None, Some("l-bracket")) => {
            Ok(MeshSource::LBracket { cells: cells()?, size: size()?, cut: m.cut.unwrap_or([0.5, 0.5]) })
        }
        (None, Some(other)) => Err(ConfigError::Value { key: "mesh.shape".into(), msg: format!("unknown shape `{other}`") }),
        _ => Err(ConfigError::Value { key: "mesh".into(), msg: "give exactly one of `file` or `shape`".into() }),
    }
}

fn run_from_raw(raw: &RawRun, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut material = material_from_raw(&raw.material)?;
    if !raw.physics.gravity {
        material.gravity = Point3::zeros();
    }
    let boundary =
        raw.boundary.iter().map(|(k, b)| Ok((k.clone(), boundary_from_raw(k, b)?))).collect::<Result<BTreeMap<_, _>, ConfigError>>()?;
    let dt = q("time.dt", &raw.time.dt, Dimension::Time)?;
    if !(dt > 0.0) {
        return Err(ConfigError::Value { key: "time.dt".into(), msg: "must be positive".into() });
    }
    let end_time = q("time.end", &raw.time.end, Dimension::Time)?;
    let probes = raw
        .probes
        .points
        .iter()
        .map(|p| {
            let v = parse_vector("probes.points", p, Dimension::Length)?;
            match v[..] {
                [x, y, z] => Ok(Point3::new(x, y, z)),
                _ => Err(ConfigError::Value { key: "probes.points".into(), msg: format!("`{p}` is not a 3-vector") }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let s = &raw.solver;
    let defaults = SolidifyOptions::default();
    let options = SolidifyOptions {
        convection: raw.physics.convection,
        energy: EnergyOptions {
            omega: s.omega.unwrap_or(defaults.energy.omega),
            tol: s.energy_tol.unwrap_or(defaults.energy.tol),
            max_outer: s.energy_max_outer.unwrap_or(defaults.energy.max_outer),
        },
        div_tol: s.div_tol.unwrap_or(defaults.div_tol),
        drag_cap: defaults.drag_cap,
        solver: SolverSettings {
            tol: s.tol.unwrap_or(defaults.solver.tol),
            max_iter: s.max_iter.unwrap_or(defaults.solver.max_iter),
            ..defaults.solver
        },
    };
    Ok(RunConfig {
        mesh: mesh_from_raw(&raw.mesh, base_dir)?,
        material,
        initial_temperature: q("initial.temperature", &raw.initial.temperature, Dimension::Temperature)?,
        boundary,
        dt,
        end_time,
        stop_when_solid: raw.time.stop_when_solid,
        output_every: raw.time.output_every,
        max_courant: raw.time.max_courant,
        probes,
        options,
    })
}

fn parse_table(text: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError::Syntax(e.to_string()))
}

fn raw_from_table(table: &toml::Table) -> Result<RawRun, ConfigError> {
    toml::Value::Table(table.clone()).try_into().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))
}

impl RunConfig {
    /// Parses a configuration; relative mesh paths resolve against
    /// `base_dir`.
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        Self::from_table(&parse_table(text)?, base_dir)
    }

    pub fn from_table(table: &toml::Table, base_dir: &Path) -> Result<Self, ConfigError> {
        run_from_raw(&raw_from_table(table)?, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::from_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Boundary conditions in patch order, after checking that every
    /// configured patch exists.
    pub fn patch_conditions(&self, mesh: &Mesh) -> Result<Vec<ThermalBc>, ConfigError> {
        if let Some(name) = self.boundary.keys().find(|n| mesh.patch_index(n).is_none()) {
            let known: Vec<&str> = mesh.patches.iter().map(|p| p.name.as_str()).collect();
            return Err(ConfigError::UnknownPatch { name: name.clone(), known: known.join(", ") });
        }
        Ok(mesh.patches.iter().map(|p| self.boundary.get(&p.name).copied().unwrap_or(ThermalBc::Insulated)).collect())
    }
}

impl CampaignConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let template = parse_table(text)?;
        let raw = raw_from_table(&template)?;
        let base = run_from_raw(&raw, base_dir)?;
        let c = raw.campaign.as_ref().ok_or(ConfigError::Missing("campaign".into()))?;
        if c.level == 0 {
            return Err(ConfigError::Value { key: "campaign.level".into(), msg: "must be at least 1".into() });
        }
        if c.inputs.is_empty() {
            return Err(ConfigError::Missing("campaign.inputs".into()));
        }
        let mut inputs: Vec<StochasticInput> = Vec::new();
        for (i, inp) in c.inputs.iter().enumerate() {
            let key = format!("campaign.inputs[{i}]");
            let path: Vec<&str> = inp.field.split('.').collect();
            let dimension = field_dimension(&path)
                .ok_or_else(|| ConfigError::Value { key: key.clone(), msg: format!("`{}` is not a stochastic field", inp.field) })?;
            if let ["boundary", patch, _] = path[..] {
                if !template.get("boundary").and_then(|b| b.get(patch)).is_some() {
                    return Err(ConfigError::Value { key, msg: format!("boundary `{patch}` is not configured") });
                }
            }
            if inputs.iter().any(|o| o.field == inp.field || o.name == inp.name) {
                return Err(ConfigError::Value { key, msg: format!("field `{}` or name `{}` used twice", inp.field, inp.name) });
            }
            let spread = if dimension == Dimension::Temperature { Dimension::TemperatureDifference } else { dimension };
            let mean = q(&format!("{key}.mean"), &inp.mean, dimension)?;
            let sd = q(&format!("{key}.sd"), &inp.sd, spread)?;
            if !(sd > 0.0) {
                return Err(ConfigError::Value { key: format!("{key}.sd"), msg: "must be positive".into() });
            }
            inputs.push(StochasticInput { name: inp.name.clone(), field: inp.field.clone(), dimension, mean, sd });
        }
        let outputs = c
            .outputs
            .iter()
            .map(|o| Functional::from_name(o).ok_or_else(|| ConfigError::Value { key: "campaign.outputs".into(), msg: format!("unknown output `{o}`") }))
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = Self {
            base_dir: base_dir.to_path_buf(),
            base,
            inputs,
            level: c.level,
            order: c.order,
            outputs,
            test_points: c.test_points,
            seed: c.seed,
            surface_resolution: c.surface_resolution.max(2),
            template,
        };
        // The mean sample must be a valid run.
        cfg.run_config(&cfg.inputs.iter().map(|i| i.mean).collect::<Vec<_>>())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::from_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn pce_order(&self) -> usize {
        self.order.unwrap_or(self.level - 1)
    }

    /// Configuration text with the stochastic fields set to physical
    /// values `x`.
    pub fn sample_table(&self, x: &[f64]) -> toml::Table {
        let mut table = self.template.clone();
        table.remove("campaign");
        // Snapshots are written elsewhere, so relative paths must not be.
        if let MeshSource::File(path) = &self.base.mesh {
            let absolute = std::path::absolute(path).unwrap_or_else(|_| path.clone());
            if let Some(mesh) = table.get_mut("mesh").and_then(|m| m.as_table_mut()) {
                mesh.insert("file".into(), toml::Value::String(absolute.to_string_lossy().into_owned()));
            }
        }
        for (inp, &v) in self.inputs.iter().zip(x) {
            let path: Vec<&str> = inp.field.split('.').collect();
            let (last, parents) = path.split_last().expect("non-empty field path");
            let mut node = &mut table;
            for p in parents {
                node = node
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .expect("configuration section");
            }
            node.insert(last.to_string(), toml::Value::String(format_quantity(v, inp.dimension)));
        }
        table
    }

    pub fn run_config(&self, x: &[f64]) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::from_table(&self.sample_table(x), &self.base_dir)?;
        cfg.options.convection &= self.base.options.convection;
        Ok(cfg)
    }
}
