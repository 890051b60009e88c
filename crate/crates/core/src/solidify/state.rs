use std::time::Instant;

use super::active::{classify_cells, CellTag};
use super::energy::{energy_step, stored_energy, EnergyInput, EnergyOptions};
use super::flow::{correct_velocity_and_flux, predictor_step, pressure_step, FlowInput};
use super::material::{drag_coefficient, solid_fraction, MaterialModel};
use super::SolidifyError;
use crate::discretization::{gradient_stencils, FaceBc, FaceGradientStencil};
use crate::linsolve::SolverSettings;
use crate::microstructure::{MicroParams, ThermalHistory};
use crate::mesh::{Mesh, Point3};

/// Thermal condition on a boundary patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalBc {
    Insulated,
    Fixed(f64),
    /// Wall temperature `start - rate * t`.
    Ramp { start: f64, rate: f64 },
}

impl ThermalBc {
    pub fn value(&self, t: f64) -> Option<f64> {
        match *self {
            ThermalBc::Insulated => None,
            ThermalBc::Fixed(v) => Some(v),
            ThermalBc::Ramp { start, rate } => Some(start - rate * t),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolidifyOptions {
    /// Solve the flow (natural convection); otherwise pure conduction.
    pub convection: bool,
    pub energy: EnergyOptions,
    /// Allowed net-to-gross flux ratio per active cell.
    pub div_tol: f64,
    /// Darcy coefficient cap in units of `rho / dt`.
    pub drag_cap: f64,
    pub solver: SolverSettings,
}

impl Default for SolidifyOptions {
    fn default() -> Self {
        Self {
            convection: true,
            energy: EnergyOptions::default(),
            div_tol: 1e-8,
            drag_cap: 1e12,
            solver: SolverSettings::default(),
        }
    }
}

/// Fields of a running simulation.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub time: f64,
    pub step: usize,
    pub velocity: Vec<Point3>,
    /// Velocity at the previous level, meaningful once `step > 0`.
    pub velocity_old: Vec<Point3>,
    pub pressure: Vec<f64>,
    pub temperature: Vec<f64>,
    pub temperature_old: Vec<f64>,
    pub solid_fraction: Vec<f64>,
    pub flux: Vec<f64>,
    pub flux_old: Vec<f64>,
    pub tags: Vec<CellTag>,
    pub history: ThermalHistory,
}

impl SimulationState {
    pub fn n_solid(&self) -> usize {
        self.tags.iter().filter(|&&t| t == CellTag::Solid).count()
    }

    pub fn fully_solid(&self) -> bool {
        self.solid_fraction.iter().all(|&f| f >= 1.0)
    }
}

/// What one call to [`Solidifier::advance`] did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub n_active: usize,
    pub flow_solved: bool,
    pub flow_seconds: f64,
    pub energy_seconds: f64,
    pub outer_iterations: usize,
    /// Largest net-to-gross flux ratio after the correction.
    pub max_divergence: f64,
}

/// Time integrator for solidification with natural convection on a fixed
/// mesh.
#[derive(Debug, Clone)]
pub struct Solidifier {
    pub mesh: Mesh,
    pub stencils: Vec<FaceGradientStencil>,
    pub material: MaterialModel,
    /// Thermal condition per patch, in patch order.
    pub patch_bc: Vec<ThermalBc>,
    pub options: SolidifyOptions,
    pub micro: MicroParams,
}

impl Solidifier {
    pub fn new(
        mesh: Mesh,
        material: MaterialModel,
        patch_bc: Vec<ThermalBc>,
        options: SolidifyOptions,
    ) -> Result<Self, SolidifyError> {
        material.validate()?;
        if patch_bc.len() != mesh.patches.len() {
            return Err(SolidifyError::PatchCount { given: patch_bc.len(), patches: mesh.patches.len() });
        }
        let weights = mesh.vertex_weights()?;
        let stencils = gradient_stencils(&mesh, &weights)?;
        let micro = MicroParams { partition: material.partition, diffusivity: material.diffusivity, ..MicroParams::default() };
        Ok(Self { mesh, stencils, material, patch_bc, options, micro })
    }

    /// Quiescent state at the given cell temperatures.
    pub fn initial_state(&self, temperature: Vec<f64>, time: f64) -> SimulationState {
        let n = self.mesh.n_cells();
        let nf = self.mesh.n_faces();
        let mat = &self.material;
        let fs: Vec<f64> = temperature.iter().map(|&t| solid_fraction(t, mat).0).collect();
        let threshold = mat.solid_threshold();
        let tags = temperature.iter().map(|&t| if t < threshold { CellTag::Solid } else { CellTag::LiquidMushy }).collect();
        let history = ThermalHistory::new(&temperature, time, mat.t_liquidus, mat.t_solidus, threshold, self.micro);
        SimulationState {
            time,
            step: 0,
            velocity: vec![Point3::zeros(); n],
            velocity_old: vec![Point3::zeros(); n],
            pressure: vec![0.0; n],
            temperature_old: temperature.clone(),
            temperature,
            solid_fraction: fs,
            flux: vec![0.0; nf],
            flux_old: vec![0.0; nf],
            tags,
            history,
        }
    }

    /// Temperature boundary conditions for a step from `t0` to `t1`.
    pub fn thermal_bc(&self, t0: f64, t1: f64) -> Vec<FaceBc> {
        self.mesh
            .faces
            .iter()
            .map(|face| match face.patch.map(|p| self.patch_bc[p]) {
                Some(bc) => match (bc.value(t0), bc.value(t1)) {
                    (Some(old), Some(new)) => FaceBc::Fixed { old, new },
                    _ => FaceBc::ZeroGradient,
                },
                None => FaceBc::ZeroGradient,
            })
            .collect()
    }

    pub fn stored_energy(&self, state: &SimulationState) -> f64 {
        stored_energy(&self.mesh, &self.material, &state.temperature, &state.solid_fraction)
    }

    /// Advances one time step: classify cells, predict, project, correct,
    /// then solve the energy equation and record the thermal history.
    pub fn advance(&self, state: &mut SimulationState, dt: f64) -> Result<StepReport, SolidifyError> {
        if !(dt > 0.0) {
            return Err(SolidifyError::NonPositiveTimeStep(dt));
        }
        let mesh = &self.mesh;
        let mat = &self.material;
        let (t0, t1) = (state.time, state.time + dt);
        let has_previous = state.step > 0;

        let flow_start = Instant::now();
        let mut flow_solved = false;
        let mut max_divergence = 0.0;
        let (velocity, flux, pressure) = if self.options.convection {
            let map = classify_cells(mesh, &self.stencils, &state.temperature, mat)?;
            let n_active = map.n_active();
            state.tags = map.tags.clone();
            if n_active == 0 {
                (vec![Point3::zeros(); mesh.n_cells()], vec![0.0; mesh.n_faces()], vec![0.0; mesh.n_cells()])
            } else {
                let drag: Vec<f64> = state
                    .solid_fraction
                    .iter()
                    .map(|&f| drag_coefficient(f, mat, dt, self.options.drag_cap))
                    .collect();
                let inp = FlowInput {
                    mesh,
                    stencils: &self.stencils,
                    map: &map,
                    mat,
                    dt,
                    velocity: &state.velocity,
                    flux: &state.flux,
                    previous: has_previous.then_some((&state.velocity_old[..], &state.flux_old[..])),
                    temperature: &state.temperature,
                    drag: &drag,
                    solver: &self.options.solver,
                };
                let (u_star, _) = predictor_step(&inp)?;
                let sol = pressure_step(&inp, &u_star, &state.pressure)?;
                let corr = correct_velocity_and_flux(&inp, &u_star, &sol, self.options.div_tol)?;
                flow_solved = true;
                max_divergence = corr.max_divergence;
                (corr.velocity, corr.flux, sol.pressure)
            }
        } else {
            let threshold = mat.solid_threshold();
            state.tags = state
                .temperature
                .iter()
                .map(|&t| if t < threshold { CellTag::Solid } else { CellTag::LiquidMushy })
                .collect();
            (vec![Point3::zeros(); mesh.n_cells()], vec![0.0; mesh.n_faces()], vec![0.0; mesh.n_cells()])
        };
        let n_active = state.tags.iter().filter(|&&t| t == CellTag::LiquidMushy).count();
        let flow_seconds = flow_start.elapsed().as_secs_f64();

        let energy_start = Instant::now();
        let bc = self.thermal_bc(t0, t1);
        let energy = energy_step(&EnergyInput {
            mesh,
            stencils: &self.stencils,
            mat,
            dt,
            temperature: &state.temperature,
            solid_fraction: &state.solid_fraction,
            bc: &bc,
            flux: self.options.convection.then_some(&flux[..]),
            previous: (self.options.convection && has_previous).then_some((&state.flux[..], &state.temperature_old[..])),
            solver: &self.options.solver,
            options: self.options.energy,
        })?;
        state.history.record(t0, t1, &state.temperature, &energy.temperature, &state.solid_fraction, &energy.solid_fraction);
        let energy_seconds = energy_start.elapsed().as_secs_f64();

        state.velocity_old = std::mem::replace(&mut state.velocity, velocity);
        state.flux_old = std::mem::replace(&mut state.flux, flux);
        state.pressure = pressure;
        state.temperature_old = std::mem::replace(&mut state.temperature, energy.temperature);
        state.solid_fraction = energy.solid_fraction;
        state.time = t1;
        state.step += 1;
        Ok(StepReport {
            time: t1,
            n_active,
            flow_solved,
            flow_seconds,
            energy_seconds,
            outer_iterations: energy.iterations,
            max_divergence,
        })
    }
}
