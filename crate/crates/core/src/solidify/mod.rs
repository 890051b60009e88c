//! Fractional-step integrator for alloy solidification with natural
//! convection.
//!
//! Each step tags cells as solid or liquid/mushy from the previous
//! temperature, solves momentum and pressure only on the liquid/mushy
//! cells, and then solves the energy equation with an iteratively
//! linearised latent-heat source.

mod active;
mod energy;
mod flow;
mod material;
mod state;

pub use active::{classify_cells, reduce_momentum_system, smear_gradient_stencil, ActiveSystemMap, CellTag, FaceCase};
pub use energy::{energy_step, latent_source, linearization_point, stored_energy, EnergyInput, EnergyOptions, EnergyOutcome};
pub use flow::{
    assemble_pressure, correct_velocity_and_flux, liquid_regions, predictor_step, pressure_step, Correction, FlowInput, PressureSolution,
    PressureSystem,
};
pub use material::{drag_coefficient, permeability, solid_fraction, solid_fraction_inverse, MaterialModel, PropertyTable};
pub use state::{SimulationState, Solidifier, SolidifyOptions, StepReport, ThermalBc};

use crate::discretization::DiscretizationError;
use crate::linsolve::SolveError;
use crate::mesh::MeshError;

#[derive(Debug, thiserror::Error)]
pub enum SolidifyError {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("face {face}: every cell of a smeared stencil is solid")]
    AllNeighborsSolid { face: usize },
    #[error("cell {cell}: net flux {net:e} exceeds tolerance (gross {gross:e})")]
    Divergence { cell: usize, net: f64, gross: f64 },
    #[error("latent-heat iteration did not converge in {iterations} iterations (defect {defect:e})")]
    EnergyNotConverged { iterations: usize, defect: f64 },
    #[error("{given} boundary conditions for {patches} patches")]
    PatchCount { given: usize, patches: usize },
    #[error("time step must be positive, got {0}")]
    NonPositiveTimeStep(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
