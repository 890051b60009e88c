use std::collections::BTreeMap;
use std::path::Path;

use super::config::{Functional, RunConfig};
use super::output::{write_probes, write_vtk, ProbeTraces};
use super::AppError;
use crate::mesh::Mesh;
use crate::microstructure::{finite_max, finite_min};
use crate::solidify::{SimulationState, Solidifier, StepReport};

/// Everything a deterministic run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub mesh: Mesh,
    pub state: SimulationState,
    pub reports: Vec<StepReport>,
    pub probes: ProbeTraces,
    pub functionals: BTreeMap<Functional, f64>,
    /// Whether the run ended because every cell had solidified.
    pub stopped_solid: bool,
}

impl RunResult {
    pub fn functional(&self, f: Functional) -> f64 {
        self.functionals[&f]
    }
}

/// Steps the solidifier from the initial temperature until every cell is
/// solid (when requested) or the end time is reached. Field snapshots,
/// probe traces and functionals are written to `out` when given.
pub fn run_deterministic(cfg: &RunConfig, out: Option<&Path>) -> Result<RunResult, AppError> {
    let mesh = cfg.mesh.load()?;
    let patch_bc = cfg.patch_conditions(&mesh)?;
    let mut probes = ProbeTraces::new(&mesh, &cfg.probes)?;
    let solver = Solidifier::new(mesh, cfg.material.clone(), patch_bc, cfg.options)?;
    let mut state = solver.initial_state(vec![cfg.initial_temperature; solver.mesh.n_cells()], 0.0);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| AppError::Io(dir.to_path_buf(), e))?;
    }
    probes.record(state.time, &state.temperature);

    let mut reports = Vec::new();
    let mut stopped_solid = false;
    // Tolerate round-off in the accumulated time.
    while state.time < cfg.end_time - 1e-9 * cfg.dt {
        let dt = cfg.dt.min(cfg.end_time - state.time);
        let step = state.step + 1;
        let report = solver.advance(&mut state, dt).map_err(|source| AppError::Step { step, time: state.time, source })?;
        reports.push(report);
        let courant = courant_number(&solver.mesh, &state.flux, dt);
        if courant > cfg.max_courant {
            return Err(AppError::Courant { step, courant, limit: cfg.max_courant });
        }
        probes.record(state.time, &state.temperature);
        if let Some(dir) = out {
            if cfg.output_every > 0 && state.step % cfg.output_every == 0 {
                write_snapshot(&solver.mesh, &state, &dir.join(format!("fields_{:06}.vtk", state.step)))?;
            }
        }
        if cfg.stop_when_solid && state.fully_solid() {
            stopped_solid = true;
            break;
        }
    }

    let functionals = functionals(&state, &probes);
    if let Some(dir) = out {
        write_final(&solver.mesh, &state, &dir.join("final.vtk"))?;
        write_probes(&probes, &dir.join("probes.csv"))?;
        write_functionals(&functionals, &dir.join("functionals.csv"))?;
    }
    Ok(RunResult { mesh: solver.mesh, state, reports, probes, functionals, stopped_solid })
}

fn functionals(state: &SimulationState, probes: &ProbeTraces) -> BTreeMap<Functional, f64> {
    let h = &state.history;
    let hottest = match probes.hottest() {
        Some(p) => probes.values.last().expect("recorded")[p],
        None => finite_max(&state.temperature),
    };
    BTreeMap::from([
        (Functional::SolidificationTime, h.solidification_time().unwrap_or(f64::NAN)),
        (Functional::MaxSdas, finite_max(&h.sdas_field())),
        (Functional::MinYield, finite_min(&h.yield_field())),
        (Functional::MaxGrain, finite_max(&h.grain_field())),
        (Functional::HottestProbeTemperature, hottest),
    ])
}

/// Largest `dt * outflow / volume` over the cells.
pub fn courant_number(mesh: &Mesh, flux: &[f64], dt: f64) -> f64 {
    let mut outflow = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let q = flux[f];
        if q > 0.0 {
            outflow[face.owner] += q;
        } else if let Some(nb) = face.neighbor {
            outflow[nb] -= q;
        }
    }
    outflow.iter().zip(&mesh.cell_volume).map(|(q, v)| dt * q / v).fold(0.0, f64::max)
}

fn write_snapshot(mesh: &Mesh, state: &SimulationState, path: &Path) -> Result<(), AppError> {
    let (ux, uy, uz) = velocity_components(state);
    write_vtk(
        mesh,
        &[
            ("temperature", &state.temperature),
            ("solid_fraction", &state.solid_fraction),
            ("pressure", &state.pressure),
            ("velocity_x", &ux),
            ("velocity_y", &uy),
            ("velocity_z", &uz),
        ],
        path,
    )
}

fn write_final(mesh: &Mesh, state: &SimulationState, path: &Path) -> Result<(), AppError> {
    let (ux, uy, uz) = velocity_components(state);
    let h = &state.history;
    write_vtk(
        mesh,
        &[
            ("temperature", &state.temperature),
            ("solid_fraction", &state.solid_fraction),
            ("pressure", &state.pressure),
            ("velocity_x", &ux),
            ("velocity_y", &uy),
            ("velocity_z", &uz),
            ("cooling_rate", &h.cooling_rates()),
            ("sdas", &h.sdas_field()),
            ("yield_strength", &h.yield_field()),
            ("grain_radius", &h.grain_field()),
        ],
        path,
    )
}

fn velocity_components(state: &SimulationState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let c = |k: usize| state.velocity.iter().map(|u| u[k]).collect();
    (c(0), c(1), c(2))
}

fn write_functionals(values: &BTreeMap<Functional, f64>, path: &Path) -> Result<(), AppError> {
    let mut text = String::from("functional,value\n");
    for (f, v) in values {
        text.push_str(&format!("{},{}\n", f.name(), v));
    }
    std::fs::write(path, text).map_err(|e| AppError::Io(path.to_path_buf(), e))
}
