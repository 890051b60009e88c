use super::active::ActiveSystemMap;
use super::material::MaterialModel;
use super::SolidifyError;
use crate::discretization::{assemble_transport, diffusion_face_coeffs, Convection, DiffusionFace, FaceBc, FaceGradientStencil, TransportInput};
use crate::linsolve::{
    amg_setup, gmres, solve_auto, IdentityPreconditioner, LinearSystem, SolveError, SolveReport, SolverSettings, TripletBuilder,
};
use crate::mesh::{Mesh, Point3};
use nalgebra::Matrix3;

use super::active::reduce_momentum_system;

/// Inputs shared by the three flow sub-steps of one time step.
#[derive(Debug, Clone, Copy)]
pub struct FlowInput<'a> {
    pub mesh: &'a Mesh,
    pub stencils: &'a [FaceGradientStencil],
    pub map: &'a ActiveSystemMap,
    pub mat: &'a MaterialModel,
    pub dt: f64,
    /// Velocity at level n.
    pub velocity: &'a [Point3],
    /// Face fluxes at level n.
    pub flux: &'a [f64],
    /// Velocity and face fluxes at level n-1.
    pub previous: Option<(&'a [Point3], &'a [f64])>,
    /// Temperature at level n (buoyancy).
    pub temperature: &'a [f64],
    /// Darcy coefficient `mu / K` per cell.
    pub drag: &'a [f64],
    pub solver: &'a SolverSettings,
}

impl FlowInput<'_> {
    /// Projection weight `1 / (rho / dt + mu / K)` per cell.
    pub fn projection_weight(&self) -> Vec<f64> {
        self.drag.iter().map(|&d| 1.0 / (self.mat.density / self.dt + d)).collect()
    }

    /// Open faces whose harmonic mobility is at least [`MOBILITY_TOL`] of
    /// the drag-free value `dt / rho`. The rest are treated as walls: the
    /// flux through them is negligible, and keeping them would join liquid
    /// pockets through nearly solid cells into one nearly singular system.
    pub fn flow_faces(&self) -> Vec<bool> {
        let beta = self.projection_weight();
        let threshold = MOBILITY_TOL * self.dt / self.mat.density;
        self.mesh
            .faces
            .iter()
            .enumerate()
            .map(|(f, face)| {
                self.map.is_open(f)
                    && face.neighbor.is_some_and(|nb| 2.0 * beta[face.owner] * beta[nb] / (beta[face.owner] + beta[nb]) >= threshold)
            })
            .collect()
    }
}

fn component(v: &[Point3], k: usize) -> Vec<f64> {
    v.iter().map(|u| u[k]).collect()
}

/// Intermediate velocity from the momentum equation without the pressure
/// gradient: Crank-Nicolson viscous terms, Adams-Bashforth convection,
/// implicit Darcy drag and the Boussinesq source. Solid cells get zero.
pub fn predictor_step(inp: &FlowInput) -> Result<(Vec<Point3>, Vec<SolveReport>), SolidifyError> {
    let mesh = inp.mesh;
    let n = mesh.n_cells();
    let mut u_star = vec![Point3::zeros(); n];
    let map = inp.map;
    if map.active.is_empty() {
        return Ok((u_star, Vec::new()));
    }
    let rho = vec![inp.mat.density; n];
    let mu = vec![inp.mat.viscosity; n];
    let walls = vec![FaceBc::Fixed { old: 0.0, new: 0.0 }; mesh.n_faces()];
    let mut reports = Vec::with_capacity(3);
    for k in 0..3 {
        let phi = component(inp.velocity, k);
        let phi_old = inp.previous.map(|(u, _)| component(u, k));
        let g = inp.mat.gravity[k];
        let source: Vec<f64> = (0..n)
            .map(|c| -g * inp.mat.density * inp.mat.expansion * (inp.temperature[c] - inp.mat.t_ref) * mesh.cell_volume[c])
            .collect();
        let sys = assemble_transport(&TransportInput {
            mesh,
            stencils: inp.stencils,
            capacity: &rho,
            gamma: &mu,
            phi: &phi,
            bc: &walls,
            dt: inp.dt,
            convection: Some(Convection {
                flux: inp.flux,
                previous: inp.previous.map(|(_, f)| f).zip(phi_old.as_deref()),
            }),
            source: Some(&source),
            cross_diffusion: true,
        })?;
        let red = reduce_momentum_system(&sys, map, inp.drag, &mesh.cell_volume);
        let x0: Vec<f64> = map.active.iter().map(|&c| phi[c]).collect();
        let (x, rep) = solve_auto(&red.matrix, &red.rhs, &x0, inp.solver)?;
        for (r, &c) in map.active.iter().enumerate() {
            u_star[c][k] = x[r];
        }
        reports.push(rep);
    }
    Ok((u_star, reports))
}

/// Result of the pressure solve, with the face coefficients reused by the
/// correction.
#[derive(Debug, Clone)]
pub struct PressureSolution {
    /// Pressure per cell, zero on solid cells.
    pub pressure: Vec<f64>,
    /// Face coefficients of `beta_f dA n.grad(P)` on open faces.
    pub faces: Vec<Option<DiffusionFace>>,
    /// Predicted face fluxes (zero on closed faces).
    pub predicted_flux: Vec<f64>,
    /// Cells whose pressure was pinned to zero, one per connected liquid
    /// region.
    pub pinned: Vec<usize>,
    pub report: Option<SolveReport>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

const GMRES_RESTART: usize = 60;

/// Relative face mobility below which a face carries no flux.
pub const MOBILITY_TOL: f64 = 1e-6;

/// Groups active cells connected through `open` faces and returns the
/// lowest-numbered cell of each group.
pub fn liquid_regions(mesh: &Mesh, map: &ActiveSystemMap, open: &[bool]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..mesh.n_cells()).collect();
    for (f, face) in mesh.faces.iter().enumerate() {
        if let (true, Some(nb)) = (open[f], face.neighbor) {
            let (a, b) = (find(&mut parent, face.owner), find(&mut parent, nb));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    map.active.iter().copied().filter(|&c| find(&mut parent, c) == c).collect()
}

/// Reduced pressure system before solving.
#[derive(Debug, Clone)]
pub struct PressureSystem {
    pub system: LinearSystem,
    pub faces: Vec<Option<DiffusionFace>>,
    pub predicted_flux: Vec<f64>,
    pub pinned: Vec<usize>,
}

/// Assembles the equation for the pressure that makes the corrected face
/// fluxes divergence-free on every active cell.
///
/// With `beta = 1 / (rho / dt + mu / K)` and `beta_f` its harmonic face
/// mean, the corrected flux is
/// `F = beta_f (u*/beta)_f . n dA - beta_f dA n.grad(P)_f`, with the face-normal
/// gradient split into a direct and a cross part through the (possibly
/// smeared) gradient stencil. Closed faces, including those below the
/// mobility threshold of [`FlowInput::flow_faces`], carry no flux. Each
/// connected liquid region has its pressure pinned to zero at one cell.
pub fn assemble_pressure(inp: &FlowInput, u_star: &[Point3]) -> Result<PressureSystem, SolidifyError> {
    let mesh = inp.mesh;
    let map = inp.map;
    let beta = inp.projection_weight();
    let mut faces = vec![None; mesh.n_faces()];
    let mut predicted_flux = vec![0.0; mesh.n_faces()];
    let open = inp.flow_faces();
    let pinned = liquid_regions(mesh, map, &open);
    let mut is_pinned = vec![false; mesh.n_cells()];
    for &c in &pinned {
        is_pinned[c] = true;
    }
    let na = map.n_active();
    let mut a = TripletBuilder::with_capacity(na, na, na + 20 * mesh.n_faces());
    let mut rhs = vec![0.0; na];
    let row = |c: usize| map.row_of[c].expect("active cell");
    for (f, face) in mesh.faces.iter().enumerate() {
        if !open[f] {
            continue;
        }
        let (p, nb) = (face.owner, face.neighbor.expect("open faces are interior"));
        let beta_f = 2.0 * beta[p] * beta[nb] / (beta[p] + beta[nb]);
        let df = diffusion_face_coeffs(mesh, map.stencil(f, inp.stencils), beta_f)?;
        // Interpolating the driving force u*/beta rather than u* keeps the
        // face flux consistent with a jump in the Darcy drag.
        let force = 0.5 * (u_star[p] / beta[p] + u_star[nb] / beta[nb]);
        let fstar = beta_f * force.dot(&mesh.face_normal[f]) * mesh.face_area[f];
        predicted_flux[f] = fstar;
        for (cell, sign) in [(p, 1.0), (nb, -1.0)] {
            if is_pinned[cell] {
                continue;
            }
            let r = row(cell);
            a.add(r, row(p), sign * df.direct);
            a.add(r, row(nb), -sign * df.direct);
            for &(c, coef) in &df.cross {
                a.add(r, row(c), -sign * coef);
            }
            rhs[r] -= sign * fstar;
        }
        faces[f] = Some(df);
    }
    for &c in &pinned {
        a.add(row(c), row(c), 1.0);
    }
    Ok(PressureSystem { system: LinearSystem { matrix: a.build(), rhs }, faces, predicted_flux, pinned })
}

/// Assembles and solves the pressure equation; `p0` is the initial guess.
pub fn pressure_step(inp: &FlowInput, u_star: &[Point3], p0: &[f64]) -> Result<PressureSolution, SolidifyError> {
    let map = inp.map;
    let PressureSystem { system, faces, predicted_flux, pinned } = assemble_pressure(inp, u_star)?;
    let na = map.n_active();
    let x0: Vec<f64> = map.active.iter().map(|&c| if pinned.binary_search(&c).is_ok() { 0.0 } else { p0[c] }).collect();
    let (x, report) = if pinned.len() == na {
        (vec![0.0; na], None)
    } else {
        // Drag makes the row scales span many decades; equilibrate them so
        // the residual tolerance applies to every cell alike.
        let mut matrix = system.matrix;
        let mut rhs = system.rhs;
        for r in 0..na {
            let d = matrix.get(r, r);
            let (_, vals) = matrix.row_mut(r);
            for v in vals {
                *v /= d;
            }
            rhs[r] /= d;
        }
        // Aim below the configured tolerance so that continuity holds in
        // slow cells too. Skewed cells next to strong drag contrasts make
        // the system too nonsymmetric for BiCGSTAB; GMRES at the configured
        // tolerance takes over then.
        let tight = SolverSettings { tol: inp.solver.tol.min(1e-14), ..*inp.solver };
        let (x, rep) = match solve_auto(&matrix, &rhs, &x0, &tight) {
            Err(e @ SolveError::BothDiverged { .. }) => {
                let (x, rep) = match amg_setup(&matrix, inp.solver.amg) {
                    Ok(h) => gmres(&matrix, &rhs, &x0, &h, inp.solver.tol, inp.solver.max_iter, GMRES_RESTART)?,
                    Err(_) => gmres(&matrix, &rhs, &x0, &IdentityPreconditioner, inp.solver.tol, inp.solver.max_iter, GMRES_RESTART)?,
                };
                if rep.diverged {
                    return Err(e.into());
                }
                (x, rep)
            }
            r => r?,
        };
        (x, Some(rep))
    };
    let mut pressure = vec![0.0; inp.mesh.n_cells()];
    for (r, &c) in map.active.iter().enumerate() {
        pressure[c] = x[r];
    }
    Ok(PressureSolution { pressure, faces, predicted_flux, pinned, report })
}

/// Volume change per step, relative to the cell volume, below which a
/// cell's flux imbalance is accepted regardless of its gross flux.
pub const VOLUME_TOL: f64 = 1e-12;

/// Corrected cell velocities and face fluxes at level n+1.
#[derive(Debug, Clone)]
pub struct Correction {
    pub velocity: Vec<Point3>,
    pub flux: Vec<f64>,
    /// Largest ratio of net to gross face flux over active cells.
    pub max_divergence: f64,
}

/// Cell pressure gradient fitted in the least-squares sense to the
/// face-normal gradients, ignoring directions without open faces.
fn fit_gradient(m: &Matrix3<f64>, r: &Point3) -> Point3 {
    let eig = m.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut g = Point3::zeros();
    for k in 0..3 {
        let lam = eig.eigenvalues[k];
        if lam > 1e-8 * top {
            let v: Point3 = eig.eigenvectors.column(k).into();
            g += v * (v.dot(r) / lam);
        }
    }
    g
}

/// Applies the pressure correction to the face fluxes and to the cell
/// velocities.
///
/// The cell gradient is the least-squares fit to the face-normal gradients
/// that corrected the fluxes, so a pressure field balancing the predicted
/// fluxes also balances the cell velocities.
///
/// Fails when an active cell's net flux exceeds `div_tol` times its gross
/// flux, unless the volume it would gain over the step is below
/// [`VOLUME_TOL`] of the cell volume. The second test only matters once the
/// flow has stalled and the fluxes are at round-off level.
pub fn correct_velocity_and_flux(
    inp: &FlowInput,
    u_star: &[Point3],
    sol: &PressureSolution,
    div_tol: f64,
) -> Result<Correction, SolidifyError> {
    let mesh = inp.mesh;
    let map = inp.map;
    let beta = inp.projection_weight();
    let n = mesh.n_cells();
    let mut flux = vec![0.0; mesh.n_faces()];
    let mut normal_products = vec![Matrix3::zeros(); n];
    let mut projected = vec![Point3::zeros(); n];
    let mut net = vec![0.0; n];
    let mut gross = vec![0.0; n];
    for (f, face) in mesh.faces.iter().enumerate() {
        let Some(df) = &sol.faces[f] else { continue };
        let (p, nb) = (face.owner, face.neighbor.expect("open faces are interior"));
        let g = df.direct * (sol.pressure[nb] - sol.pressure[p]) + df.cross_value(&sol.pressure, 0.0);
        let q = sol.predicted_flux[f] - g;
        flux[f] = q;
        net[p] += q;
        net[nb] -= q;
        gross[p] += q.abs();
        gross[nb] += q.abs();
        let beta_f = 2.0 * beta[p] * beta[nb] / (beta[p] + beta[nb]);
        let normal = mesh.face_normal[f];
        let dpdn = g / (beta_f * mesh.face_area[f]);
        for c in [p, nb] {
            normal_products[c] += normal * normal.transpose();
            projected[c] += normal * dpdn;
        }
    }
    let mut velocity = vec![Point3::zeros(); n];
    for &c in &map.active {
        velocity[c] = u_star[c] - fit_gradient(&normal_products[c], &projected[c]) * beta[c];
    }
    let mut max_divergence: f64 = 0.0;
    for &c in &map.active {
        if net[c].abs() * inp.dt <= VOLUME_TOL * mesh.cell_volume[c] {
            continue;
        }
        let ratio = net[c].abs() / gross[c];
        max_divergence = max_divergence.max(ratio);
        if ratio > div_tol {
            return Err(SolidifyError::Divergence { cell: c, net: net[c], gross: gross[c] });
        }
    }
    Ok(Correction { velocity, flux, max_divergence })
}
