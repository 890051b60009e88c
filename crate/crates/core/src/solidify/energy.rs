use super::material::{solid_fraction, solid_fraction_inverse, MaterialModel};
use super::SolidifyError;
use crate::discretization::{assemble_transport, Convection, FaceBc, FaceGradientStencil, TransportInput};
use crate::linsolve::{solve_auto, SolverSettings};
use crate::mesh::Mesh;

/// Settings of the latent-heat outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    /// Under-relaxation of the solid-fraction update.
    pub omega: f64,
    pub tol: f64,
    pub max_outer: usize,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { omega: 1.0, tol: 1e-6, max_outer: 50 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyInput<'a> {
    pub mesh: &'a Mesh,
    pub stencils: &'a [FaceGradientStencil],
    pub mat: &'a MaterialModel,
    pub dt: f64,
    /// Temperature at level n.
    pub temperature: &'a [f64],
    /// Solid fraction at level n.
    pub solid_fraction: &'a [f64],
    pub bc: &'a [FaceBc],
    /// Face fluxes at level n+1.
    pub flux: Option<&'a [f64]>,
    /// Face fluxes at level n and temperature at level n-1.
    pub previous: Option<(&'a [f64], &'a [f64])>,
    pub solver: &'a SolverSettings,
    pub options: EnergyOptions,
}

#[derive(Debug, Clone)]
pub struct EnergyOutcome {
    pub temperature: Vec<f64>,
    pub solid_fraction: Vec<f64>,
    pub iterations: usize,
    /// Largest gap between the final solid fraction and the curve at the
    /// final temperature.
    pub defect: f64,
}

/// Temperature and slope about which the solid fraction is linearised.
///
/// Inside the freezing range this is the temperature consistent with the
/// current solid fraction, so a cell that overshoots a kink is pulled back
/// along the curve instead of jumping between branches. Fully liquid or
/// fully solid cells that have not left their phase get a zero slope.
pub fn linearization_point(mat: &MaterialModel, t_m: f64, fs_m: f64) -> (f64, f64) {
    if fs_m <= 0.0 {
        if t_m >= mat.t_liquidus {
            (t_m, 0.0)
        } else {
            (mat.t_liquidus, mat.scheil(mat.t_liquidus).1)
        }
    } else if fs_m >= 1.0 {
        let lo = mat.solid_threshold();
        if t_m < lo {
            (t_m, 0.0)
        } else {
            (lo, solid_fraction(lo, mat).1)
        }
    } else {
        // Clamp onto the closed freezing range so round-off at either end
        // still sees the one-sided slope.
        let t = solid_fraction_inverse(fs_m, mat).clamp(mat.solid_threshold(), mat.t_liquidus);
        let slope = if t >= mat.t_liquidus { mat.scheil(t).1 } else { solid_fraction(t, mat).1 };
        (t, slope)
    }
}

/// Latent-heat source coefficients `(S_p, S_c)` of one cell, so that the
/// volume-integrated release over the step is `(S_p T + S_c) / dt`.
pub fn latent_source(mat: &MaterialModel, volume: f64, t_m: f64, fs_m: f64, fs_old: f64) -> (f64, f64) {
    let (t_star, d) = linearization_point(mat, t_m, fs_m);
    let scale = mat.density * mat.latent_heat * volume;
    (scale * d, scale * (fs_m - fs_old - d * t_star))
}

/// Solves the energy equation with the linearised latent-heat source.
///
/// After each solve the solid fraction follows its linearisation, clipped
/// to `[0, 1]` and under-relaxed. The loop stops once the solid fraction
/// agrees with the curve at the new temperature and successive
/// temperatures agree, both to the relative tolerance.
pub fn energy_step(inp: &EnergyInput) -> Result<EnergyOutcome, SolidifyError> {
    let mesh = inp.mesh;
    let mat = inp.mat;
    let n = mesh.n_cells();
    let capacity = vec![mat.density * mat.specific_heat; n];
    let gamma: Vec<f64> = inp.temperature.iter().map(|&t| mat.conductivity.eval(t)).collect();
    let base = assemble_transport(&TransportInput {
        mesh,
        stencils: inp.stencils,
        capacity: &capacity,
        gamma: &gamma,
        phi: inp.temperature,
        bc: inp.bc,
        dt: inp.dt,
        convection: inp.flux.map(|flux| Convection { flux, previous: inp.previous }),
        source: None,
        cross_diffusion: true,
    })?;

    let fs_old = inp.solid_fraction;
    let omega = inp.options.omega;
    let mut t_m = inp.temperature.to_vec();
    let mut fs_m = fs_old.to_vec();
    let mut defect = f64::INFINITY;
    for m in 0..inp.options.max_outer {
        let mut sys = base.clone();
        let mut lin = Vec::with_capacity(n);
        for c in 0..n {
            lin.push(linearization_point(mat, t_m[c], fs_m[c]));
            let (sp, sc) = latent_source(mat, mesh.cell_volume[c], t_m[c], fs_m[c], fs_old[c]);
            if sp != 0.0 {
                *sys.matrix.get_mut(c, c).expect("diagonal entry") -= sp / inp.dt;
            }
            sys.rhs[c] += sc / inp.dt;
        }
        let (t_next, _) = solve_auto(&sys.matrix, &sys.rhs, &t_m, inp.solver)?;
        defect = 0.0;
        let mut t_change: f64 = 0.0;
        let mut t_scale: f64 = 0.0;
        for c in 0..n {
            let (t_star, d) = lin[c];
            let f_lin = (fs_m[c] + d * (t_next[c] - t_star)).clamp(0.0, 1.0);
            fs_m[c] = (1.0 - omega) * fs_m[c] + omega * f_lin;
            defect = defect.max((fs_m[c] - solid_fraction(t_next[c], mat).0).abs());
            t_change = t_change.max((t_next[c] - t_m[c]).abs());
            t_scale = t_scale.max(t_next[c].abs());
        }
        t_m = t_next;
        // The first solve moves the temperature by a whole step, so only the
        // consistency of the solid fraction is meaningful there.
        if defect < inp.options.tol && (m == 0 || t_change <= inp.options.tol * t_scale) {
            return Ok(EnergyOutcome { temperature: t_m, solid_fraction: fs_m, iterations: m + 1, defect });
        }
    }
    Err(SolidifyError::EnergyNotConverged { iterations: inp.options.max_outer, defect })
}

/// Stored energy `sum rho dV (C_p T - L_f f_s)`.
pub fn stored_energy(mesh: &Mesh, mat: &MaterialModel, temperature: &[f64], fs: &[f64]) -> f64 {
    (0..mesh.n_cells())
        .map(|c| mat.density * mesh.cell_volume[c] * (mat.specific_heat * temperature[c] - mat.latent_heat * fs[c]))
        .sum()
}
