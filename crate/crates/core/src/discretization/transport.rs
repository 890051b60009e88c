use super::{DiscretizationError, FaceGradientStencil};
use crate::linsolve::{LinearSystem, TripletBuilder};
use crate::mesh::Mesh;

/// Boundary condition on one boundary face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceBc {
    /// Prescribed face value at the old and new time levels.
    Fixed { old: f64, new: f64 },
    ZeroGradient,
}

/// Direct and cross parts of `Gamma dA n.grad(phi)` at one face.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionFace {
    /// Couples `phi_neighbour - phi_owner` (or the boundary value minus the
    /// owner value).
    pub direct: f64,
    /// Cell coefficients of the non-orthogonal correction.
    pub cross: Vec<(usize, f64)>,
    /// Coefficient of the boundary face value in the correction.
    pub cross_boundary: f64,
}

impl DiffusionFace {
    pub fn cross_value(&self, field: &[f64], boundary_value: f64) -> f64 {
        self.cross.iter().map(|&(c, a)| a * field[c]).sum::<f64>() + self.cross_boundary * boundary_value
    }
}

/// Diffusion coefficients of face `face` for face diffusivity `gamma`.
pub fn diffusion_face_coeffs(
    mesh: &Mesh,
    stencil: &FaceGradientStencil,
    gamma: f64,
) -> Result<DiffusionFace, DiscretizationError> {
    let face = stencil.face;
    let n = mesh.face_normal[face];
    let d = mesh.face_distance_vector(face);
    let nd = n.dot(&d);
    if nd <= 0.0 {
        return Err(DiscretizationError::NonOrthogonalFace { face, n_dot_d: nd });
    }
    let ga = gamma * mesh.face_area[face];
    let t = (n - d / nd) * ga;
    let cross = stencil.cells.iter().zip(&stencil.coeffs).map(|(&c, a)| (c, t.dot(a))).collect();
    Ok(DiffusionFace { direct: ga / nd, cross, cross_boundary: t.dot(&stencil.boundary) })
}

/// Advected quantity through a face: `volume_flux` times the mean of the
/// two adjacent values.
pub fn convection_face_flux(volume_flux: f64, phi_owner: f64, phi_other: f64) -> f64 {
    volume_flux * 0.5 * (phi_owner + phi_other)
}

fn boundary_value(bc: FaceBc, phi_owner: f64) -> f64 {
    match bc {
        FaceBc::Fixed { old, .. } => old,
        FaceBc::ZeroGradient => phi_owner,
    }
}

/// Net convective outflow `sum_f cap_f F_f phi_f` per cell. Face fluxes are
/// oriented from owner to neighbour.
pub fn net_convection(mesh: &Mesh, capacity: &[f64], flux: &[f64], phi: &[f64], bc: &[FaceBc]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces.iter().enumerate() {
        if flux[f] == 0.0 {
            continue;
        }
        let p = face.owner;
        match face.neighbor {
            Some(nb) => {
                let cap = 0.5 * (capacity[p] + capacity[nb]);
                let q = cap * convection_face_flux(flux[f], phi[p], phi[nb]);
                out[p] += q;
                out[nb] -= q;
            }
            None => {
                let phi_b = boundary_value(bc[f], phi[p]);
                out[p] += capacity[p] * convection_face_flux(flux[f], phi[p], phi_b);
            }
        }
    }
    out
}

/// Convection inputs at the current and, when available, previous level.
#[derive(Debug, Clone, Copy)]
pub struct Convection<'a> {
    /// Face volume fluxes at level n.
    pub flux: &'a [f64],
    /// Face fluxes and field at level n-1; absent on the first step.
    pub previous: Option<(&'a [f64], &'a [f64])>,
}

/// Everything needed to assemble one time step of the scalar transport
/// equation `cap d(phi)/dt + div(cap u phi) = div(Gamma grad phi) + S`.
#[derive(Debug, Clone, Copy)]
pub struct TransportInput<'a> {
    pub mesh: &'a Mesh,
    pub stencils: &'a [FaceGradientStencil],
    /// Per-cell heat capacity or density multiplying the time derivative.
    pub capacity: &'a [f64],
    /// Per-cell diffusivity; faces use the arithmetic mean.
    pub gamma: &'a [f64],
    /// Field at level n.
    pub phi: &'a [f64],
    /// Per-face boundary condition, ignored on interior faces.
    pub bc: &'a [FaceBc],
    pub dt: f64,
    pub convection: Option<Convection<'a>>,
    /// Volume-integrated source per cell.
    pub source: Option<&'a [f64]>,
    pub cross_diffusion: bool,
}

/// Assembles `A phi^{n+1} = b` with Crank-Nicolson direct diffusion,
/// explicit cross diffusion, and Adams-Bashforth convection (explicit Euler
/// when no previous level exists).
///
/// Rows are volume-integrated: the diagonal holds `cap dV / dt` plus half
/// the direct diffusion coefficients, so callers can add implicit sources
/// to the diagonal and explicit ones to the right-hand side directly.
pub fn assemble_transport(inp: &TransportInput) -> Result<LinearSystem, DiscretizationError> {
    let mesh = inp.mesh;
    let n = mesh.n_cells();
    if !(inp.dt > 0.0) {
        return Err(DiscretizationError::NonPositiveTimeStep(inp.dt));
    }
    for (what, len, expected) in [
        ("capacity", inp.capacity.len(), n),
        ("gamma", inp.gamma.len(), n),
        ("phi", inp.phi.len(), n),
        ("bc", inp.bc.len(), mesh.n_faces()),
        ("stencils", inp.stencils.len(), mesh.n_faces()),
    ] {
        if len != expected {
            return Err(DiscretizationError::LengthMismatch { what, len, expected });
        }
    }

    let phi = inp.phi;
    let mut a = TripletBuilder::with_capacity(n, n, n + 4 * mesh.n_faces());
    let mut rhs = vec![0.0; n];
    for c in 0..n {
        let m = inp.capacity[c] * mesh.cell_volume[c] / inp.dt;
        a.add(c, c, m);
        rhs[c] = m * phi[c];
    }

    for (f, face) in mesh.faces.iter().enumerate() {
        let p = face.owner;
        match face.neighbor {
            Some(nb) => {
                let gamma = 0.5 * (inp.gamma[p] + inp.gamma[nb]);
                if gamma == 0.0 {
                    continue;
                }
                let df = diffusion_face_coeffs(mesh, &inp.stencils[f], gamma)?;
                let h = 0.5 * df.direct;
                a.add(p, p, h);
                a.add(p, nb, -h);
                a.add(nb, nb, h);
                a.add(nb, p, -h);
                let mut q = h * (phi[nb] - phi[p]);
                if inp.cross_diffusion {
                    q += df.cross_value(phi, 0.0);
                }
                rhs[p] += q;
                rhs[nb] -= q;
            }
            None => {
                if let FaceBc::Fixed { old, new } = inp.bc[f] {
                    let nd = mesh.face_normal[f].dot(&mesh.face_distance_vector(f));
                    if nd <= 0.0 {
                        return Err(DiscretizationError::NonOrthogonalFace { face: f, n_dot_d: nd });
                    }
                    let h = 0.5 * inp.gamma[p] * mesh.face_area[f] / nd;
                    a.add(p, p, h);
                    rhs[p] += h * new + h * (old - phi[p]);
                }
            }
        }
    }

    if let Some(conv) = inp.convection {
        let current = net_convection(mesh, inp.capacity, conv.flux, phi, inp.bc);
        match conv.previous {
            Some((flux_old, phi_old)) => {
                let old = net_convection(mesh, inp.capacity, flux_old, phi_old, inp.bc);
                for c in 0..n {
                    rhs[c] -= 1.5 * current[c] - 0.5 * old[c];
                }
            }
            None => {
                for c in 0..n {
                    rhs[c] -= current[c];
                }
            }
        }
    }

    if let Some(s) = inp.source {
        for c in 0..n {
            rhs[c] += s[c];
        }
    }
    Ok(LinearSystem { matrix: a.build(), rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::gradient_stencils;
    use crate::linsolve::dense_solve;
    use crate::mesh::RawMesh;

    #[test]
    fn hand_evaluated_convective_flux() {
        assert_eq!(convection_face_flux(2.0, 1.0, 3.0), 4.0);
        assert_eq!(convection_face_flux(0.0, 1.0, 3.0), 0.0);
    }

    #[test]
    fn cartesian_face_has_no_cross_term() {
        // Four cells along x with unit cross-section: dA = 1, |d| = h.
        let h = 0.25;
        let mesh = Mesh::from_raw(RawMesh::structured_box([4, 1, 1], [1.0, 1.0, 1.0])).unwrap();
        let w = mesh.vertex_weights().unwrap();
        let st = gradient_stencils(&mesh, &w).unwrap();
        for f in mesh.interior_faces() {
            let df = diffusion_face_coeffs(&mesh, &st[f], 1.0).unwrap();
            assert!((df.direct - 1.0 / h).abs() < 1e-12);
            assert!(df.cross.iter().all(|&(_, a)| a.abs() < 1e-12));
            let zero = diffusion_face_coeffs(&mesh, &st[f], 0.0).unwrap();
            assert_eq!(zero.direct, 0.0);
            assert!(zero.cross.iter().all(|&(_, a)| a == 0.0));
        }
    }

    #[test]
    fn skewed_face_cross_term_annihilates_constants() {
        let raw = RawMesh::structured_box([3, 3, 3], [1.0, 1.0, 1.0]).map_vertices(|p| p + nalgebra::Vector3::new(0.3 * p.z, 0.0, 0.0));
        let mesh = Mesh::from_raw(raw).unwrap();
        let w = mesh.vertex_weights().unwrap();
        let st = gradient_stencils(&mesh, &w).unwrap();
        let mut any_nonzero = false;
        for f in mesh.interior_faces() {
            let df = diffusion_face_coeffs(&mesh, &st[f], 1.0).unwrap();
            let sum: f64 = df.cross.iter().map(|&(_, a)| a).sum::<f64>() + df.cross_boundary;
            assert!(sum.abs() < 1e-12);
            any_nonzero |= df.cross.iter().any(|&(_, a)| a.abs() > 1e-6);
        }
        assert!(any_nonzero);
    }

    #[test]
    fn three_cell_slab_steady_midpoint() {
        let mesh = Mesh::from_raw(RawMesh::structured_box([3, 1, 1], [3.0, 1.0, 1.0])).unwrap();
        let w = mesh.vertex_weights().unwrap();
        let st = gradient_stencils(&mesh, &w).unwrap();
        let mut bc = vec![FaceBc::ZeroGradient; mesh.n_faces()];
        for &f in &mesh.patches[mesh.patch_index("xmin").unwrap()].faces {
            bc[f] = FaceBc::Fixed { old: 0.0, new: 0.0 };
        }
        for &f in &mesh.patches[mesh.patch_index("xmax").unwrap()].faces {
            bc[f] = FaceBc::Fixed { old: 1.0, new: 1.0 };
        }
        let mut phi = vec![0.3; 3];
        let ones = vec![1.0; 3];
        for _ in 0..200 {
            let sys = assemble_transport(&TransportInput {
                mesh: &mesh,
                stencils: &st,
                capacity: &ones,
                gamma: &ones,
                phi: &phi,
                bc: &bc,
                dt: 1.0,
                convection: None,
                source: None,
                cross_diffusion: true,
            })
            .unwrap();
            phi = dense_solve(&sys.matrix, &sys.rhs).unwrap();
        }
        let mid = (0..3).find(|&c| (mesh.cell_centroid[c].x - 1.5).abs() < 1e-12).unwrap();
        assert!((phi[mid] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_positive_time_step() {
        let mesh = Mesh::from_raw(RawMesh::structured_box([1, 1, 1], [1.0, 1.0, 1.0])).unwrap();
        let w = mesh.vertex_weights().unwrap();
        let st = gradient_stencils(&mesh, &w).unwrap();
        let one = [1.0];
        let bc = vec![FaceBc::ZeroGradient; 6];
        let inp = TransportInput {
            mesh: &mesh,
            stencils: &st,
            capacity: &one,
            gamma: &one,
            phi: &one,
            bc: &bc,
            dt: 0.0,
            convection: None,
            source: None,
            cross_diffusion: false,
        };
        assert!(matches!(assemble_transport(&inp), Err(DiscretizationError::NonPositiveTimeStep(_))));
    }
}
