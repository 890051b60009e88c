mod common;

use proptest::prelude::*;
use solidcast::discretization::{
    assemble_transport, face_gradient, gradient_stencils, Convection, FaceBc, FaceGradientStencil, TransportInput,
};
use solidcast::linsolve::{solve_auto, SolverSettings};
use solidcast::mesh::{Mesh, Point3, RawMesh};

struct Slab {
    mesh: Mesh,
    stencils: Vec<FaceGradientStencil>,
}

impl Slab {
    fn new(raw: RawMesh) -> Self {
        let mesh = Mesh::from_raw(raw).unwrap();
        let w = mesh.vertex_weights().unwrap();
        let stencils = gradient_stencils(&mesh, &w).unwrap();
        Self { mesh, stencils }
    }

    fn bc(&self, fixed: &[(&str, f64)]) -> Vec<FaceBc> {
        let mut bc = vec![FaceBc::ZeroGradient; self.mesh.n_faces()];
        for &(name, v) in fixed {
            for &f in &self.mesh.patches[self.mesh.patch_index(name).unwrap()].faces {
                bc[f] = FaceBc::Fixed { old: v, new: v };
            }
        }
        bc
    }

    fn step(&self, phi: &[f64], bc: &[FaceBc], alpha: f64, dt: f64, source: Option<&[f64]>, flux: Option<&[f64]>) -> Vec<f64> {
        let n = self.mesh.n_cells();
        let ones = vec![1.0; n];
        let gamma = vec![alpha; n];
        let sys = assemble_transport(&TransportInput {
            mesh: &self.mesh,
            stencils: &self.stencils,
            capacity: &ones,
            gamma: &gamma,
            phi,
            bc,
            dt,
            convection: flux.map(|f| Convection { flux: f, previous: Some((f, phi)) }),
            source,
            cross_diffusion: true,
        })
        .unwrap();
        let settings = SolverSettings { tol: 1e-13, ..Default::default() };
        solve_auto(&sys.matrix, &sys.rhs, phi, &settings).unwrap().0
    }
}

#[test]
fn transient_conduction_matches_fourier_series() {
    let (l, alpha) = (0.04, 1e-5);
    let slab = Slab::new(RawMesh::structured_box([40, 1, 1], [l, 0.001, 0.001]));
    let bc = slab.bc(&[("xmin", 0.0)]);
    let t_end = 0.1 * l * l / alpha;
    let steps = 100;
    let dt = t_end / steps as f64;
    let mut phi = vec![1.0; slab.mesh.n_cells()];
    for _ in 0..steps {
        phi = slab.step(&phi, &bc, alpha, dt, None, None);
    }
    let err = slab
        .mesh
        .cell_centroid
        .iter()
        .zip(&phi)
        .map(|(c, &v)| (v - common::slab_step_response(c.x, t_end, l, alpha)).abs())
        .fold(0.0, f64::max);
    assert!(err < 0.01, "max error {err}");
}

#[test]
fn uniform_field_without_flow_is_steady() {
    let slab = Slab::new(RawMesh::structured_box([3, 3, 3], [1.0, 1.0, 1.0]));
    let bc = slab.bc(&[]);
    let mut phi = vec![2.5; 27];
    for _ in 0..10 {
        phi = slab.step(&phi, &bc, 0.3, 0.1, None, None);
    }
    assert!(phi.iter().all(|&v| (v - 2.5).abs() < 1e-12));
}

#[test]
fn uniform_field_in_divergence_free_flow_is_steady() {
    let slab = Slab::new(RawMesh::structured_box([4, 3, 2], [1.0, 1.0, 1.0]));
    let bc = slab.bc(&[]);
    let u = Point3::new(0.7, -0.2, 0.4);
    let flux: Vec<f64> = (0..slab.mesh.n_faces()).map(|f| u.dot(&slab.mesh.face_normal[f]) * slab.mesh.face_area[f]).collect();
    let phi = vec![1.75; slab.mesh.n_cells()];
    let next = slab.step(&phi, &bc, 0.0, 0.05, None, Some(&flux));
    assert!(next.iter().all(|&v| (v - 1.75).abs() < 1e-12));
}

fn gradient_error_at_half(n: usize, f: impl Fn(f64) -> f64, exact: f64) -> f64 {
    let mesh = Mesh::from_raw(RawMesh::structured_box([n, 1, 1], [1.0, 1.0, 1.0])).unwrap();
    let w = mesh.vertex_weights().unwrap();
    let field: Vec<f64> = mesh.cell_centroid.iter().map(|c| f(c.x)).collect();
    let face = mesh.interior_faces().find(|&i| (mesh.face_centroid[i].x - 0.5).abs() < 1e-12).unwrap();
    (face_gradient(&field, face, &mesh, &w, 0.0).unwrap().x - exact).abs()
}

#[test]
fn face_gradient_of_quadratic_converges() {
    // The central difference of x^2 is exact at the face midpoint.
    for n in [8, 16] {
        assert!(gradient_error_at_half(n, |x| x * x, 1.0) < 1e-12);
    }
    // x^3 has error h^2 / 4, so halving h quarters it.
    let coarse = gradient_error_at_half(8, |x| x.powi(3), 0.75);
    let fine = gradient_error_at_half(16, |x| x.powi(3), 0.75);
    let order = (coarse / fine).log2();
    assert!((order - 2.0).abs() < 0.05, "observed order {order}");
}

fn steady_poisson_error(n: usize) -> f64 {
    use std::f64::consts::PI;
    let slab = Slab::new(RawMesh::structured_box([n, 1, 1], [1.0, 0.1, 0.1]));
    let bc = slab.bc(&[("xmin", 0.0), ("xmax", 0.0)]);
    let source: Vec<f64> = (0..n)
        .map(|c| PI * PI * (PI * slab.mesh.cell_centroid[c].x).sin() * slab.mesh.cell_volume[c])
        .collect();
    // With dt -> infinity a Crank-Nicolson step from zero lands on twice the
    // steady solution.
    let phi: Vec<f64> = slab.step(&vec![0.0; n], &bc, 1.0, 1e12, Some(&source), None).iter().map(|v| 0.5 * v).collect();
    (0..n).map(|c| (phi[c] - (PI * slab.mesh.cell_centroid[c].x).sin()).abs()).fold(0.0, f64::max)
}

#[test]
fn diffusion_operator_is_second_order() {
    let e1 = steady_poisson_error(16);
    let e2 = steady_poisson_error(32);
    let order = (e1 / e2).log2();
    assert!(order >= 1.9, "observed order {order} ({e1:e}, {e2:e})");
}

fn jiggled_box(seed: &[f64]) -> RawMesh {
    let raw = RawMesh::structured_box([3, 3, 3], [1.0, 1.0, 1.0]);
    let h = 1.0 / 3.0;
    raw.map_vertices(|p| {
        let k = 3 * ((p.x / h).round() + 4.0 * (p.y / h).round() + 16.0 * (p.z / h).round()) as usize;
        let inside = (0..3).all(|i| p[i] > 1e-9 && p[i] < 1.0 - 1e-9);
        let q = if inside {
            Point3::new(seed[k % seed.len()], seed[(k + 1) % seed.len()], seed[(k + 2) % seed.len()]) * 0.15 * h
        } else {
            Point3::zeros()
        };
        p + q
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constant_field_is_annihilated_on_distorted_mesh(seed in proptest::collection::vec(-1.0..1.0f64, 24), c in -5.0..5.0f64) {
        let slab = Slab::new(jiggled_box(&seed));
        let bc = slab.bc(&[]);
        let phi = vec![c; slab.mesh.n_cells()];
        let next = slab.step(&phi, &bc, 0.7, 0.01, None, None);
        for v in next {
            prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_stencil_coefficients_sum_to_zero(seed in proptest::collection::vec(-1.0..1.0f64, 24)) {
        let slab = Slab::new(jiggled_box(&seed));
        for st in &slab.stencils {
            prop_assert!(st.coefficient_sum().norm() < 1e-10 * st.coeffs.iter().map(|a| a.norm()).fold(1.0, f64::max));
        }
    }
}
