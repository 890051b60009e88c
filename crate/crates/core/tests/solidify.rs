mod common;

use proptest::prelude::*;
use solidcast::discretization::{gradient_stencils, FaceGradientStencil};
use solidcast::linsolve::{dense_solve, SolverSettings};
use solidcast::mesh::{Mesh, Point3, RawMesh};
use solidcast::solidify::*;

fn alloy() -> MaterialModel {
    MaterialModel::al_si(10.0)
}

fn mesh_and_stencils(n: [usize; 3], l: [f64; 3]) -> (Mesh, Vec<FaceGradientStencil>) {
    let mesh = Mesh::from_raw(RawMesh::structured_box(n, l)).unwrap();
    let w = mesh.vertex_weights().unwrap();
    let st = gradient_stencils(&mesh, &w).unwrap();
    (mesh, st)
}

/// Owned inputs for the flow sub-steps.
struct Flow {
    mesh: Mesh,
    stencils: Vec<FaceGradientStencil>,
    map: ActiveSystemMap,
    mat: MaterialModel,
    dt: f64,
    velocity: Vec<Point3>,
    flux: Vec<f64>,
    temperature: Vec<f64>,
    drag: Vec<f64>,
    solver: SolverSettings,
}

impl Flow {
    fn new(n: [usize; 3], l: [f64; 3], mat: MaterialModel, temperature: impl Fn(Point3) -> f64) -> Flow {
        let (mesh, stencils) = mesh_and_stencils(n, l);
        let temperature: Vec<f64> = mesh.cell_centroid.iter().map(|&c| temperature(c)).collect();
        let map = classify_cells(&mesh, &stencils, &temperature, &mat).unwrap();
        let dt = 0.01;
        let drag = temperature.iter().map(|&t| drag_coefficient(solid_fraction(t, &mat).0, &mat, dt, 1e12)).collect();
        Flow {
            velocity: vec![Point3::zeros(); mesh.n_cells()],
            flux: vec![0.0; mesh.n_faces()],
            mesh,
            stencils,
            map,
            mat,
            dt,
            temperature,
            drag,
            solver: SolverSettings::default(),
        }
    }

    fn input(&self) -> FlowInput<'_> {
        FlowInput {
            mesh: &self.mesh,
            stencils: &self.stencils,
            map: &self.map,
            mat: &self.mat,
            dt: self.dt,
            velocity: &self.velocity,
            flux: &self.flux,
            previous: None,
            temperature: &self.temperature,
            drag: &self.drag,
            solver: &self.solver,
        }
    }
}

proptest! {
    #[test]
    fn solid_fraction_derivative_matches_finite_differences(t in 840.0f64..880.0) {
        let m = alloy();
        let kinks = [m.t_liquidus, m.t_solidus - m.smear_width, m.t_solidus + m.smear_width];
        prop_assume!(kinks.iter().all(|k| (t - k).abs() > 1e-3));
        let h = 1e-5;
        let fd = (solid_fraction(t + h, &m).0 - solid_fraction(t - h, &m).0) / (2.0 * h);
        let d = solid_fraction(t, &m).1;
        prop_assert!((d - fd).abs() <= 1e-6 * d.abs().max(1e-3), "T={t}: {d} vs {fd}");
    }

    #[test]
    fn solid_fraction_is_monotone_and_bounded(a in 800.0f64..900.0, b in 800.0f64..900.0) {
        let m = alloy();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (fl, dl) = solid_fraction(lo, &m);
        let fh = solid_fraction(hi, &m).0;
        prop_assert!(fl >= fh);
        prop_assert!((0.0..=1.0).contains(&fl) && dl <= 0.0);
    }

    #[test]
    fn latent_implicit_coefficient_is_never_positive(t in 700.0f64..1000.0, f in 0.0f64..1.0) {
        let (sp, _) = latent_source(&alloy(), 1e-6, t, f, f);
        prop_assert!(sp <= 0.0);
    }
}

#[test]
fn classify_extremes() {
    let mat = alloy();
    let (mesh, st) = mesh_and_stencils([3, 3, 3], [0.03; 3]);
    let hot = classify_cells(&mesh, &st, &vec![900.0; 27], &mat).unwrap();
    assert_eq!(hot.n_active(), 27);
    assert!(!hot.face_case.contains(&FaceCase::Blocked));
    assert!(!hot.face_case.contains(&FaceCase::Smeared));
    let cold = classify_cells(&mesh, &st, &vec![700.0; 27], &mat).unwrap();
    assert_eq!(cold.n_active(), 0);
    assert!(mesh.interior_faces().all(|f| cold.face_case[f] == FaceCase::Blocked));
}

#[test]
fn solid_column_blocks_and_smears_faces() {
    // Column x < h solid, as on the left of a solidification front.
    let mat = alloy();
    let (mesh, st) = mesh_and_stencils([4, 3, 1], [0.04, 0.03, 0.01]);
    let temp: Vec<f64> = mesh.cell_centroid.iter().map(|c| if c.x < 0.01 { 700.0 } else { 900.0 }).collect();
    let map = classify_cells(&mesh, &st, &temp, &mat).unwrap();
    for f in mesh.interior_faces() {
        let c = mesh.face_centroid[f];
        let expected = if c.x < 0.01 + 1e-9 {
            // Touches the solid column through an owner...
            if (c.x - 0.01).abs() < 1e-9 || c.x < 0.01 - 1e-9 { FaceCase::Blocked } else { unreachable!() }
        } else if c.x < 0.02 - 1e-9 {
            // ...or through a vertex only.
            FaceCase::Smeared
        } else {
            FaceCase::Open
        };
        assert_eq!(map.face_case[f], expected, "face at {c:?}");
    }
    for (f, sm) in &map.smeared {
        assert!(sm.cells.iter().all(|&c| !map.is_solid(c)));
        assert!((sm.coefficient_sum() - st[*f].coefficient_sum()).norm() < 1e-9);
    }
}

#[test]
fn quiescent_isothermal_melt_stays_at_rest() {
    let mat = alloy();
    let f = Flow::new([3, 3, 3], [0.03; 3], mat.clone(), |_| mat.t_ref);
    let (u, _) = predictor_step(&f.input()).unwrap();
    assert!(u.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn single_cell_buoyancy_integrates_exactly() {
    let mat = MaterialModel { viscosity: 0.0, ..alloy() };
    let f = Flow::new([1, 1, 1], [0.01; 3], mat.clone(), |_| mat.t_ref + 10.0);
    let (u, _) = predictor_step(&f.input()).unwrap();
    let expected = -mat.gravity * mat.expansion * 10.0 * f.dt;
    assert!((u[0] - expected).norm() < 1e-15, "{:?} vs {expected:?}", u[0]);
}

#[test]
fn nearly_solid_cell_barely_moves() {
    // Just above the tagging threshold the Darcy drag dominates.
    let mat = alloy();
    let t = mat.solid_threshold() + 0.02;
    assert!(solid_fraction(t, &mat).0 > 0.99);
    let f = Flow::new([1, 1, 1], [0.01; 3], mat.clone(), |_| t);
    let (u, _) = predictor_step(&f.input()).unwrap();
    assert!(u[0].norm() < 1e-10, "{}", u[0].norm());
}

#[test]
fn discretely_solenoidal_prediction_needs_no_pressure() {
    let mat = alloy();
    let f = Flow::new([2, 2, 1], [0.02, 0.02, 0.01], mat, |_| 900.0);
    let u: Vec<Point3> = f
        .mesh
        .cell_centroid
        .iter()
        .map(|c| {
            let (right, top) = (c.x > 0.01, c.y > 0.01);
            match (right, top) {
                (false, false) => Point3::new(1.0, -1.0, 0.0),
                (true, false) => Point3::new(1.0, 1.0, 0.0),
                (true, true) => Point3::new(-1.0, 1.0, 0.0),
                (false, true) => Point3::new(-1.0, -1.0, 0.0),
            }
        })
        .collect();
    let sol = pressure_step(&f.input(), &u, &[0.0; 4]).unwrap();
    assert!(sol.pressure.iter().all(|p| p.abs() < 1e-12), "{:?}", sol.pressure);
    let corr = correct_velocity_and_flux(&f.input(), &u, &sol, 1e-8).unwrap();
    for c in 0..4 {
        assert!((corr.velocity[c] - u[c]).norm() < 1e-9);
    }
}

#[test]
fn enclosed_liquid_cell_has_trivial_pressure() {
    let mat = alloy();
    let f = Flow::new([3, 3, 3], [0.03; 3], mat, |c| if (c - Point3::repeat(0.015)).norm() < 1e-6 { 900.0 } else { 700.0 });
    assert_eq!(f.map.n_active(), 1);
    let u = vec![Point3::new(1.0, 2.0, 3.0); 27];
    let sys = assemble_pressure(&f.input(), &u).unwrap();
    assert_eq!(sys.system.matrix.n_rows(), 1);
    let sol = pressure_step(&f.input(), &u, &[0.0; 27]).unwrap();
    assert!(sol.pressure.iter().all(|&p| p == 0.0));
    let corr = correct_velocity_and_flux(&f.input(), &u, &sol, 1e-8).unwrap();
    assert!(corr.flux.iter().all(|&q| q == 0.0));
}

fn manufactured(c: &Point3) -> Point3 {
    Point3::new((40.0 * c.x).sin() * c.y, c.y * c.z * 100.0, (30.0 * c.z).cos())
}

#[test]
fn pressure_matches_dense_solve_and_enforces_continuity() {
    let mat = alloy();
    let f = Flow::new([4, 4, 4], [0.04; 3], mat, |_| 900.0);
    let u: Vec<Point3> = f.mesh.cell_centroid.iter().map(manufactured).collect();
    let sys = assemble_pressure(&f.input(), &u).unwrap();
    let dense = dense_solve(&sys.system.matrix, &sys.system.rhs).unwrap();
    let sol = pressure_step(&f.input(), &u, &vec![0.0; 64]).unwrap();
    let scale = dense.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (a, b) in sol.pressure.iter().zip(&dense) {
        assert!((a - b).abs() <= 1e-10 * scale.max(1e-30), "{a} vs {b}");
    }
    let corr = correct_velocity_and_flux(&f.input(), &u, &sol, 1e-8).unwrap();
    assert!(corr.max_divergence <= 1e-8);
}

#[test]
fn continuity_holds_next_to_a_solid_front() {
    let mat = alloy();
    let f = Flow::new([5, 4, 4], [0.05, 0.04, 0.04], mat, |c| if c.x < 0.02 { 700.0 } else { 900.0 });
    let u: Vec<Point3> = f
        .mesh
        .cell_centroid
        .iter()
        .enumerate()
        .map(|(c, x)| if f.map.is_solid(c) { Point3::zeros() } else { manufactured(x) })
        .collect();
    let sol = pressure_step(&f.input(), &u, &vec![0.0; f.mesh.n_cells()]).unwrap();
    let corr = correct_velocity_and_flux(&f.input(), &u, &sol, 1e-8).unwrap();
    for face in 0..f.mesh.n_faces() {
        if !f.map.is_open(face) {
            assert_eq!(corr.flux[face], 0.0);
        }
    }
    for c in 0..f.mesh.n_cells() {
        let net: f64 = f.mesh.cell_faces[c].iter().map(|&fc| {
            let s = if f.mesh.faces[fc].owner == c { 1.0 } else { -1.0 };
            s * corr.flux[fc]
        }).sum();
        let gross: f64 = f.mesh.cell_faces[c].iter().map(|&fc| corr.flux[fc].abs()).sum();
        if !f.map.is_solid(c) {
            assert!(net.abs() <= 1e-8 * gross + 1e-20, "cell {c}: {net} of {gross}");
        } else {
            assert_eq!(corr.velocity[c], Point3::zeros());
        }
    }
}

#[test]
fn uniform_pressure_leaves_predicted_fluxes() {
    let mat = alloy();
    let f = Flow::new([3, 3, 3], [0.03; 3], mat, |_| 900.0);
    let u: Vec<Point3> = f.mesh.cell_centroid.iter().map(manufactured).collect();
    let mut sol = pressure_step(&f.input(), &u, &[0.0; 27]).unwrap();
    sol.pressure = vec![3.0; 27];
    let corr = correct_velocity_and_flux(&f.input(), &u, &sol, f64::INFINITY).unwrap();
    for face in f.mesh.interior_faces() {
        let (p, nb) = (f.mesh.faces[face].owner, f.mesh.faces[face].neighbor.unwrap());
        let expected = 0.5 * (u[p] + u[nb]).dot(&f.mesh.face_normal[face]) * f.mesh.face_area[face];
        assert!((corr.flux[face] - expected).abs() < 1e-15);
    }
}

fn slab(n: usize, length: f64, mat: MaterialModel, wall: ThermalBc, convection: bool) -> Solidifier {
    let mesh = Mesh::from_raw(RawMesh::structured_box([n, 1, 1], [length, length / n as f64, length / n as f64])).unwrap();
    let bcs = mesh.patches.iter().map(|p| if p.name == "xmin" { wall } else { ThermalBc::Insulated }).collect();
    let options = SolidifyOptions { convection, ..SolidifyOptions::default() };
    Solidifier::new(mesh, mat, bcs, options).unwrap()
}

#[test]
fn superheated_melt_converges_in_one_iteration() {
    let s = slab(10, 0.1, alloy(), ThermalBc::Fixed(950.0), false);
    let mut state = s.initial_state(vec![1000.0; 10], 0.0);
    let rep = s.advance(&mut state, 0.1).unwrap();
    assert_eq!(rep.outer_iterations, 1);
    assert!(state.solid_fraction.iter().all(|&f| f == 0.0));
}

#[test]
fn freezing_slab_converges_within_ten_iterations() {
    let s = slab(40, 0.1, alloy(), ThermalBc::Fixed(500.0), false);
    let mut state = s.initial_state(vec![900.0; 40], 0.0);
    let mut worst = 0;
    for _ in 0..300 {
        worst = worst.max(s.advance(&mut state, 0.1).unwrap().outer_iterations);
    }
    assert!(state.solid_fraction[0] == 1.0 && state.solid_fraction[39] < 1.0);
    assert!(worst <= 10, "{worst} outer iterations");
}

#[test]
fn insulated_domain_conserves_energy() {
    let mesh = Mesh::from_raw(RawMesh::structured_box([12, 3, 2], [0.12, 0.03, 0.02])).unwrap();
    let bcs = vec![ThermalBc::Insulated; mesh.patches.len()];
    let options = SolidifyOptions { convection: false, ..SolidifyOptions::default() };
    let s = Solidifier::new(mesh, alloy(), bcs, options).unwrap();
    let temp: Vec<f64> = s.mesh.cell_centroid.iter().map(|c| 700.0 + 2000.0 * c.x).collect();
    let mut state = s.initial_state(temp, 0.0);
    let mut e = s.stored_energy(&state);
    for _ in 0..50 {
        s.advance(&mut state, 0.5).unwrap();
        let next = s.stored_energy(&state);
        assert!(((next - e) / e).abs() <= 1e-8, "drift {}", (next - e) / e);
        e = next;
    }
    assert!(state.solid_fraction.iter().any(|&f| f > 0.0 && f < 1.0));
}

#[test]
fn isothermal_weightless_melt_is_unchanged() {
    let mesh = Mesh::from_raw(RawMesh::structured_box([3, 3, 3], [0.03; 3])).unwrap();
    let bcs = vec![ThermalBc::Insulated; mesh.patches.len()];
    let mat = MaterialModel { gravity: Point3::zeros(), ..alloy() };
    let s = Solidifier::new(mesh, mat, bcs, SolidifyOptions::default()).unwrap();
    let mut state = s.initial_state(vec![900.0; 27], 0.0);
    for _ in 0..3 {
        s.advance(&mut state, 0.01).unwrap();
    }
    assert!((state.time - 0.03).abs() < 1e-15);
    assert!(state.temperature.iter().all(|&t| (t - 900.0).abs() < 1e-9));
    assert!(state.velocity.iter().all(|u| u.norm() < 1e-15));
}

#[test]
fn solid_domain_skips_the_flow_solve() {
    let mesh = Mesh::from_raw(RawMesh::structured_box([8, 8, 8], [0.08; 3])).unwrap();
    let bcs = vec![ThermalBc::Fixed(600.0); mesh.patches.len()];
    let s = Solidifier::new(mesh, alloy(), bcs, SolidifyOptions::default()).unwrap();
    let mut liquid = s.initial_state(vec![950.0; 512], 0.0);
    let first = s.advance(&mut liquid, 0.01).unwrap();
    assert!(first.flow_solved);
    let mut solid = s.initial_state(vec![700.0; 512], 0.0);
    let rep = s.advance(&mut solid, 0.01).unwrap();
    assert!(!rep.flow_solved && rep.n_active == 0);
    assert!(rep.flow_seconds + rep.energy_seconds < first.flow_seconds + first.energy_seconds);
}

#[test]
fn stefan_front_follows_similarity_solution() {
    // Nearly pure substance: a narrow freezing range just below 1001 K.
    let mat = MaterialModel {
        density: 1000.0,
        specific_heat: 1000.0,
        conductivity: PropertyTable::constant(10.0),
        latent_heat: 2e5,
        partition: 0.5,
        t_freeze: 1001.0,
        t_liquidus: 1000.5,
        t_solidus: 1000.0,
        smear_width: 0.2,
        ..alloy()
    };
    let (length, n) = (0.1, 80);
    let t_wall = 900.0;
    let s = slab(n, length, mat.clone(), ThermalBc::Fixed(t_wall), false);
    let mut state = s.initial_state(vec![mat.t_liquidus; n], 0.0);
    let alpha = 10.0 / (1000.0 * 1000.0);
    let t_melt = mat.t_solidus;
    let zeta = common::stefan_zeta(mat.specific_heat * (t_melt - t_wall) / mat.latent_heat);
    let dt = 0.5;
    let t_end = 300.0;
    while state.time < t_end / 2.0 - 1e-9 {
        s.advance(&mut state, dt).unwrap();
    }
    let x: Vec<f64> = s.mesh.cell_centroid.iter().map(|c| c.x).collect();
    let k = (1..n).find(|&i| state.solid_fraction[i] < 0.5).unwrap();
    let (f0, f1) = (state.solid_fraction[k - 1], state.solid_fraction[k]);
    let front = x[k - 1] + (x[k] - x[k - 1]) * (f0 - 0.5) / (f0 - f1);
    let exact = 2.0 * zeta * (alpha * state.time).sqrt();
    assert!(((front - exact) / exact).abs() < 0.05, "front {front} vs {exact}");
}

#[test]
fn solidifying_cavity_suppresses_flow_in_solid_and_mush() {
    let mesh = Mesh::from_raw(RawMesh::structured_box([10, 1, 10], [0.02, 0.002, 0.02])).unwrap();
    let bcs = mesh.patches.iter().map(|p| if p.name == "xmin" { ThermalBc::Fixed(600.0) } else { ThermalBc::Insulated }).collect();
    let mat = MaterialModel { t_ref: 900.0, ..alloy() };
    let s = Solidifier::new(mesh, mat.clone(), bcs, SolidifyOptions::default()).unwrap();
    let mut state = s.initial_state(vec![900.0; 100], 0.0);
    let mut solid_before = vec![false; 100];
    let mut saw_mush = false;
    for _ in 0..200 {
        let rep = s.advance(&mut state, 0.01).unwrap();
        assert!(rep.max_divergence <= 1e-8);
        let liquid_max = (0..100)
            .filter(|&c| state.solid_fraction[c] == 0.0)
            .map(|c| state.velocity[c].norm())
            .fold(0.0, f64::max);
        for c in 0..100 {
            let solid = state.tags[c] == CellTag::Solid;
            assert!(!solid_before[c] || solid, "cell {c} remelted: T {} old {} thr {} f {} u {:?}", state.temperature[c], state.temperature_old[c], mat.solid_threshold(), state.solid_fraction[c], state.velocity[c]);
            solid_before[c] = solid;
            if solid {
                assert_eq!(state.velocity[c], Point3::zeros());
            } else if state.temperature_old[c] >= mat.solid_threshold() && solid_fraction(state.temperature_old[c], &mat).0 > 0.99 {
                saw_mush = true;
                assert!(state.velocity[c].norm() <= 1e-10 * liquid_max, "cell {c}: {} vs {liquid_max}", state.velocity[c].norm());
            }
        }
    }
    assert!(state.n_solid() > 0 && state.n_solid() < 100);
    assert!(saw_mush);
    let vmax = state.velocity.iter().map(|u| u.norm()).fold(0.0, f64::max);
    assert!(vmax > 1e-6, "no convection developed: {vmax}");
}
