use std::fs;
use std::path::Path;

use solidcast::app::{
    run_campaign_with, run_deterministic, AppError, CampaignConfig, ConfigError, Functional, RunConfig, VTK_UNDEFINED,
};
use solidcast::mesh::Point3;

const BAR: &str = r#"
[mesh]
shape = "box"
cells = [6, 1, 1]
size = "30 5 5 mm"

[material]
preset = "al-si"
c0 = "10 wt%"

[initial]
temperature = "900 K"

[boundary.xmin]
type = "fixed"
temperature = "500 K"

[time]
dt = "0.2 s"
end = "60 s"

[physics]
convection = false

[probes]
points = ["2.5 2.5 2.5 mm", "27.5 2.5 2.5 mm"]
"#;

fn bar() -> RunConfig {
    RunConfig::from_str(BAR, Path::new(".")).unwrap()
}

fn campaign_text(extra: &str) -> String {
    format!(
        r#"{BAR}
[campaign]
level = 3
outputs = ["solidification_time"]
test_points = 8
seed = 5
{extra}
[[campaign.inputs]]
name = "rho"
field = "material.density"
mean = "2500 kg/m3"
sd = "50 kg/m3"

[[campaign.inputs]]
name = "t_wall"
field = "boundary.xmin.temperature"
mean = "500 K"
sd = "5 K"
"#
    )
}

fn campaign() -> CampaignConfig {
    CampaignConfig::from_str(&campaign_text(""), Path::new(".")).unwrap()
}

/// `xi_rho + 2 xi_wall` in standardized inputs: first-order Sobol indices
/// 0.2 and 0.8.
fn additive(_: &RunConfig, x: &[f64]) -> Result<Vec<f64>, AppError> {
    Ok(vec![(x[0] - 2500.0) / 50.0 + 2.0 * (x[1] - 500.0) / 5.0])
}

#[test]
fn config_errors_name_the_key() {
    let missing_unit = BAR.replace("\"900 K\"", "\"900\"");
    let err = RunConfig::from_str(&missing_unit, Path::new(".")).unwrap_err();
    assert!(matches!(&err, ConfigError::Value { key, .. } if key == "initial.temperature"), "{err}");

    let unknown = BAR.replace("[time]", "[time]\nstep = \"1 s\"");
    assert!(matches!(RunConfig::from_str(&unknown, Path::new(".")), Err(ConfigError::Syntax(_))));

    let wrong_patch = BAR.replace("[boundary.xmin]", "[boundary.left]");
    let cfg = RunConfig::from_str(&wrong_patch, Path::new(".")).unwrap();
    let err = run_deterministic(&cfg, None).unwrap_err();
    assert!(err.to_string().contains("left"), "{err}");

    let bad_field = campaign_text("").replace("material.density", "material.colour");
    assert!(CampaignConfig::from_str(&bad_field, Path::new(".")).is_err());
}

#[test]
fn run_stops_once_solid() {
    let cfg = bar();
    let r = run_deterministic(&cfg, None).unwrap();
    assert!(r.stopped_solid);
    assert!(r.state.solid_fraction.iter().all(|&f| f == 1.0));
    assert!(r.state.time < cfg.end_time);
    let ts = r.functional(Functional::SolidificationTime);
    assert!(ts > r.state.time - cfg.dt && ts <= r.state.time, "{ts} vs {}", r.state.time);
    assert!(r.functional(Functional::MaxSdas) > 0.0);
    assert!(r.functional(Functional::MinYield) > 120.3);
}

#[test]
fn insulated_melt_above_liquidus_is_unchanged() {
    let mut cfg = bar();
    cfg.boundary.clear();
    cfg.end_time = 2.0;
    let r = run_deterministic(&cfg, None).unwrap();
    assert!(!r.stopped_solid);
    assert_eq!(r.reports.len(), 10);
    assert!(r.state.temperature.iter().all(|&t| (t - 900.0).abs() < 1e-9));
    assert!(r.functional(Functional::SolidificationTime).is_nan());
}

#[test]
fn outputs_are_complete_and_reproducible() {
    let mut cfg = bar();
    cfg.output_every = 5;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let r = run_deterministic(&cfg, Some(a.path())).unwrap();
    run_deterministic(&cfg, Some(b.path())).unwrap();

    let text = fs::read_to_string(a.path().join("final.vtk")).unwrap();
    assert_eq!(text, fs::read_to_string(b.path().join("final.vtk")).unwrap());
    assert!(text.lines().nth(1).unwrap().contains(&VTK_UNDEFINED.to_string()));
    assert!(text.contains("CELLS 6 54") && text.contains("CELL_DATA 6"));
    for name in ["temperature", "solid_fraction", "sdas", "yield_strength", "grain_radius", "velocity_z"] {
        assert!(text.contains(&format!("SCALARS {name} double 1")), "{name}");
    }
    assert!(!text.contains("NaN"));
    let snapshots = fs::read_dir(a.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("fields_")).count();
    assert_eq!(snapshots, r.state.step / 5);

    let probes = fs::read_to_string(a.path().join("probes.csv")).unwrap();
    let lines: Vec<&str> = probes.lines().collect();
    assert_eq!(lines[0], "time,probe_0,probe_1");
    assert_eq!(lines.len(), r.state.step + 2);
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[1], r.state.temperature[0]);
    assert_eq!(last[2], r.state.temperature[5]);

    let functionals = fs::read_to_string(a.path().join("functionals.csv")).unwrap();
    assert_eq!(functionals.lines().count(), 1 + Functional::ALL.len());
}

#[test]
fn probe_outside_the_mesh_is_rejected() {
    let mut cfg = bar();
    cfg.probes.push(Point3::new(0.1, 0.0, 0.0));
    assert!(matches!(run_deterministic(&cfg, None), Err(AppError::ProbeOutside { probe: 2, .. })));
}

#[test]
fn oversized_step_trips_the_courant_guard() {
    let text = BAR.replace("cells = [6, 1, 1]", "cells = [6, 1, 6]").replace("30 5 5 mm", "30 5 30 mm").replace("convection = false", "convection = true");
    let mut cfg = RunConfig::from_str(&text, Path::new(".")).unwrap();
    cfg.material.t_ref = 900.0;
    cfg.max_courant = 1e-6;
    cfg.probes.clear();
    assert!(matches!(run_deterministic(&cfg, None), Err(AppError::Courant { .. })));
}

#[test]
fn campaign_recovers_analytic_indices() {
    let cfg = campaign();
    let dir = tempfile::tempdir().unwrap();
    let r = run_campaign_with(&cfg, 2, dir.path(), &additive).unwrap();
    let s = r.sobol[0].as_ref().unwrap();
    assert!((s.first[0] - 0.2).abs() < 1e-10 && (s.first[1] - 0.8).abs() < 1e-10);
    assert!(r.validation.as_ref().unwrap()[0] < 1e-10);
    for f in ["samples.csv", "outputs.csv", "pce_solidification_time.txt", "sobol.csv", "surface_solidification_time.csv", "validation.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let surface = fs::read_to_string(dir.path().join("surface_solidification_time.csv")).unwrap();
    assert!(surface.starts_with("t_wall,rho,value"));
}

#[test]
fn interrupted_campaign_resumes_from_cache() {
    let cfg = campaign();
    let dir = tempfile::tempdir().unwrap();
    let first = run_campaign_with(&cfg, 1, dir.path(), &additive).unwrap();
    assert_eq!(first.evaluated, first.grid.len() + cfg.test_points);
    for i in [0, 3] {
        fs::remove_file(dir.path().join(format!("cache/node_{i:05}.txt"))).unwrap();
    }
    let second = run_campaign_with(&cfg, 1, dir.path(), &additive).unwrap();
    assert_eq!(second.evaluated, 2);
    assert_eq!(first.models[0].coefficients, second.models[0].coefficients);
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = campaign();
    let serial = run_campaign_with(&cfg, 1, tempfile::tempdir().unwrap().path(), &additive).unwrap();
    let parallel = run_campaign_with(&cfg, 4, tempfile::tempdir().unwrap().path(), &additive).unwrap();
    assert_eq!(serial.values, parallel.values);
    assert_eq!(serial.models[0].coefficients, parallel.models[0].coefficients);
}

#[test]
fn failed_sample_leaves_a_reproducible_snapshot() {
    let cfg = campaign();
    let dir = tempfile::tempdir().unwrap();
    let failing = |run: &RunConfig, x: &[f64]| {
        if x[1] > 505.0 {
            Err(AppError::NonFinite { output: "probe".into(), sample: 0 })
        } else {
            additive(run, x)
        }
    };
    let err = run_campaign_with(&cfg, 1, dir.path(), &failing).unwrap_err();
    let AppError::Sample { snapshot, .. } = err else { panic!("{err}") };
    let run = RunConfig::load(&snapshot).unwrap();
    assert!(run.boundary.values().any(|bc| bc.value(0.0).unwrap() > 505.0));
}

#[test]
fn deterministic_campaign_runs_the_solver() {
    let text = campaign_text("").replace("level = 3", "level = 2").replace("test_points = 8", "test_points = 0");
    let cfg = CampaignConfig::from_str(&text, Path::new(".")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = solidcast::app::run_campaign(&cfg, 2, dir.path()).unwrap();
    let s = r.sobol[0].as_ref().unwrap();
    // A denser melt holds more latent heat, a colder wall extracts it faster.
    assert!(s.total.iter().all(|&t| t > 0.0));
    assert!(r.values.iter().all(|v| v[0].is_finite()));
}
