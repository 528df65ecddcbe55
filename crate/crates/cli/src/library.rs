//! Scenario skeletons for the built-in shapes and the bundled scenarios
//! under `scenarios/`.

use formation_core::cyclic::CyclicParams;
use formation_core::linalg::Rotation3;
use formation_core::polyhedron::PolyhedronFormation;
use formation_core::shapes::{by_name, SHAPE_NAMES};
use formation_core::sim::presets::{planar_hexagon_campaign, tetrahedron_quads};
use formation_core::sim::{Agents, Controllers, FormationKind, Scenario, SimSettings};
use nalgebra::Vector3;

use crate::error::CliError;
use crate::schema::{Meta, ScenarioFile};

pub const SHAPE_EDGE_M: f64 = 1.0;
pub const SHAPE_GAIN: f64 = 1.0;
pub const SHAPE_DT_S: f64 = 0.01;

/// Bundled scenario names; each lives in `scenarios/<name>.toml`.
pub const BUNDLED: [&str; 6] = ["hexagon", "octahedron", "cube", "dome", "tetrahedron_quads", "planar_quads"];

pub fn shape_names() -> &'static [&'static str] {
    &SHAPE_NAMES
}

/// Fixed, reproducible displacement of robot `i` away from the template.
fn offset(i: usize, scale: f64) -> Vector3<f64> {
    let t = i as f64;
    Vector3::new((1.3 * t + 0.1).sin(), (2.1 * t + 0.7).cos(), (0.7 * t + 1.9).sin()) * scale
}

/// Point-mass skeleton for a built-in shape: uniform gain, horizon 1,
/// template vertices displaced by a fixed pattern, and a run long enough to
/// shrink the slowest closed-loop mode by 1e−7. The certified margin bounds
/// that rate from below and is far too conservative to size the run.
pub fn shape_scenario(name: &str) -> Result<ScenarioFile, CliError> {
    if !SHAPE_NAMES.contains(&name) {
        return Err(CliError::UnknownShape(name.to_string()));
    }
    let shape = by_name(name, SHAPE_EDGE_M)?;
    let f = shape.formation(SHAPE_GAIN, 1)?;
    let formation = f.clone();
    let initial = shape.positions.iter().enumerate().map(|(i, p)| p + offset(i, 0.3 * SHAPE_EDGE_M)).collect();
    let mut s = Scenario {
        formation: FormationKind::Polyhedron(formation),
        agents: Agents::PointMass { v_max: None },
        initial,
        controllers: Controllers::default(),
        sim: SimSettings::new(SHAPE_DT_S, 1.0),
        seed: 0,
        disturbance: None,
    };
    if !s.certify()?.all_certified() {
        return Err(CliError::Schema(format!("shape '{name}' does not certify")));
    }
    let rate = slowest_mode_rate(&f)?;
    s.sim.t_end = (7.0 * 10f64.ln() / rate).ceil();
    s.sim.record_every = ((s.sim.t_end / SHAPE_DT_S) / 1000.0).ceil() as usize;
    let meta = Meta {
        name: name.to_string(),
        description: format!("{} robots on a {name} with unit edges", shape.n()),
        figure: None,
    };
    ScenarioFile::from_scenario(meta, &s, None)
}

/// Smallest real part over the eigenvalues of the projected closed loop.
pub fn slowest_mode_rate(f: &PolyhedronFormation) -> Result<f64, CliError> {
    let cm = f.constraint_matrix()?;
    let m = &cm.vbar * f.closed_loop_matrix()? * cm.vbar.transpose();
    Ok(m.complex_eigenvalues().iter().map(|c| c.re).fold(f64::INFINITY, f64::min))
}

/// Six point masses converging to a regular hexagon with two neighbors on
/// each side.
pub fn hexagon() -> Result<ScenarioFile, CliError> {
    let cyclic = CyclicParams::uniform(6, 2, 2.0, Rotation3::identity())?;
    let initial = (0..6)
        .map(|i| {
            let a = -(i as f64) * std::f64::consts::PI / 3.0;
            Vector3::new(2.0 * a.cos(), 2.0 * a.sin(), 0.0) + offset(i, 0.5)
        })
        .collect();
    let mut sim = SimSettings::new(1e-3, 4.0);
    sim.record_every = 10;
    let s = Scenario {
        formation: FormationKind::Polygon(cyclic),
        agents: Agents::PointMass { v_max: None },
        initial,
        controllers: Controllers::default(),
        sim,
        seed: 0,
        disturbance: None,
    };
    let meta = Meta {
        name: "hexagon".into(),
        description: "hexagon with gains k1 = k2 = 2".into(),
        figure: None,
    };
    ScenarioFile::from_scenario(meta, &s, None)
}

pub fn planar_quads() -> Result<ScenarioFile, CliError> {
    let (mut s, cfg) = planar_hexagon_campaign(0)?;
    s.sim.record_every = 100;
    let meta = Meta {
        name: "planar_quads".into(),
        description: "six quadcopters forming a hexagon with 2 m sides in a plane tilted 42 degrees".into(),
        figure: None,
    };
    ScenarioFile::from_scenario(meta, &s, Some(&cfg))
}

pub fn tetrahedron_quads_file() -> Result<ScenarioFile, CliError> {
    let x_c = Vector3::new(0.0, 0.0, -2.0);
    let initial = vec![
        x_c + Vector3::new(1.5, 0.2, 0.4),
        x_c + Vector3::new(-1.2, 1.1, -0.3),
        x_c + Vector3::new(-0.4, -1.6, 0.1),
        x_c + Vector3::new(0.3, 0.1, 1.7),
    ];
    let mut s = tetrahedron_quads(initial)?;
    s.sim.record_every = 100;
    let meta = Meta {
        name: "tetrahedron_quads".into(),
        description: "four quadcopters forming a tetrahedron with 1.65 m edges".into(),
        figure: None,
    };
    ScenarioFile::from_scenario(meta, &s, None)
}

pub fn bundled(name: &str) -> Result<ScenarioFile, CliError> {
    match name {
        "hexagon" => hexagon(),
        "planar_quads" => planar_quads(),
        "tetrahedron_quads" => tetrahedron_quads_file(),
        shape => shape_scenario(shape),
    }
}
