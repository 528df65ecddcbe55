//! Ready-made scenarios for the six-quadcopter planar campaign and the
//! four-quadcopter tetrahedron.

use nalgebra::Vector3;
use std::f64::consts::PI;

use super::montecarlo::MonteCarloConfig;
use super::{Agents, Controllers, FormationKind, Scenario, SimSettings};
use crate::cyclic::CyclicParams;
use crate::error::Result;
use crate::extensions::center::CenterParams;
use crate::extensions::collision::{CollisionParams, CollisionVariant};
use crate::extensions::size::{Shaping, SizeParams};
use crate::linalg::Rotation3;
use crate::quad::{QuadParams, TrackerGains};
use crate::shapes::tetrahedron;

/// Center gain for the planar campaign, which does not come with one.
pub const PLANAR_CENTER_GAIN: f64 = 0.5;

/// Six quadcopters converging to a hexagon with side 2 m in a plane tilted
/// 42° about the x axis, centered at (0, 0, −10).
pub fn planar_hexagon_quads() -> Result<Scenario> {
    let tau = 0.1;
    let rho = 2.0;
    let x_c = Vector3::new(0.0, 0.0, -10.0);
    let plane = Rotation3::new(Vector3::x(), 42f64.to_radians())?;
    let cyclic = CyclicParams::uniform(6, 1, 0.5, plane)?;
    let controllers = Controllers {
        size: Some(SizeParams::new(rho, 5.0 * PI / 180.0, Shaping::Tanh, tau)?),
        center: Some(CenterParams::new(x_c, PLANAR_CENTER_GAIN, tau)?),
        collision: Some(CollisionParams::new(0.4, 1.2, CollisionVariant::LosGated, 0.0, rho)?),
    };
    let initial = (0..6)
        .map(|i| {
            let a = -(i as f64) * PI / 3.0;
            x_c + Vector3::new(3.0 * a.cos(), 3.0 * a.sin(), 0.5 * (i % 2) as f64)
        })
        .collect();
    Ok(Scenario {
        formation: FormationKind::Polygon(cyclic),
        agents: Agents::Quad { params: QuadParams::default(), gains: TrackerGains { v_max: 3.0, ..TrackerGains::default() } },
        initial,
        controllers,
        sim: SimSettings::new(SimSettings::default_dt(Some(tau)), 100.0),
        seed: 0,
        disturbance: None,
    })
}

/// 100 runs from a 5 m ball about the formation center.
pub fn planar_hexagon_campaign(master_seed: u64) -> Result<(Scenario, MonteCarloConfig)> {
    Ok((planar_hexagon_quads()?, MonteCarloConfig::new(100, 5.0, master_seed)))
}

/// Four quadcopters forming a tetrahedron with edge 1.65 m under the soft
/// tanh collision term and a 0.7 m/s speed cap.
pub fn tetrahedron_quads(initial: Vec<Vector3<f64>>) -> Result<Scenario> {
    let tau = 0.1;
    let rho = 1.65;
    let x_c = Vector3::new(0.0, 0.0, -2.0);
    let shape = tetrahedron(rho);
    let formation = shape.formation(0.25, 1)?;
    let controllers = Controllers {
        size: Some(SizeParams::new(rho, 5.0 * PI / 180.0, Shaping::Tanh, tau)?),
        center: Some(CenterParams::new(x_c, 0.15, tau)?),
        collision: Some(CollisionParams::new(0.3, 0.9, CollisionVariant::TanhSoft, 1.2, rho)?),
    };
    Ok(Scenario {
        formation: FormationKind::PolyhedronSize(formation),
        agents: Agents::Quad { params: QuadParams::default(), gains: TrackerGains { v_max: 0.7, ..TrackerGains::default() } },
        initial,
        controllers,
        sim: SimSettings::new(SimSettings::default_dt(Some(tau)), 200.0),
        seed: 0,
        disturbance: None,
    })
}
