use formation_core::cyclic::{assemble_l, contraction_rate, cyclic_control, CyclicParams};
use formation_core::extensions::collision::CollisionParams;
use formation_core::linalg::{stack_points, unstack_points, Rotation3};
use formation_core::sim::assign::{assign_indices, project_to_plane};
use formation_core::sim::montecarlo::{monte_carlo_with, Execution, MonteCarloConfig};
use formation_core::sim::presets::planar_hexagon_quads;
use formation_core::sim::*;
use formation_core::subspace::{build_polygon_v, PolygonSpec};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(n: usize, seed: u64, scale: f64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect()
}

fn polygon_scenario(p: CyclicParams, initial: Vec<Vector3<f64>>, dt: f64, t_end: f64) -> Scenario {
    Scenario {
        formation: FormationKind::Polygon(p),
        agents: Agents::PointMass { v_max: None },
        initial,
        controllers: Controllers::default(),
        sim: SimSettings::new(dt, t_end),
        seed: 3,
        disturbance: None,
    }
}

#[test]
fn zero_control_keeps_positions() {
    let p = CyclicParams::uniform(5, 1, 0.0, Rotation3::identity()).unwrap();
    let x0 = random_points(5, 1, 2.0);
    let log = run(&polygon_scenario(p, x0.clone(), 0.01, 1.0)).unwrap();
    assert_eq!(log.times.len(), 101);
    for x in &log.positions {
        assert_eq!(x, &stack_points(&x0));
    }
    assert!(log.formation_error.windows(2).all(|w| w[0] == w[1]));
    assert!(log.control_norm.iter().all(|u| *u == 0.0));
}

#[test]
fn reruns_are_bit_identical() {
    let p = CyclicParams::uniform(6, 2, 2.0, Rotation3::identity()).unwrap();
    let mut s = polygon_scenario(p, random_points(6, 9, 1.0), 1e-3, 0.5);
    s.disturbance = Some(Disturbance { amplitude: MAX_DISTURBANCE_RAD, window: 0.05, d_bar: None });
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    assert_eq!(a.positions, b.positions);
    assert_eq!(a.disturbance_norm, b.disturbance_norm);
    s.seed += 1;
    let c = run(&s).unwrap();
    assert_ne!(a.positions.last(), c.positions.last());
}

#[test]
fn rk4_order() {
    let p = CyclicParams::uniform(6, 2, 2.0, Rotation3::identity()).unwrap();
    let x0 = random_points(6, 4, 1.0);
    let end = |dt: f64| {
        let log = run(&polygon_scenario(p.clone(), x0.clone(), dt, 0.8)).unwrap();
        log.final_positions().clone()
    };
    let (a, b, c) = (end(0.04), end(0.02), end(0.01));
    let order = ((&a - &b).norm() / (&b - &c).norm()).log2();
    assert!(order >= 3.5, "{order}");
    let mut s = polygon_scenario(p, x0, 0.01, 0.8);
    s.sim.integrator = Integrator::Euler;
    let e = run(&s).unwrap();
    // Euler is first order, so its error dwarfs RK4's at the same step
    assert!((e.final_positions() - &c).norm() > 100.0 * (&b - &c).norm());
}

#[test]
fn decay_matches_certified_rate() {
    for (n, horizon) in [(5, 1), (6, 2), (7, 2)] {
        let p = CyclicParams::uniform(n, horizon, 1.0, Rotation3::new(Vector3::new(1.0, 1.0, 0.0), 0.4).unwrap()).unwrap();
        let cm = build_polygon_v(&PolygonSpec::new(n, p.plane_rotation).unwrap()).unwrap();
        let rate = contraction_rate(&cm, &assemble_l(&p).unwrap());
        let log = run(&polygon_scenario(p, random_points(n, n as u64, 1.0), 1e-2, 12.0 / rate)).unwrap();
        let slope = log_slope(&log.times, &log.formation_error, 0.1, 1e-13).unwrap();
        assert!((-slope - rate).abs() < 0.1 * rate, "n={n}: slope {slope} rate {rate}");
    }
}

#[test]
fn window_switches_on_grid() {
    use formation_core::extensions::size::{Shaping, SizeParams};
    let p = CyclicParams::uniform(6, 1, 0.5, Rotation3::identity()).unwrap();
    let mut s = polygon_scenario(p, random_points(6, 2, 2.0), 1e-3, 0.55);
    s.controllers.size = Some(SizeParams::new(2.0, 0.05, Shaping::Tanh, 0.1).unwrap());
    let log = run(&s).unwrap();
    let windows: Vec<f64> = log
        .events
        .iter()
        .filter_map(|e| matches!(e.kind, EventKind::WindowSwitch { .. }).then_some(e.t))
        .collect();
    assert_eq!(windows.len(), 5);
    for (k, t) in windows.iter().enumerate() {
        assert!((t - 0.1 * (k + 1) as f64).abs() < 1e-12);
    }
    // dt not resolving the window is rejected
    s.sim.dt = 0.03;
    assert!(run(&s).is_err());
}

#[test]
fn unperturbed_offsets_match_cyclic_control() {
    let p = CyclicParams::uniform(7, 3, 1.3, Rotation3::new(Vector3::y(), 0.3).unwrap()).unwrap();
    let x = stack_points(&random_points(7, 11, 1.0));
    let a = perturbed_cyclic_control(&x, &p, &[0.0; 7]).unwrap();
    let b = cyclic_control(&x, &p).unwrap();
    assert!((a - b).norm() < 1e-13);
}

#[test]
fn collision_ends_run() {
    let p = CyclicParams::uniform(4, 1, 1.0, Rotation3::identity()).unwrap();
    let mut pts = random_points(4, 5, 3.0);
    pts[1] = pts[0] + Vector3::new(0.1, 0.0, 0.0);
    let mut s = polygon_scenario(p, pts, 1e-3, 1.0);
    s.controllers.collision = Some(CollisionParams::hard(0.4, 1.2).unwrap());
    let log = run(&s).unwrap();
    assert_eq!(log.status, RunStatus::Collision);
    assert!(log.status.is_fatal());
    assert_eq!(log.times, vec![0.0]);
    assert!(matches!(log.events.last().unwrap().kind, EventKind::Collision { i: 0, j: 1, .. }));
}

fn segments_cross(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> bool {
    let orient = |p: Vector2<f64>, q: Vector2<f64>, r: Vector2<f64>| (q - p).perp(&(r - p));
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

#[test]
fn assigned_orders_are_simple_polygons() {
    let plane = Rotation3::new(Vector3::x(), 42f64.to_radians()).unwrap();
    for seed in 0..100 {
        let n = 3 + (seed as usize % 7);
        let pts = random_points(n, 1000 + seed, 5.0);
        let a = assign_indices(&pts, &plane).unwrap();
        let proj = project_to_plane(&a.apply(&pts), &plane);
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                assert!(
                    !segments_cross(proj[i], proj[(i + 1) % n], proj[j], proj[(j + 1) % n]),
                    "seed {seed}: edges {i} and {j} cross"
                );
            }
        }
    }
}

fn short_quad_campaign() -> Scenario {
    let mut s = planar_hexagon_quads().unwrap();
    s.sim.t_end = 2.0;
    s
}

#[test]
fn single_sample_matches_run() {
    let base = short_quad_campaign();
    let cfg = MonteCarloConfig::new(1, 5.0, 77);
    let report = monte_carlo_with(&base, &cfg, Execution::Sequential).unwrap();
    assert_eq!(report.samples, 1);
    let (pts, seed) = formation_core::sim::montecarlo::sample_run(6, &Vector3::new(0.0, 0.0, -10.0), 5.0, 1.2, 77, 0).unwrap();
    let mut s = base.clone();
    let FormationKind::Polygon(p) = &s.formation else { unreachable!() };
    s.initial = assign_indices(&pts, &p.plane_rotation).unwrap().apply(&pts);
    s.seed = seed;
    let log = run(&s).unwrap();
    assert_eq!(report.runs[0].final_errors, final_errors(&log));
}

#[test]
fn zero_radius_runs_identical() {
    let mut base = short_quad_campaign();
    base.controllers.collision = None;
    let mut cfg = MonteCarloConfig::new(3, 0.0, 5);
    cfg.min_separation = Some(0.0);
    let r = monte_carlo_with(&base, &cfg, Execution::Sequential).unwrap();
    assert!(r.runs.iter().all(|x| x.final_errors == r.runs[0].final_errors));
}

#[cfg(feature = "parallel")]
#[test]
fn parallel_matches_sequential() {
    let base = short_quad_campaign();
    let cfg = MonteCarloConfig::new(4, 5.0, 21);
    let a = monte_carlo_with(&base, &cfg, Execution::Sequential).unwrap();
    let b = monte_carlo_with(&base, &cfg, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, monte_carlo_with(&base, &cfg, Execution::Sequential).unwrap());
    assert!(a.runs.windows(2).all(|w| w[0].id < w[1].id));
    assert!(monte_carlo_with(&base, &MonteCarloConfig::new(0, 5.0, 1), Execution::Parallel).is_err());
}

#[test]
fn tracker_follows_point_mass_layer() {
    // same formation layer with perfect velocity following
    let quad = planar_hexagon_quads().unwrap();
    let mut ideal = quad.clone();
    ideal.agents = Agents::PointMass { v_max: Some(3.0) };
    let mut quad = quad;
    quad.sim.t_end = 30.0;
    ideal.sim.t_end = 30.0;
    let a = run(&quad).unwrap();
    let b = run(&ideal).unwrap();
    let gap = a.positions.iter().zip(&b.positions).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
    // measured 0.189 m at the default gains
    assert!(gap < 0.25, "{gap}");
    let fe_gap = (a.formation_error.last().unwrap() - b.formation_error.last().unwrap()).abs();
    assert!(fe_gap < 2e-3, "{fe_gap}");
}

#[test]
fn quad_formation_error_decays_after_transient() {
    let mut s = planar_hexagon_quads().unwrap();
    s.sim.t_end = 60.0;
    s.sim.record_every = 1000;
    let log = run(&s).unwrap();
    let after: Vec<f64> = log.times.iter().zip(&log.formation_error).filter(|(t, _)| **t >= 10.0).map(|(_, e)| *e).collect();
    assert!(after.windows(2).all(|w| w[1] < w[0]), "{after:?}");
    let q = log.quad_states[0].attitude.quaternion().norm();
    assert!((q - 1.0).abs() < 1e-9);
}

#[test]
fn positions_round_trip_through_stacking() {
    let pts = random_points(5, 8, 1.0);
    assert_eq!(unstack_points(&stack_points(&pts)), pts);
}
