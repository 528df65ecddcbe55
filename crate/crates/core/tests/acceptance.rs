//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! asserts on the same condition.

use formation_core::cyclic::{
    assemble_l, assemble_l_term, contraction_rate, cyclic_control, theorem4_eigenvalues, CyclicParams,
};
use formation_core::extensions::center::{center_control, CenterParams};
use formation_core::extensions::collision::{rpf_force, rpf_value, CollisionParams};
use formation_core::extensions::robustness::{robustness_bound, robustness_ode_bound, RobustnessModel};
use formation_core::extensions::rotational::{rotational_q1_control, SharedEdge};
use formation_core::extensions::size::{
    inter_robot_errors, size_adjusted, size_constants, size_recursion, tau_bound_for, Shaping, SizeParams,
};
use formation_core::linalg::{frame_from_normal, lambda_max_sym, stack_points, sym_eigenvalues, unstack_points, Rotation3};
use formation_core::polyhedron::{polyhedron_control, reduced_row_count, theorem7_certify};
use formation_core::quad::{hierarchy_step, step_rk4, QuadParams, QuadState, TrackerGains, VelocityTracker};
use formation_core::shapes::by_name;
use formation_core::sim::montecarlo::{monte_carlo, monte_carlo_with, sample_run, Execution, MonteCarloConfig};
use formation_core::sim::presets::{planar_hexagon_campaign, tetrahedron_quads};
use formation_core::sim::*;
use formation_core::subspace::{build_polygon_v, polygon_p, regular_polygon, PolygonSpec};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

const C1_RATE: f64 = 6.928;
const C1_TOL: f64 = 0.01;
const C1_BUDGET: Duration = Duration::from_secs(1);

const C2_REL_TOL: f64 = 1e-8;
const C2_BUDGET: Duration = Duration::from_secs(5);

const C3_RUNS: usize = 50;
const C3_RESIDUAL: f64 = 1e-6;
const C3_SLOPE_TOL: f64 = 0.10;
/// Runs continue to this residual so the fitted window is dominated by the
/// slowest mode rather than the early mixture of faster ones.
const C3_STOP: f64 = 1e-10;
const C3_BUDGET: Duration = Duration::from_secs(30);

const C4_RUNS: u64 = 20;

const C5_RESIDUAL: f64 = 1e-6;
const C5_BUDGET: Duration = Duration::from_secs(60);

const C6_SIDE_TOL: f64 = 0.005;
const C6_RECURSION_TOL: f64 = 1e-6;
const C6_BUDGET: Duration = Duration::from_secs(30);

const C7_RUNS: u64 = 20;
const C7_D_BAR: f64 = 0.065;
/// Circumradius of the on-manifold hexagon that makes the largest measured
/// `d̄` over the 20 seeds about 0.065 (the system is linear in the state).
const C7_CIRCUMRADIUS: f64 = 0.1838;
const C7_D_BAR_TOL: f64 = 0.1;

const C8_BUDGET: Duration = Duration::from_secs(600);

const C9_RUNS: usize = 5;

const C10_FLOW_TOL: f64 = 1e-9;
const C10_BUDGET: Duration = Duration::from_secs(10);

fn report(n: usize, ok: bool, detail: String) {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn planar_rate(n: usize, horizon: usize, k: f64, plane: Rotation3) -> f64 {
    let p = CyclicParams::uniform(n, horizon, k, plane).unwrap();
    let cm = build_polygon_v(&PolygonSpec::new(n, plane).unwrap()).unwrap();
    contraction_rate(&cm, &assemble_l(&p).unwrap())
}

fn random_points(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect()
}

fn point_mass(formation: FormationKind, initial: Vec<Vector3<f64>>, dt: f64, t_end: f64) -> Scenario {
    Scenario {
        formation,
        agents: Agents::PointMass { v_max: None },
        initial,
        controllers: Controllers::default(),
        sim: SimSettings::new(dt, t_end),
        seed: 0,
        disturbance: None,
    }
}

#[test]
fn criterion_01_contraction_rate() {
    let t0 = Instant::now();
    let two = planar_rate(6, 2, 2.0, Rotation3::identity());
    let one = planar_rate(6, 1, 6.928, Rotation3::identity());
    let dt = t0.elapsed();
    let ok = (two - C1_RATE).abs() < C1_TOL && (one - two).abs() < C1_TOL && dt < C1_BUDGET;
    report(1, ok, format!("N=2,k=2: {two:.5}; N=1,k=6.928: {one:.5}; {dt:.2?}"));
}

#[test]
fn criterion_02_eigen_formula() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 3..=8 {
        let p = polygon_p(n).unwrap();
        for m in 1..=2 {
            for alpha in [m as f64 * PI / n as f64, 0.37, 1.9] {
                let dense = &p * assemble_l_term(n, m, alpha).unwrap() * p.transpose();
                let mut numeric = sym_eigenvalues(&dense);
                let mut closed = theorem4_eigenvalues(n, m, alpha);
                numeric.sort_by(f64::total_cmp);
                closed.sort_by(f64::total_cmp);
                let scale = numeric.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                for (a, b) in numeric.iter().zip(&closed) {
                    worst = worst.max((a - b).abs() / scale);
                }
                cases += 1;
            }
        }
    }
    let dt = t0.elapsed();
    report(2, worst < C2_REL_TOL && dt < C2_BUDGET, format!("{cases} cases, worst relative gap {worst:.2e}; {dt:.2?}"));
}

#[test]
fn criterion_03_polygon_convergence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_slope: f64 = 0.0;
    for r in 0..C3_RUNS {
        let (n, horizon) = [(4, 1), (6, 2), (8, 2)][r % 3];
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0));
        let plane = Rotation3::new(axis, rng.random_range(0.0..PI)).unwrap();
        let k = rng.random_range(0.5..2.0);
        let rate = planar_rate(n, horizon, k, plane);
        let p = CyclicParams::uniform(n, horizon, k, plane).unwrap();
        let mut s = point_mass(FormationKind::Polygon(p), random_points(n, &mut rng, 3.0), 0.01, 1.5 * (1.0 / C3_STOP).ln() / rate);
        s.sim.stop_residual = Some(C3_STOP);
        let log = run(&s).unwrap();
        let fe = &log.formation_error;
        let ratio = fe.last().unwrap() / fe[0];
        let slope = log_slope(&log.times, fe, 0.1, 0.0).unwrap();
        worst_ratio = worst_ratio.max(ratio);
        worst_slope = worst_slope.max((-slope - rate).abs() / rate);
    }
    let dt = t0.elapsed();
    let ok = worst_ratio < C3_RESIDUAL && worst_slope < C3_SLOPE_TOL && dt < C3_BUDGET;
    report(3, ok, format!("{C3_RUNS} runs, worst residual ratio {worst_ratio:.2e}, worst slope gap {:.2}%; {dt:.2?}", 100.0 * worst_slope));
}

#[test]
fn criterion_04_control_effort() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut margins = Vec::new();
    for _ in 0..C4_RUNS {
        let x0 = random_points(6, &mut rng, 2.0);
        let peak = |horizon: usize, k: f64| {
            let p = CyclicParams::uniform(6, horizon, k, Rotation3::identity()).unwrap();
            let log = run(&point_mass(FormationKind::Polygon(p), x0.clone(), 1e-3, 2.0)).unwrap();
            log.control_norm.iter().copied().fold(0.0, f64::max)
        };
        margins.push(peak(1, 6.928) - peak(2, 2.0));
    }
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    report(4, worst > 0.0, format!("{C4_RUNS} runs, smallest peak difference (N=1 minus N=2) {worst:.3}"));
}

#[test]
fn criterion_05_polyhedra() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["cube", "octahedron", "hexagonal_box", "dome"] {
        let shape = by_name(name, 1.0).unwrap();
        let f = shape.formation(1.0, 1).unwrap();
        let cm = f.constraint_matrix().unwrap();
        let cert = theorem7_certify(&cm, &f).unwrap();
        let rows_ok = cm.rank == reduced_row_count(&f.development, &f.pps) && cm.nullity() == 4;
        let a = f.closed_loop_matrix().unwrap();
        let spectral = sym_eigenvalues(&(&a.transpose() * &a)).last().unwrap().sqrt();
        let rate = -cert.lambda_max_orthonormal;
        let x0 = shape.stacked() + stack_points(&random_points(shape.n(), &mut rng, 0.5));
        let mut s = point_mass(FormationKind::Polyhedron(f), unstack_points(&x0), (1.0 / spectral).min(0.05), 1.5 * 1e6f64.ln() / rate);
        s.sim.stop_residual = Some(C5_RESIDUAL);
        let log = run(&s).unwrap();
        let rel = log.formation_error.last().unwrap() / log.formation_error[0];
        let this = cert.certified && rows_ok && rel <= C5_RESIDUAL;
        ok &= this;
        lines.push(format!("{name}: λmax {:.3e}, residual {rel:.1e}, t {:.0}s", cert.lambda_max, log.times.last().unwrap()));
    }
    let dt = t0.elapsed();
    report(5, ok && dt < C5_BUDGET, format!("{}; {dt:.2?}", lines.join("; ")));
}

#[test]
fn criterion_06_size_control() {
    let t0 = Instant::now();
    let plane = Rotation3::new(Vector3::x(), 42f64.to_radians()).unwrap();
    let p = CyclicParams::uniform(6, 1, 0.5, plane).unwrap();
    let size = SizeParams::new(2.0, 5.0 * PI / 180.0, Shaping::Tanh, 0.1).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts = random_points(6, &mut rng, 3.0);
    let pts = formation_core::sim::assign::assign_indices(&pts, &plane).unwrap().apply(&pts);
    let mut s = point_mass(FormationKind::Polygon(p.clone()), pts, 1e-3, 120.0);
    s.controllers.size = Some(size.clone());
    s.sim.record_every = 1000;
    let log = run(&s).unwrap();
    let side = log.p.last().unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));

    // on-polygon start: sampled p̄(kτ) against the discrete recursion
    let side0 = 1.5;
    let x0 = regular_polygon(6, &Vector3::zeros(), side0 / (2.0 * (PI / 6.0).sin()), 0.2, &plane);
    let mut s = point_mass(FormationKind::Polygon(p.clone()), unstack_points(&x0), 1e-3, 10.0);
    s.controllers.size = Some(size.clone());
    s.sim.record_every = 100;
    let log = run(&s).unwrap();
    let c = size_constants(6, &p.gains, size.alpha_s0, &size.fs).unwrap().c_exact;
    let rec = size_recursion(log.p_bar[0], log.p_bar.len() - 1, c, &size);
    let gap = log.p_bar.iter().zip(&rec).map(|(a, b)| (a - b).abs() / b.abs()).fold(0.0, f64::max);
    let dt = t0.elapsed();
    let ok = side < C6_SIDE_TOL && gap < C6_RECURSION_TOL && dt < C6_BUDGET;
    report(6, ok, format!("max side error {:.3}%, recursion gap {gap:.2e} over {} windows; {dt:.2?}", 100.0 * side, rec.len() - 1));
}

#[test]
fn criterion_07_robustness_bound() {
    let p = CyclicParams::uniform(6, 2, 2.0, Rotation3::identity()).unwrap();
    let lambda = planar_rate(6, 2, 2.0, Rotation3::identity());
    let x0 = regular_polygon(6, &Vector3::zeros(), C7_CIRCUMRADIUS, 0.0, &Rotation3::identity());
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_ss: f64 = 0.0;
    let mut d_max: f64 = 0.0;
    for seed in 0..C7_RUNS {
        let mut s = point_mass(FormationKind::Polygon(p.clone()), unstack_points(&x0), 1e-3, 3.0);
        s.seed = seed;
        s.disturbance = Some(Disturbance { amplitude: MAX_DISTURBANCE_RAD, window: 0.1, d_bar: None });
        let log = run(&s).unwrap();
        let d_bar = log.disturbance_norm.iter().copied().fold(0.0, f64::max);
        d_max = d_max.max(d_bar);
        let rm = RobustnessModel::new(lambda, d_bar).unwrap();
        let ode = robustness_ode_bound(&rm, &log.times, &log.disturbance_norm).unwrap();
        for ((t, e), b) in log.times.iter().zip(&log.formation_error).zip(&ode) {
            let closed = robustness_bound(&rm, *t).unwrap();
            worst_excess = worst_excess.max(e - closed).max(e - b);
        }
        let tail = log.formation_error.iter().rev().take(1000).copied().fold(0.0, f64::max);
        worst_ss = worst_ss.max(tail);
    }
    let cap = C7_D_BAR / lambda;
    let ok = worst_excess <= 1e-12 && worst_ss <= cap && (d_max - C7_D_BAR).abs() < C7_D_BAR_TOL * C7_D_BAR;
    report(
        7,
        ok,
        format!("{C7_RUNS} runs, largest d̄ {d_max:.4}, worst excess over bound {worst_excess:.2e}, steady state {worst_ss:.3e} ≤ {cap:.3e}"),
    );
}

#[test]
fn criterion_08_monte_carlo() {
    let t0 = Instant::now();
    let (base, cfg) = planar_hexagon_campaign(8).unwrap();
    let r = monte_carlo(&base, &cfg).unwrap();
    let dt = t0.elapsed();
    let ok = r.samples == 100 && r.collision_count == 0 && r.converged == 100 && dt < C8_BUDGET;
    report(
        8,
        ok,
        format!(
            "{} runs, {} collisions, {} converged, closest approach {:.3} m; {dt:.1?}",
            r.samples, r.collision_count, r.converged, r.aggregate.min_distance
        ),
    );
}

#[test]
fn criterion_09_quad_hierarchy() {
    let x_c = Vector3::new(0.0, 0.0, -2.0);
    let criteria = MonteCarloConfig::new(1, 0.0, 0).criteria;
    let mut converged = 0;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for id in 0..C9_RUNS {
        let (pts, seed) = sample_run(4, &x_c, 2.5, 0.9, 9, id).unwrap();
        let mut s = tetrahedron_quads(pts).unwrap();
        s.seed = seed;
        s.sim.record_every = usize::MAX;
        let log = run(&s).unwrap();
        let fe = final_errors(&log);
        worst.0 = worst.0.max(fe.formation_error);
        worst.1 = worst.1.max(fe.side_error.unwrap());
        worst.2 = worst.2.max(fe.center_error.unwrap());
        if !log.status.is_fatal() && criteria.accepts(&fe) {
            converged += 1;
        }
    }

    // hover on the target formation is a fixed point
    let shape = by_name("tetrahedron", 1.65).unwrap();
    let c = shape.positions.iter().sum::<Vector3<f64>>() / 4.0;
    let target: Vec<Vector3<f64>> = shape.positions.iter().map(|p| p - c + x_c).collect();
    let mut s = tetrahedron_quads(target.clone()).unwrap();
    s.sim.t_end = 5.0;
    let log = run(&s).unwrap();
    let drift = (log.final_positions() - stack_points(&target)).amax();
    let params = QuadParams::default();
    let gains = TrackerGains::default();
    let states: Vec<QuadState> = target.iter().map(|p| QuadState::hover_at(*p)).collect();
    let mut trackers = vec![VelocityTracker::default(); 4];
    let outs = hierarchy_step(&states, &DVector::zeros(12), &mut trackers, &gains, &params, 1e-3).unwrap();
    let thrust_gap = outs.iter().map(|o| (o.command.thrust - params.hover_thrust()).abs() + o.command.moment.norm()).fold(0.0, f64::max);
    let step_gap = states
        .iter()
        .zip(&outs)
        .map(|(q, o)| (step_rk4(q, &o.command, &params, 1e-3).position - q.position).norm())
        .fold(0.0, f64::max);

    let ok = converged == C9_RUNS && drift < 1e-9 && thrust_gap < 1e-12 && step_gap < 1e-12;
    report(
        9,
        ok,
        format!(
            "{converged}/{C9_RUNS} converged (worst shape {:.1e}, side {:.1e}, center {:.1e}); hover drift {drift:.1e} m",
            worst.0, worst.1, worst.2
        ),
    );
}

#[test]
fn criterion_10_invariants() {
    let t0 = Instant::now();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let plane = Rotation3::new(Vector3::new(0.3, -0.5, 1.0), 0.8).unwrap();
    let cm = build_polygon_v(&PolygonSpec::new(6, plane).unwrap()).unwrap();

    // size-adjusted cyclic control keeps polygons on the subspace
    let p = CyclicParams::uniform(6, 2, 1.5, plane).unwrap();
    let size = SizeParams::new(2.0, 0.08, Shaping::Tanh, 0.1).unwrap();
    let mut flow: f64 = 0.0;
    for _ in 0..20 {
        let w = DVector::from_fn(cm.ubar.nrows(), |_, _| rng.random_range(-2.0..2.0));
        let x = cm.ubar.transpose() * w;
        let pb = rng.random_range(-1.0..1.0);
        let u = cyclic_control(&x, &size_adjusted(&p, &size, pb).unwrap()).unwrap();
        flow = flow.max((&cm.vbar * &u).norm() / u.norm().max(1e-300));
        let uc = center_control(6, &CenterParams::new(Vector3::new(1.0, 2.0, 3.0), 0.7, 0.1).unwrap(), &Vector3::zeros());
        flow = flow.max((&cm.vbar * &uc).norm() / uc.norm());
    }
    // rotational term on a misaligned regular face
    let outward = Vector3::new(0.2, 0.1, 1.0).normalize();
    let frame = frame_from_normal(&(-outward)).unwrap();
    let face_cm = build_polygon_v(&PolygonSpec::new(4, frame).unwrap()).unwrap();
    let xf = regular_polygon(4, &Vector3::new(1.0, 0.0, 0.0), 0.8, 0.3, &frame);
    let n2 = (frame.matrix().transpose() * Vector3::new(0.1, 1.0, 0.0)).normalize();
    let rot = rotational_q1_control(&xf, &frame, &SharedEdge { a: 0, neighbor_normal: n2 }).unwrap();
    check("rotational term is active", rot.k_r.abs() > 1e-3);
    flow = flow.max((&face_cm.vbar * &rot.control).norm() / rot.control.norm());
    check("flow invariance", flow < C10_FLOW_TOL);

    // orthonormal factor identities
    let i_v = DMatrix::<f64>::identity(cm.vbar.nrows(), cm.vbar.nrows());
    check("V̄V̄ᵀ = I", (&cm.vbar * cm.vbar.transpose() - i_v).amax() < 1e-12);
    check("V̄Ūᵀ = 0", (&cm.vbar * cm.ubar.transpose()).amax() < 1e-12);
    let full = cm.vbar.transpose() * &cm.vbar + cm.ubar.transpose() * &cm.ubar;
    check("V̄ᵀV̄ + ŪᵀŪ = I", (full - DMatrix::<f64>::identity(18, 18)).amax() < 1e-12);
    check("VŪᵀ = 0", (&cm.v * cm.ubar.transpose()).amax() < 1e-10);
    let proj = cm.vbar.transpose() * &cm.vbar;
    check("projector", lambda_max_sym(&(&proj * &proj - &proj)).abs() < 1e-12);

    // potential and force vanish continuously at r₂
    let cp = CollisionParams::hard(0.4, 1.2).unwrap();
    let eps = 1e-7;
    check("rpf value at r2", rpf_value(1.2, &cp).unwrap().abs() < 1e-12);
    check("rpf value near r2", rpf_value(1.2 - eps, &cp).unwrap().abs() < 1e-10);
    check("rpf force near r2", rpf_force(1.2 - eps, &cp).unwrap() < 1e-12 && rpf_force(1.2 + eps, &cp).unwrap() == 0.0);
    let dv = (rpf_value(0.8 + eps, &cp).unwrap() - rpf_value(0.8 - eps, &cp).unwrap()) / (2.0 * eps);
    check("rpf gradient", (dv + 0.8 * rpf_force(0.8, &cp).unwrap()).abs() < 1e-6);

    // lag bound formula
    for (c, t) in [(1.0, 0.1), (2.0, 0.2), (0.5, 0.0), (3.0, 1.0)] {
        let b = tau_bound_for(c, t);
        let expect = if t > 0.0 { (1.0 / c).min(1.0 / (8.0 * c * t)) } else { 1.0 / c };
        check("tau bound", (b - expect).abs() < 1e-15 && b <= 1.0 / c);
    }
    let k = size_constants(6, &[0.5], 5.0 * PI / 180.0, &Shaping::Tanh).unwrap();
    check("worst-case constant dominates", k.c_worst >= k.c_exact);
    let (ps, _) = inter_robot_errors(&regular_polygon(6, &Vector3::zeros(), 2.0, 0.0, &plane), 2.0);
    check("regular hexagon has zero size error", ps.iter().all(|v| v.abs() < 1e-12));

    // bit-identical reruns
    let mut s = point_mass(FormationKind::Polygon(p.clone()), random_points(6, &mut rng, 1.0), 1e-3, 0.3);
    s.disturbance = Some(Disturbance { amplitude: MAX_DISTURBANCE_RAD, window: 0.05, d_bar: None });
    s.controllers.size = Some(size.clone());
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    check("rerun identical", a.positions == b.positions && a.p_bar == b.p_bar);
    let (mut base, mut cfg) = planar_hexagon_campaign(10).unwrap();
    base.sim.t_end = 0.5;
    cfg.samples = 3;
    let m1 = monte_carlo_with(&base, &cfg, Execution::Sequential).unwrap();
    let m2 = monte_carlo(&base, &cfg).unwrap();
    check("campaign identical across execution modes", m1 == m2);

    // the polyhedron law is the negated closed-loop matrix
    let shape = by_name("cube", 1.0).unwrap();
    let f = shape.formation(1.0, 1).unwrap();
    let x = stack_points(&random_points(8, &mut rng, 1.0));
    let gap = (polyhedron_control(&x, &f).unwrap() + f.closed_loop_matrix().unwrap() * &x).norm();
    check("polyhedron matrix form", gap < 1e-10 * x.norm());

    let dt = t0.elapsed();
    let ok = failures.is_empty() && dt < C10_BUDGET;
    report(10, ok, format!("flow {flow:.1e}; failed checks: [{}]; {dt:.2?}", failures.join(", ")));
}
