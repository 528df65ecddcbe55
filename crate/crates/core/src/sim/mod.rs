//! Deterministic fixed-step simulation of point-mass or quadcopter swarms
//! under the lagged hybrid schedule: shared quantities (mean size error and
//! geometric center) are sampled at window boundaries `kτ` and applied one
//! window later.

pub mod assign;
pub mod montecarlo;
pub mod presets;

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::cyclic::{contraction_rate, cyclic_control, theorem4_margin, CyclicParams, InternalDynamics};
use crate::error::{Error, Result};
use crate::extensions::center::{center_control, geometric_center, CenterParams};
use crate::extensions::collision::{collision_control, min_pair_distance, CollisionParams};
use crate::extensions::robustness::RobustnessModel;
use crate::extensions::rotational::{rotational_q1_control, SharedEdge};
use crate::extensions::size::{inter_robot_errors, size_adjusted, size_cyclic_control, theorem5_certify, SizeParams};
use crate::linalg::{add_block3, block3, rotation_about_z, set_block3, similarity_rotate, stack_points};
use crate::polyhedron::{gather, polyhedron_control, theorem7_certify, PolyhedronFormation};
use crate::quad::{hierarchy_step, saturate_velocity, step_euler, step_rk4, QuadParams, QuadState, TrackerGains, VelocityTracker};
use crate::report::{CertificationEntry, CertificationReport};
use crate::subspace::{build_polygon_v, formation_error, ConstraintMatrix, PolygonSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum FormationKind {
    Polygon(CyclicParams),
    Polyhedron(PolyhedronFormation),
    /// Size control on the root face of the tree, in-plane alignment of the
    /// root face with its first neighbor, and fixed-size followers on the
    /// remaining faces.
    PolyhedronSize(PolyhedronFormation),
}

impl FormationKind {
    pub fn n(&self) -> usize {
        match self {
            FormationKind::Polygon(p) => p.n,
            FormationKind::Polyhedron(f) | FormationKind::PolyhedronSize(f) => f.n,
        }
    }

    pub fn constraint_matrix(&self) -> Result<ConstraintMatrix> {
        match self {
            FormationKind::Polygon(p) => build_polygon_v(&PolygonSpec::new(p.n, p.plane_rotation)?),
            FormationKind::Polyhedron(f) | FormationKind::PolyhedronSize(f) => f.constraint_matrix(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Controllers {
    pub size: Option<SizeParams>,
    pub center: Option<CenterParams>,
    pub collision: Option<CollisionParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Agents {
    /// Single integrators `ẋ_i = u_i`, optionally speed-capped.
    PointMass { v_max: Option<f64> },
    Quad { params: QuadParams, gains: TrackerGains },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Keep every k-th step in the log; the first and last steps are always kept.
    pub record_every: usize,
    /// Stop once `‖V̄x‖ ≤ stop_residual · ‖V̄x(0)‖`.
    pub stop_residual: Option<f64>,
}

impl SimSettings {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, integrator: Integrator::Rk4, record_every: 1, stop_residual: None }
    }

    /// `min(1e−3, τ/100)`.
    pub fn default_dt(tau: Option<f64>) -> f64 {
        tau.map_or(1e-3, |t| (t / 100.0).min(1e-3))
    }
}

/// Per-robot rotation-angle errors, uniform on `[−amplitude, amplitude]` and
/// resampled at every window of length `window`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub amplitude: f64,
    pub window: f64,
    /// Declared bound on the projected disturbance, used in certification in
    /// place of the initial-state estimate.
    pub d_bar: Option<f64>,
}

pub const MAX_DISTURBANCE_RAD: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub formation: FormationKind,
    pub agents: Agents,
    pub initial: Vec<Vector3<f64>>,
    pub controllers: Controllers,
    pub sim: SimSettings,
    pub seed: u64,
    pub disturbance: Option<Disturbance>,
}

fn window_steps(window: f64, dt: f64, what: &str) -> Result<usize> {
    let ratio = window / dt;
    let k = ratio.round();
    if k < 10.0 || (ratio - k).abs() > 1e-6 * k {
        return Err(Error::Parameter(format!(
            "{what} window {window} s must be an integer multiple of dt = {dt} s, at least 10 steps"
        )));
    }
    Ok(k as usize)
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.formation.n()
    }

    /// The lag window shared by size and center control, if either is on.
    pub fn lag(&self) -> Result<Option<f64>> {
        let taus: Vec<f64> = [self.controllers.size.as_ref().map(|s| s.tau), self.controllers.center.map(|c| c.tau)]
            .into_iter()
            .flatten()
            .collect();
        match taus.as_slice() {
            [] => Ok(None),
            [t] => Ok(Some(*t)),
            [a, b] if (a - b).abs() <= 1e-12 * a.abs() => Ok(Some(*a)),
            _ => Err(Error::Parameter("size and center control must share one time lag".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.initial.len() != n {
            return Err(Error::Dimension { expected: n, got: self.initial.len() });
        }
        if self.initial.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Parameter("initial positions must be finite".into()));
        }
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) || !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::Parameter(format!("dt and t_end must be positive, got {} and {}", s.dt, s.t_end)));
        }
        if s.record_every == 0 {
            return Err(Error::Parameter("record_every must be at least 1".into()));
        }
        if let Some(tau) = self.lag()? {
            window_steps(tau, s.dt, "lag")?;
        }
        if let Some(d) = &self.disturbance {
            if !(0.0..=MAX_DISTURBANCE_RAD + 1e-15).contains(&d.amplitude) {
                return Err(Error::Parameter(format!(
                    "disturbance amplitude {} rad outside [0, 1 degree]",
                    d.amplitude
                )));
            }
            window_steps(d.window, s.dt, "disturbance")?;
            if !matches!(self.formation, FormationKind::Polygon(_)) {
                return Err(Error::Parameter("angle disturbances are supported for polygon formations only".into()));
            }
        }
        match (&self.formation, &self.controllers.size) {
            (FormationKind::PolyhedronSize(_), None) => {
                return Err(Error::Parameter("polyhedron size mode needs size control".into()));
            }
            (FormationKind::PolyhedronSize(f), Some(_)) => {
                shared_edge(f)?;
            }
            (FormationKind::Polyhedron(_), Some(_)) => {
                return Err(Error::Parameter(
                    "size control on a polyhedron needs the decoupled polyhedron size mode".into(),
                ));
            }
            _ => {}
        }
        if let Agents::Quad { params, gains } = &self.agents {
            params.validate()?;
            gains.validate()?;
        }
        if let Agents::PointMass { v_max: Some(v) } = &self.agents {
            if !(*v > 0.0) {
                return Err(Error::Parameter(format!("v_max must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Margins for every certified component. Warnings are attached to the
    /// entries; failures do not stop a run.
    pub fn certify(&self) -> Result<CertificationReport> {
        let mut report = CertificationReport::default();
        let cm = self.formation.constraint_matrix()?;
        match &self.formation {
            FormationKind::Polygon(p) => {
                let t4 = theorem4_margin(p, &InternalDynamics::none())?;
                report.push(t4.entry());
                let rate = contraction_rate(&cm, &crate::cyclic::assemble_l(p)?);
                report.contraction_rate = Some(rate);
                if let Some(size) = &self.controllers.size {
                    let t5 = theorem5_certify(p, size)?;
                    report.tau_bound_s = Some(t5.tau_bound);
                    for e in t5.entries() {
                        report.push(e);
                    }
                }
                if let Some(d) = &self.disturbance {
                    let d_bar = d.d_bar.unwrap_or_else(|| {
                        disturbance_bound_estimate(&stack_points(&self.initial), p, d.amplitude)
                    });
                    if rate > 0.0 {
                        report.steady_state_bound = Some(RobustnessModel::new(rate, d_bar)?.steady_state());
                    }
                }
            }
            FormationKind::Polyhedron(f) | FormationKind::PolyhedronSize(f) => {
                let t7 = theorem7_certify(&cm, f)?;
                report.contraction_rate = Some(t7.margin());
                report.push(t7.entry());
                if let (FormationKind::PolyhedronSize(_), Some(size)) = (&self.formation, &self.controllers.size) {
                    let t5 = theorem5_certify(&f.faces[0].params, size)?;
                    report.tau_bound_s = Some(t5.tau_bound);
                    for e in t5.entries() {
                        report.push(CertificationEntry { check: format!("root_face_{}", e.check), ..e });
                    }
                }
            }
        }
        Ok(report)
    }
}

/// Upper bound on `‖d‖` at state `x` for rotation-angle errors up to
/// `amplitude`: each rotated term moves by at most `2 sin(a/2)` times its length.
pub fn disturbance_bound_estimate(x: &DVector<f64>, p: &CyclicParams, amplitude: f64) -> f64 {
    let n = p.n;
    let c = 2.0 * (amplitude / 2.0).sin();
    let sq: f64 = (0..n)
        .map(|i| {
            let xi = block3(x, i);
            let s: f64 = p
                .gains
                .iter()
                .enumerate()
                .map(|(m0, k)| {
                    let m = m0 + 1;
                    k * ((block3(x, (i + m) % n) - xi).norm() + (block3(x, (i + n - m) % n) - xi).norm())
                })
                .sum();
            (c * s).powi(2)
        })
        .sum();
    sq.sqrt()
}

/// Cyclic law with robot `i` using angles `α_m + offsets[i]`.
pub fn perturbed_cyclic_control(x: &DVector<f64>, p: &CyclicParams, offsets: &[f64]) -> Result<DVector<f64>> {
    crate::error::check_dim(3 * p.n, x.len())?;
    crate::error::check_dim(p.n, offsets.len())?;
    let n = p.n;
    let mut u = DVector::zeros(3 * n);
    for i in 0..n {
        let xi = block3(x, i);
        let mut ui = Vector3::zeros();
        for (m0, (k, a)) in p.gains.iter().zip(&p.angles).enumerate() {
            let m = m0 + 1;
            let r = similarity_rotate(&p.plane_rotation, &rotation_about_z(a + offsets[i]));
            ui += (r * (block3(x, (i + m) % n) - xi) + r.transpose() * (block3(x, (i + n - m) % n) - xi)) * *k;
        }
        set_block3(&mut u, i, &ui);
    }
    Ok(u)
}

/// Edge shared by the root face and its first tree neighbor, as a local
/// index into the root face and the neighbor's outward normal.
fn shared_edge(f: &PolyhedronFormation) -> Result<SharedEdge> {
    let root = f.pps.faces[0];
    let rule = f
        .pps
        .rules
        .iter()
        .find(|r| r.face_a == root || r.face_b == root)
        .ok_or_else(|| Error::Structural("root face has no neighbor in the tree".into()))?;
    let other = if rule.face_a == root { rule.face_b } else { rule.face_a };
    let ids = &f.development.faces[root].vertex_ids;
    let k = ids.len();
    let (u, v) = rule.edge;
    let a = (0..k)
        .find(|&a| {
            let (p, q) = (ids[a], ids[(a + 1) % k]);
            (p, q) == (u, v) || (p, q) == (v, u)
        })
        .ok_or_else(|| Error::Structural(format!("edge {:?} not on the root face", rule.edge)))?;
    Ok(SharedEdge { a, neighbor_normal: f.development.faces[other].normal })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Collision { i: usize, j: usize, distance: f64 },
    SaturationOn { robot: usize },
    SaturationOff { robot: usize },
    WindowSwitch { window: usize },
    Divergence { reason: String },
    Stopped { residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Stopped,
    Collision,
    Diverged,
}

impl RunStatus {
    pub fn is_fatal(&self) -> bool {
        matches!(self, RunStatus::Collision | RunStatus::Diverged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub times: Vec<f64>,
    pub positions: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub formation_error: Vec<f64>,
    /// Mean size error; empty without size control.
    pub p_bar: Vec<f64>,
    /// Per-edge size errors; empty without size control.
    pub p: Vec<Vec<f64>>,
    pub min_distance: Vec<f64>,
    /// `‖x_c − x₀‖`; empty without center control.
    pub center_error: Vec<f64>,
    /// Norm of the shape-control term.
    pub control_norm: Vec<f64>,
    /// `‖V̄d‖` of the angle disturbance; empty without one.
    pub disturbance_norm: Vec<f64>,
    pub events: Vec<Event>,
    pub status: RunStatus,
    /// Smallest pairwise distance over every integration step.
    pub min_distance_seen: f64,
    pub quad_states: Vec<QuadState>,
}

impl TrajectoryLog {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            positions: Vec::new(),
            velocities: Vec::new(),
            formation_error: Vec::new(),
            p_bar: Vec::new(),
            p: Vec::new(),
            min_distance: Vec::new(),
            center_error: Vec::new(),
            control_norm: Vec::new(),
            disturbance_norm: Vec::new(),
            events: Vec::new(),
            status: RunStatus::Completed,
            min_distance_seen: f64::INFINITY,
            quad_states: Vec::new(),
        }
    }

    pub fn final_positions(&self) -> &DVector<f64> {
        self.positions.last().expect("log holds at least the initial state")
    }
}

/// Values sampled at a window boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    p_bar: f64,
    center: Vector3<f64>,
}

/// Evaluated formation layer at one state.
struct Command {
    shape: DVector<f64>,
    total: DVector<f64>,
}

struct Engine<'a> {
    s: &'a Scenario,
    n: usize,
    cm: ConstraintMatrix,
    edge: Option<SharedEdge>,
    /// Unique undirected edges whose lengths should equal ρ.
    size_edges: Vec<(usize, usize)>,
    root_robots: BTreeSet<usize>,
}

impl<'a> Engine<'a> {
    fn new(s: &'a Scenario) -> Result<Self> {
        let n = s.n();
        let cm = s.formation.constraint_matrix()?;
        let (edge, size_edges, root_robots) = match &s.formation {
            FormationKind::Polygon(_) => (None, (0..n).map(|i| (i, (i + 1) % n)).collect(), BTreeSet::new()),
            FormationKind::Polyhedron(f) | FormationKind::PolyhedronSize(f) => {
                let mut edges = BTreeSet::new();
                for face in &f.development.faces {
                    for (a, b) in face.edges() {
                        edges.insert((a.min(b), a.max(b)));
                    }
                }
                let root: BTreeSet<usize> = f.faces[0].face.vertex_ids.iter().copied().collect();
                let edge = match &s.formation {
                    FormationKind::PolyhedronSize(_) => Some(shared_edge(f)?),
                    _ => None,
                };
                (edge, edges.into_iter().collect(), root)
            }
        };
        Ok(Self { s, n, cm, edge, size_edges, root_robots })
    }

    fn measure(&self, x: &DVector<f64>) -> Sample {
        let p_bar = match (&self.s.formation, &self.s.controllers.size) {
            (FormationKind::Polygon(_), Some(size)) => inter_robot_errors(x, size.rho).1,
            (FormationKind::PolyhedronSize(f), Some(size)) => inter_robot_errors(&gather(&f.faces[0].face, x), size.rho).1,
            _ => 0.0,
        };
        Sample { p_bar, center: geometric_center(x) }
    }

    fn size_errors(&self, x: &DVector<f64>) -> Vec<f64> {
        match &self.s.controllers.size {
            Some(size) => self
                .size_edges
                .iter()
                .map(|&(a, b)| 1.0 - (block3(x, b) - block3(x, a)).norm() / size.rho)
                .collect(),
            None => Vec::new(),
        }
    }

    fn shape_term(&self, x: &DVector<f64>, lag: &Sample, offsets: &[f64]) -> Result<DVector<f64>> {
        let size = self.s.controllers.size.as_ref();
        match &self.s.formation {
            FormationKind::Polygon(p) => {
                let p = match size {
                    Some(sz) => size_adjusted(p, sz, lag.p_bar)?,
                    None => p.clone(),
                };
                if self.s.disturbance.is_some() {
                    perturbed_cyclic_control(x, &p, offsets)
                } else {
                    cyclic_control(x, &p)
                }
            }
            FormationKind::Polyhedron(f) => polyhedron_control(x, f),
            FormationKind::PolyhedronSize(f) => {
                let sz = size.expect("validated");
                let edge = self.edge.as_ref().expect("validated");
                let root = &f.faces[0];
                let xr = gather(&root.face, x);
                let mut ur = size_cyclic_control(&xr, &root.params, sz, lag.p_bar)?;
                ur += rotational_q1_control(&xr, &root.face.normal_rotation, edge)?.control;
                let mut u = DVector::zeros(3 * self.n);
                for (i, &v) in root.face.vertex_ids.iter().enumerate() {
                    add_block3(&mut u, v, &block3(&ur, i));
                }
                for fc in &f.faces[1..] {
                    let uf = cyclic_control(&gather(&fc.face, x), &fc.params)?;
                    for (i, &v) in fc.face.vertex_ids.iter().enumerate() {
                        if !self.root_robots.contains(&v) {
                            add_block3(&mut u, v, &block3(&uf, i));
                        }
                    }
                }
                Ok(u)
            }
        }
    }

    /// Formation-layer velocity before saturation. A pair inside `r₁`
    /// surfaces as `Err(Some(event))`.
    fn command(
        &self,
        x: &DVector<f64>,
        vel: &DVector<f64>,
        lag: &Sample,
        offsets: &[f64],
    ) -> std::result::Result<Command, Option<EventKind>> {
        let shape = self.shape_term(x, lag, offsets).map_err(|e| Some(EventKind::Divergence { reason: e.to_string() }))?;
        let mut total = shape.clone();
        if let Some(c) = &self.s.controllers.center {
            total += center_control(self.n, c, &lag.center);
        }
        if let Some(cp) = &self.s.controllers.collision {
            match collision_control(x, Some(vel), cp) {
                Ok(u) => total += u,
                Err(ev) => return Err(Some(EventKind::Collision { i: ev.i, j: ev.j, distance: ev.distance })),
            }
        }
        Ok(Command { shape, total })
    }

    fn point_mass_velocity(&self, u: &DVector<f64>) -> DVector<f64> {
        match self.s.agents {
            Agents::PointMass { v_max: Some(vm) } => {
                let mut out = u.clone();
                for i in 0..self.n {
                    set_block3(&mut out, i, &saturate_velocity(&block3(u, i), vm));
                }
                out
            }
            _ => u.clone(),
        }
    }
}

fn is_finite(x: &DVector<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}

const DIVERGENCE_NORM: f64 = 1e8;

/// Integrate a scenario. Collisions and divergence end the run early and are
/// reported in the log; only invalid scenarios return an error.
pub fn run(s: &Scenario) -> Result<TrajectoryLog> {
    s.validate()?;
    let eng = Engine::new(s)?;
    let n = eng.n;
    let dt = s.sim.dt;
    let steps = (s.sim.t_end / dt).round() as usize;
    let lag_steps = s.lag()?.map(|t| window_steps(t, dt, "lag")).transpose()?;
    let dist_steps = s.disturbance.map(|d| window_steps(d.window, dt, "disturbance")).transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let dist = s.disturbance.map(|d| Uniform::new_inclusive(-d.amplitude, d.amplitude)).transpose().map_err(|e| Error::Parameter(e.to_string()))?;

    let mut x = stack_points(&s.initial);
    let mut vel = DVector::zeros(3 * n);
    let mut quads: Vec<QuadState> = s.initial.iter().map(|p| QuadState::hover_at(*p)).collect();
    let mut trackers = vec![VelocityTracker::default(); n];
    let mut saturated = vec![false; n];
    let mut offsets = vec![0.0; n];

    let first = eng.measure(&x);
    let mut active = first;
    let mut pending = first;
    let mut log = TrajectoryLog::new();
    let fe0 = formation_error(&eng.cm, &x)?;

    for j in 0..=steps {
        let t = j as f64 * dt;
        if let Some(w) = lag_steps {
            if j % w == 0 {
                let k = j / w;
                if k >= 1 {
                    active = pending;
                    log.events.push(Event { t, kind: EventKind::WindowSwitch { window: k } });
                }
                pending = eng.measure(&x);
            }
        }
        if let (Some(w), Some(d)) = (dist_steps, &dist) {
            if j % w == 0 {
                for o in offsets.iter_mut() {
                    *o = d.sample(&mut rng);
                }
            }
        }

        let mut fatal: Option<EventKind> = None;
        if !is_finite(&x) || x.norm() > DIVERGENCE_NORM {
            fatal = Some(EventKind::Divergence { reason: "state is not finite or exceeds the divergence norm".into() });
        }
        let cmd = if fatal.is_none() {
            match eng.command(&x, &vel, &active, &offsets) {
                Ok(c) => Some(c),
                Err(ev) => {
                    fatal = ev;
                    None
                }
            }
        } else {
            None
        };
        let fe = formation_error(&eng.cm, &x).unwrap_or(f64::NAN);
        log.min_distance_seen = log.min_distance_seen.min(min_pair_distance(&x));
        let stop = s.sim.stop_residual.is_some_and(|r| fe <= r * fe0);
        let last = j == steps || fatal.is_some() || stop;

        let applied = cmd.as_ref().map(|c| match s.agents {
            Agents::PointMass { .. } => eng.point_mass_velocity(&c.total),
            Agents::Quad { .. } => vel.clone(),
        });
        if j % s.sim.record_every == 0 || last {
            log.times.push(t);
            log.positions.push(x.clone());
            log.velocities.push(applied.clone().unwrap_or_else(|| vel.clone()));
            log.formation_error.push(fe);
            if s.controllers.size.is_some() {
                let p = eng.size_errors(&x);
                log.p_bar.push(eng.measure(&x).p_bar);
                log.p.push(p);
            }
            log.min_distance.push(min_pair_distance(&x));
            if let Some(c) = &s.controllers.center {
                log.center_error.push((c.x_c - geometric_center(&x)).norm());
            }
            log.control_norm.push(cmd.as_ref().map_or(f64::NAN, |c| c.shape.norm()));
            if s.disturbance.is_some() {
                let dnorm = match (&s.formation, &cmd) {
                    (FormationKind::Polygon(p), Some(c)) => {
                        let p = match &s.controllers.size {
                            Some(sz) => size_adjusted(p, sz, active.p_bar)?,
                            None => p.clone(),
                        };
                        (&eng.cm.vbar * (&c.shape - cyclic_control(&x, &p)?)).norm()
                    }
                    _ => f64::NAN,
                };
                log.disturbance_norm.push(dnorm);
            }
        }
        if let Some(kind) = fatal {
            log.status = match kind {
                EventKind::Collision { .. } => RunStatus::Collision,
                _ => RunStatus::Diverged,
            };
            log.events.push(Event { t, kind });
            break;
        }
        if stop {
            log.status = RunStatus::Stopped;
            log.events.push(Event { t, kind: EventKind::Stopped { residual: fe } });
            break;
        }
        if j == steps {
            break;
        }
        let cmd = cmd.expect("no fatal event");

        match &s.agents {
            Agents::PointMass { v_max } => {
                let v0 = applied.expect("command present");
                if let Some(vm) = v_max {
                    for i in 0..n {
                        let on = block3(&cmd.total, i).norm() > *vm;
                        if on != saturated[i] {
                            saturated[i] = on;
                            let kind = if on { EventKind::SaturationOn { robot: i } } else { EventKind::SaturationOff { robot: i } };
                            log.events.push(Event { t, kind });
                        }
                    }
                }
                let f = |y: &DVector<f64>| -> std::result::Result<DVector<f64>, Option<EventKind>> {
                    Ok(eng.point_mass_velocity(&eng.command(y, &v0, &active, &offsets)?.total))
                };
                let next: std::result::Result<DVector<f64>, Option<EventKind>> = match s.sim.integrator {
                    Integrator::Euler => Ok(&x + &v0 * dt),
                    Integrator::Rk4 => (|| {
                        let k1 = v0.clone();
                        let k2 = f(&(&x + &k1 * (dt / 2.0)))?;
                        let k3 = f(&(&x + &k2 * (dt / 2.0)))?;
                        let k4 = f(&(&x + &k3 * dt))?;
                        Ok(&x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
                    })(),
                };
                match next {
                    Ok(nx) => x = nx,
                    Err(ev) => {
                        // an intermediate stage entered r₁; report it at this step
                        let kind = ev.unwrap_or(EventKind::Divergence { reason: "stage evaluation failed".into() });
                        log.status = match kind {
                            EventKind::Collision { .. } => RunStatus::Collision,
                            _ => RunStatus::Diverged,
                        };
                        log.events.push(Event { t, kind });
                        break;
                    }
                }
                vel = v0;
            }
            Agents::Quad { params, gains } => {
                let outs = hierarchy_step(&quads, &cmd.total, &mut trackers, gains, params, dt)?;
                for (i, (q, o)) in quads.iter_mut().zip(&outs).enumerate() {
                    let on = o.flags.thrust_limited || o.flags.tilt_limited || block3(&cmd.total, i).norm() > gains.v_max;
                    if on != saturated[i] {
                        saturated[i] = on;
                        let kind = if on { EventKind::SaturationOn { robot: i } } else { EventKind::SaturationOff { robot: i } };
                        log.events.push(Event { t, kind });
                    }
                    *q = match s.sim.integrator {
                        Integrator::Rk4 => step_rk4(q, &o.command, params, dt),
                        Integrator::Euler => step_euler(q, &o.command, params, dt),
                    };
                }
                x = stack_points(&quads.iter().map(|q| q.position).collect::<Vec<_>>());
                vel = stack_points(&quads.iter().map(|q| q.velocity).collect::<Vec<_>>());
            }
        }
    }
    if matches!(s.agents, Agents::Quad { .. }) {
        log.quad_states = quads;
    }
    Ok(log)
}

/// Least-squares slope of `ln y` against `t` after discarding the first
/// `burn_in` fraction of samples and any value below `floor`.
pub fn log_slope(times: &[f64], values: &[f64], burn_in: f64, floor: f64) -> Option<f64> {
    let start = (burn_in * times.len() as f64).ceil() as usize;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .skip(start)
        .filter(|(_, v)| **v > floor && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt).powi(2)));
    (den > 0.0).then(|| num / den)
}

/// End-of-run errors used for convergence decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalErrors {
    pub formation_error: f64,
    /// Relative to the initial formation error.
    pub formation_error_relative: f64,
    /// Largest `|1 − side/ρ|`, when size control is on.
    pub side_error: Option<f64>,
    pub center_error: Option<f64>,
    pub min_distance: f64,
}

pub fn final_errors(log: &TrajectoryLog) -> FinalErrors {
    let fe = *log.formation_error.last().unwrap_or(&f64::NAN);
    let fe0 = *log.formation_error.first().unwrap_or(&f64::NAN);
    FinalErrors {
        formation_error: fe,
        formation_error_relative: if fe0 > 0.0 { fe / fe0 } else { fe },
        side_error: log.p.last().map(|p| p.iter().fold(0.0f64, |a, v| a.max(v.abs()))),
        center_error: log.center_error.last().copied(),
        min_distance: log.min_distance_seen,
    }
}
