//! Rigid-body quadcopter in a Z-down inertial frame and a velocity-tracking
//! controller (PID on velocity, small-angle attitude reference, PD attitude
//! loop on the quaternion error).
//!
//! `attitude` maps body vectors to the inertial frame (Hamilton product,
//! scalar first), so `q̇ = ½ q ⊗ (0, ω)` with `ω` in body axes.

use nalgebra::{DVector, Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{check_dim, Error, Result};
use crate::linalg::block3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
    pub body_rates: Vector3<f64>,
}

impl QuadState {
    pub fn hover_at(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            body_rates: Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadParams {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub gravity: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(0.0123, 0.0123, 0.0224)),
            gravity: 9.81,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::Parameter(format!("mass must be positive, got {}", self.mass)));
        }
        let sym = (self.inertia - self.inertia.transpose()).norm() <= 1e-12 * self.inertia.norm();
        if !sym || self.inertia.cholesky().is_none() {
            return Err(Error::Parameter("inertia must be symmetric positive definite".into()));
        }
        Ok(())
    }

    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerGains {
    pub kp_v: Vector3<f64>,
    pub ki_v: Vector3<f64>,
    pub kd_v: Vector3<f64>,
    pub kp_att: Matrix3<f64>,
    pub kd_att: Matrix3<f64>,
    pub yaw_desired: f64,
    pub v_max: f64,
    /// Roll and pitch references are clamped to this magnitude.
    pub max_tilt: f64,
    /// Thrust limits as multiples of hover thrust.
    pub thrust_floor: f64,
    pub thrust_ceiling: f64,
}

impl Default for TrackerGains {
    fn default() -> Self {
        Self {
            kp_v: Vector3::new(3.0, 3.0, 4.0),
            ki_v: Vector3::new(0.5, 0.5, 1.0),
            kd_v: Vector3::zeros(),
            kp_att: Matrix3::from_diagonal(&Vector3::new(1.77, 1.77, 0.8)),
            kd_att: Matrix3::from_diagonal(&Vector3::new(0.236, 0.236, 0.215)),
            yaw_desired: 0.0,
            v_max: 3.0,
            max_tilt: 0.6,
            thrust_floor: 0.1,
            thrust_ceiling: 2.5,
        }
    }
}

impl TrackerGains {
    pub fn validate(&self) -> Result<()> {
        let vecs = [self.kp_v, self.ki_v, self.kd_v];
        if vecs.iter().any(|v| v.iter().any(|g| !(*g >= 0.0))) {
            return Err(Error::Parameter("velocity gains must be nonnegative".into()));
        }
        for m in [self.kp_att, self.kd_att] {
            let s = (m + m.transpose()) * 0.5;
            if s.symmetric_eigenvalues().iter().any(|e| *e < -1e-12) {
                return Err(Error::Parameter("attitude gains must be positive semidefinite".into()));
            }
        }
        if !(self.v_max > 0.0) || !(self.max_tilt > 0.0) {
            return Err(Error::Parameter("speed cap and tilt limit must be positive".into()));
        }
        if !(self.thrust_floor >= 0.0 && self.thrust_floor < 1.0 && self.thrust_ceiling > 1.0) {
            return Err(Error::Parameter("thrust limits must bracket hover thrust".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustMoment {
    pub thrust: f64,
    pub moment: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadDerivative {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Quaternion<f64>,
    pub body_rates: Vector3<f64>,
}

pub fn quad_derivative(s: &QuadState, tm: &ThrustMoment, p: &QuadParams) -> QuadDerivative {
    let thrust_body = Vector3::new(0.0, 0.0, -tm.thrust / p.mass);
    let accel = s.attitude * thrust_body + Vector3::new(0.0, 0.0, p.gravity);
    let w = s.body_rates;
    let qdot = s.attitude.quaternion() * Quaternion::from_parts(0.0, w) * 0.5;
    let inv = p.inertia.try_inverse().unwrap_or_else(Matrix3::zeros);
    let wdot = inv * (tm.moment - w.cross(&(p.inertia * w)));
    QuadDerivative { position: s.velocity, velocity: accel, attitude: qdot, body_rates: wdot }
}

fn advance(s: &QuadState, d: &QuadDerivative, h: f64) -> QuadState {
    QuadState {
        position: s.position + d.position * h,
        velocity: s.velocity + d.velocity * h,
        // unnormalized intermediate stage; renormalized after the full step
        attitude: UnitQuaternion::new_unchecked(s.attitude.quaternion() + d.attitude * h),
        body_rates: s.body_rates + d.body_rates * h,
    }
}

/// One RK4 step with the command held constant.
pub fn step_rk4(s: &QuadState, tm: &ThrustMoment, p: &QuadParams, dt: f64) -> QuadState {
    let k1 = quad_derivative(s, tm, p);
    let k2 = quad_derivative(&advance(s, &k1, dt / 2.0), tm, p);
    let k3 = quad_derivative(&advance(s, &k2, dt / 2.0), tm, p);
    let k4 = quad_derivative(&advance(s, &k3, dt), tm, p);
    let comb = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>, d: Vector3<f64>| (a + (b + c) * 2.0 + d) * (dt / 6.0);
    let q = s.attitude.quaternion()
        + (k1.attitude + (k2.attitude + k3.attitude) * 2.0 + k4.attitude) * (dt / 6.0);
    QuadState {
        position: s.position + comb(k1.position, k2.position, k3.position, k4.position),
        velocity: s.velocity + comb(k1.velocity, k2.velocity, k3.velocity, k4.velocity),
        attitude: UnitQuaternion::from_quaternion(q),
        body_rates: s.body_rates + comb(k1.body_rates, k2.body_rates, k3.body_rates, k4.body_rates),
    }
}

pub fn step_euler(s: &QuadState, tm: &ThrustMoment, p: &QuadParams, dt: f64) -> QuadState {
    let d = quad_derivative(s, tm, p);
    let mut next = advance(s, &d, dt);
    next.attitude = UnitQuaternion::from_quaternion(*next.attitude.quaternion());
    next
}

/// Scale `v` down to norm `v_max` when it is faster, keeping its direction.
pub fn saturate_velocity(v: &Vector3<f64>, v_max: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > v_max {
        v * (v_max / n)
    } else {
        *v
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrackerFlags {
    pub thrust_limited: bool,
    pub tilt_limited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerOutput {
    pub command: ThrustMoment,
    pub desired_attitude: UnitQuaternion<f64>,
    pub flags: TrackerFlags,
}

/// Thrust and moment for a velocity reference, given the integral of the
/// velocity error and its last value (for the derivative term).
pub fn velocity_tracker(
    s: &QuadState,
    v_desired: &Vector3<f64>,
    gains: &TrackerGains,
    p: &QuadParams,
    integral: &Vector3<f64>,
    error_rate: &Vector3<f64>,
) -> TrackerOutput {
    let e = v_desired - s.velocity;
    let a_d = gains.kp_v.component_mul(&e) + gains.ki_v.component_mul(integral) + gains.kd_v.component_mul(error_rate);
    let mut flags = TrackerFlags::default();

    let hover = p.hover_thrust();
    let mut thrust = p.mass * (p.gravity - a_d.z);
    let (lo, hi) = (gains.thrust_floor * hover, gains.thrust_ceiling * hover);
    if thrust < lo || thrust > hi {
        thrust = thrust.clamp(lo, hi);
        flags.thrust_limited = true;
    }

    // [−T sψ  −T cψ; T cψ  −T sψ] (φ, θ) = m (a_x, a_y)
    let (sy, cy) = gains.yaw_desired.sin_cos();
    let (bx, by) = (p.mass * a_d.x / thrust, p.mass * a_d.y / thrust);
    let mut phi = -sy * bx + cy * by;
    let mut theta = -cy * bx - sy * by;
    if phi.abs() > gains.max_tilt || theta.abs() > gains.max_tilt {
        phi = phi.clamp(-gains.max_tilt, gains.max_tilt);
        theta = theta.clamp(-gains.max_tilt, gains.max_tilt);
        flags.tilt_limited = true;
    }
    let q_d = UnitQuaternion::from_euler_angles(phi, theta, gains.yaw_desired);

    let mut dq = s.attitude.inverse() * q_d;
    if dq.w < 0.0 {
        dq = UnitQuaternion::new_unchecked(-dq.into_inner());
    }
    let rot = dq.scaled_axis();
    let moment = gains.kp_att * rot - gains.kd_att * s.body_rates;
    TrackerOutput { command: ThrustMoment { thrust, moment }, desired_attitude: q_d, flags }
}

/// Velocity tracker with its integrator; the integral freezes while thrust
/// is at a limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityTracker {
    pub integral: Vector3<f64>,
    pub last_error: Option<Vector3<f64>>,
}

impl Default for VelocityTracker {
    fn default() -> Self {
        Self { integral: Vector3::zeros(), last_error: None }
    }
}

impl VelocityTracker {
    pub fn command(
        &mut self,
        s: &QuadState,
        v_desired: &Vector3<f64>,
        gains: &TrackerGains,
        p: &QuadParams,
        dt: f64,
    ) -> TrackerOutput {
        let e = v_desired - s.velocity;
        let rate = self.last_error.map_or(Vector3::zeros(), |prev| (e - prev) / dt);
        let out = velocity_tracker(s, v_desired, gains, p, &self.integral, &rate);
        if !out.flags.thrust_limited {
            self.integral += e * dt;
        }
        self.last_error = Some(e);
        out
    }
}

/// Saturate each quad's block of the formation-layer velocity command and
/// convert it to thrust and moment.
pub fn hierarchy_step(
    states: &[QuadState],
    formation_velocity: &DVector<f64>,
    trackers: &mut [VelocityTracker],
    gains: &TrackerGains,
    p: &QuadParams,
    dt: f64,
) -> Result<Vec<TrackerOutput>> {
    check_dim(3 * states.len(), formation_velocity.len())?;
    check_dim(states.len(), trackers.len())?;
    Ok(states
        .iter()
        .zip(trackers.iter_mut())
        .enumerate()
        .map(|(i, (s, tr))| {
            let v_d = saturate_velocity(&block3(formation_velocity, i), gains.v_max);
            tr.command(s, &v_d, gains, p, dt)
        })
        .collect())
}
