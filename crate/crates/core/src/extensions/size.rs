//! Size control by shifting every rotation angle by a common, lagged amount.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::cyclic::{
    cyclic_control, eigen_term, fixed_size_angles, is_null_mode, theorem4_margin, CyclicParams,
    InternalDynamics, DEFINITENESS_TOL,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg::block3;
use crate::report::CertificationEntry;

/// Grid sizes for the infimum over the admissible angle interval.
pub const ANGLE_GRID: usize = 201;
pub const ANGLE_GRID_FINE: usize = 2001;

#[derive(Clone)]
pub enum Shaping {
    Tanh,
    Saturation,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Shaping {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Shaping::Tanh => p.tanh(),
            Shaping::Saturation => p.clamp(-1.0, 1.0),
            Shaping::Custom(f) => f(p),
        }
    }

    /// Check oddness, sign agreement, `|f| ≤ 1` and a positive slope at 0 on
    /// a sample grid.
    pub fn validate(&self) -> Result<()> {
        for j in 1..=400 {
            let p = j as f64 * 0.01;
            let (a, b) = (self.eval(p), self.eval(-p));
            if !a.is_finite() || (a + b).abs() > 1e-12 {
                return Err(Error::Parameter(format!("shaping function not odd at {p}")));
            }
            if a.abs() > 1.0 + 1e-12 {
                return Err(Error::Parameter(format!("shaping function exceeds 1 in magnitude at {p}")));
            }
            if a <= 0.0 {
                return Err(Error::Parameter(format!("shaping function has the wrong sign at {p}")));
            }
        }
        let h = 1e-6;
        if (self.eval(h) - self.eval(-h)) / (2.0 * h) <= 0.0 {
            return Err(Error::Parameter("shaping function needs a positive slope at 0".into()));
        }
        Ok(())
    }
}

impl fmt::Debug for Shaping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shaping::Tanh => write!(f, "Tanh"),
            Shaping::Saturation => write!(f, "Saturation"),
            Shaping::Custom(_) => write!(f, "Custom(<fn>)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SizeParams {
    /// Desired side length.
    pub rho: f64,
    pub alpha_s0: f64,
    pub fs: Shaping,
    pub tau: f64,
}

impl SizeParams {
    pub fn new(rho: f64, alpha_s0: f64, fs: Shaping, tau: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Parameter(format!("side length must be positive, got {rho}")));
        }
        if !(alpha_s0 > 0.0) || !alpha_s0.is_finite() {
            return Err(Error::Parameter(format!("size gain must be positive, got {alpha_s0}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Parameter(format!("time lag must be positive, got {tau}")));
        }
        fs.validate()?;
        Ok(Self { rho, alpha_s0, fs, tau })
    }

    /// `α_s = α_{s₀} f_s(p̄)`.
    pub fn angle_offset(&self, p_bar: f64) -> f64 {
        self.alpha_s0 * self.fs.eval(p_bar)
    }
}

/// `p_i = 1 − ‖x_{i+1} − x_i‖/ρ` and their mean.
pub fn inter_robot_errors(x: &DVector<f64>, rho: f64) -> (Vec<f64>, f64) {
    let n = x.len() / 3;
    let p: Vec<f64> = (0..n).map(|i| 1.0 - (block3(x, (i + 1) % n) - block3(x, i)).norm() / rho).collect();
    let mean = if n == 0 { 0.0 } else { p.iter().sum::<f64>() / n as f64 };
    (p, mean)
}

/// Cyclic parameters with angles `mπ/n + α_s` for the given lagged error.
pub fn size_adjusted(cyclic: &CyclicParams, size: &SizeParams, p_bar_delayed: f64) -> Result<CyclicParams> {
    let offset = size.angle_offset(p_bar_delayed);
    let angles = fixed_size_angles(cyclic.n, cyclic.horizon).into_iter().map(|a| a + offset).collect();
    cyclic.with_angles(angles)
}

pub fn size_cyclic_control(
    x: &DVector<f64>,
    cyclic: &CyclicParams,
    size: &SizeParams,
    p_bar_delayed: f64,
) -> Result<DVector<f64>> {
    check_dim(3 * cyclic.n, x.len())?;
    cyclic_control(x, &size_adjusted(cyclic, size, p_bar_delayed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeConstants {
    /// `√(2(1 − cos(2π/n)))`, the side over circumradius ratio.
    pub beta: f64,
    /// Chord ratios `sin(mπ/n)/sin(π/n)`.
    pub gamma: Vec<f64>,
    /// `Σ k_m γ_m`.
    pub gamma_sum: f64,
    /// `2βΓ`, the exact on-polygon rate constant.
    pub c_exact: f64,
    /// Worst-case `Γ` used by the certification bound.
    pub gamma_worst: f64,
    /// `2Γ_worst`.
    pub c_worst: f64,
    /// Sector constant of `sin(α_{s₀} f_s(p))` on `|p| < 1`.
    pub t: f64,
}

/// Smallest `T` with `|sin(α_{s₀} f_s(p))| ≤ T|p|` on `0 < |p| < 1`; errors
/// when the matching lower sector `T|p|/2` fails.
pub fn sector_constant(alpha_s0: f64, fs: &Shaping) -> Result<f64> {
    let samples = 20_000;
    let ratio = |p: f64| (alpha_s0 * fs.eval(p)).sin().abs() / p;
    let grid = (1..samples).map(|j| j as f64 / samples as f64).chain([1e-9]);
    let (mut sup, mut inf) = (0.0f64, f64::INFINITY);
    for p in grid {
        let r = ratio(p);
        sup = sup.max(r);
        inf = inf.min(r);
    }
    if !(sup > 0.0) {
        return Err(Error::Parameter("shaping function gives no control authority".into()));
    }
    if inf < 0.5 * sup * (1.0 - 1e-9) {
        return Err(Error::Parameter(format!(
            "no sector constant: inf ratio {inf:.4} below half of sup {sup:.4}"
        )));
    }
    Ok(sup)
}

pub fn size_constants(n: usize, gains: &[f64], alpha_s0: f64, fs: &Shaping) -> Result<SizeConstants> {
    if n < 3 {
        return Err(Error::Parameter(format!("size control needs n >= 3, got {n}")));
    }
    fs.validate()?;
    let nf = n as f64;
    let beta = (2.0 * (1.0 - (2.0 * PI / nf).cos())).sqrt();
    let gamma: Vec<f64> = (1..=gains.len()).map(|m| (m as f64 * PI / nf).sin() / (PI / nf).sin()).collect();
    let gamma_sum = gains.iter().zip(gamma.iter()).map(|(k, g)| k * g).sum::<f64>();
    let ksum: f64 = gains.iter().sum();
    let gamma_worst = if n % 2 == 0 {
        beta / (PI / nf).sin() * ksum
    } else {
        beta / (2.0 * (PI / (2.0 * nf)).sin()) * ksum
    };
    Ok(SizeConstants {
        beta,
        gamma,
        gamma_sum,
        c_exact: 2.0 * beta * gamma_sum,
        gamma_worst,
        c_worst: 2.0 * gamma_worst,
        t: sector_constant(alpha_s0, fs)?,
    })
}

/// `min{1/C, 1/(8CT)}` for a given rate constant.
pub fn tau_bound_for(c: f64, t: f64) -> f64 {
    if t > 0.0 {
        (1.0 / c).min(1.0 / (8.0 * c * t))
    } else {
        1.0 / c
    }
}

/// Certification bound on the lag, using the worst-case constant.
pub fn tau_bound(c: &SizeConstants) -> f64 {
    tau_bound_for(c.c_worst, c.t)
}

/// One step of the on-polygon error recursion.
pub fn size_recursion_step(p_k: f64, p_km1: f64, c: f64, tau: f64, size: &SizeParams) -> f64 {
    (p_k - 1.0) * (c * size.angle_offset(p_km1).sin() * tau).exp() + 1.0
}

/// `p(kτ)` for `k = 0..=steps` starting from `p₀`, with the first window
/// reusing `p₀` as its lagged value.
pub fn size_recursion(p0: f64, steps: usize, c: f64, size: &SizeParams) -> Vec<f64> {
    let mut out = vec![p0];
    let mut prev = p0;
    for _ in 0..steps {
        let cur = *out.last().expect("nonempty");
        out.push(size_recursion_step(cur, prev, c, size.tau, size));
        prev = cur;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem5Report {
    pub eigen_inf: f64,
    pub eigen_inf_fine: f64,
    pub constants: SizeConstants,
    pub tau: f64,
    pub tau_bound: f64,
    /// Lag bound with the exact rate constant; never smaller than `tau_bound`.
    pub tau_bound_exact: f64,
    pub certified: bool,
    pub warnings: Vec<String>,
}

impl Theorem5Report {
    pub fn entries(&self) -> Vec<CertificationEntry> {
        vec![
            CertificationEntry {
                check: "size-eigenvalue".into(),
                margin: self.eigen_inf.min(self.eigen_inf_fine),
                certified: self.eigen_inf.min(self.eigen_inf_fine) > DEFINITENESS_TOL,
                warnings: self.warnings.clone(),
            },
            CertificationEntry {
                check: "size-lag".into(),
                margin: self.tau_bound - self.tau,
                certified: self.tau < self.tau_bound,
                warnings: Vec::new(),
            },
        ]
    }
}

/// Closed-form minimum over non-null modes with all angles shifted by `delta`.
fn shifted_min(cyclic: &CyclicParams, delta: f64) -> f64 {
    let n = cyclic.n;
    let mut best = f64::INFINITY;
    for i in 1..=n {
        for k in [-1, 0, 1] {
            if is_null_mode(n, i, k) {
                continue;
            }
            let v: f64 = cyclic
                .gains
                .iter()
                .enumerate()
                .map(|(m0, g)| {
                    let m = m0 + 1;
                    g * eigen_term(n, m, m as f64 * PI / n as f64 + delta, i, k)
                })
                .sum();
            best = best.min(v);
        }
    }
    best
}

fn grid_inf(cyclic: &CyclicParams, alpha_s0: f64, points: usize) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..points {
        let delta = if points == 1 { 0.0 } else { -alpha_s0 + 2.0 * alpha_s0 * j as f64 / (points - 1) as f64 };
        let v = shifted_min(cyclic, delta);
        if v < best.0 {
            best = (v, delta);
        }
    }
    best
}

pub fn theorem5_certify(cyclic: &CyclicParams, size: &SizeParams) -> Result<Theorem5Report> {
    let constants = size_constants(cyclic.n, &cyclic.gains, size.alpha_s0, &size.fs)?;
    let (eigen_inf, worst_delta) = grid_inf(cyclic, size.alpha_s0, ANGLE_GRID);
    let (eigen_inf_fine, _) = grid_inf(cyclic, size.alpha_s0, ANGLE_GRID_FINE);
    let mut warnings = Vec::new();

    // dense cross-check at the worst grid angle
    let angles = fixed_size_angles(cyclic.n, cyclic.horizon).into_iter().map(|a| a + worst_delta).collect();
    let t4 = theorem4_margin(&cyclic.with_angles(angles)?, &InternalDynamics::none())?;
    warnings.extend(t4.warnings);
    if eigen_inf_fine < eigen_inf - 1e-9 * eigen_inf.abs().max(1.0) {
        warnings.push(format!(
            "fine grid infimum {eigen_inf_fine:.9e} below coarse {eigen_inf:.9e}"
        ));
    }
    let tau_bound_worst = tau_bound(&constants);
    let tau_bound_exact = tau_bound_for(constants.c_exact, constants.t);
    if (constants.c_worst - constants.c_exact).abs() > 1e-12 * constants.c_worst.abs().max(1.0) {
        warnings.push(format!(
            "worst-case rate constant {:.6} differs from exact {:.6}; lag bound uses the worst case",
            constants.c_worst, constants.c_exact
        ));
    }
    let eig = eigen_inf.min(eigen_inf_fine).min(t4.margin);
    let certified = eig > DEFINITENESS_TOL && size.tau < tau_bound_worst;
    Ok(Theorem5Report {
        eigen_inf,
        eigen_inf_fine,
        constants,
        tau: size.tau,
        tau_bound: tau_bound_worst,
        tau_bound_exact,
        certified,
        warnings,
    })
}
