//! Bounds on the distance to the formation subspace under bounded
//! disturbances of a contracting closed loop.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessModel {
    /// Contraction rate with its conventional negative sign.
    pub lambda: f64,
    /// Bound on the projected disturbance norm.
    pub d_bar: f64,
}

impl RobustnessModel {
    pub fn new(lambda: f64, d_bar: f64) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Parameter("contraction rate must be nonzero".into()));
        }
        if !(d_bar >= 0.0) {
            return Err(Error::Parameter(format!("disturbance bound must be nonnegative, got {d_bar}")));
        }
        Ok(Self { lambda: -lambda.abs(), d_bar })
    }

    pub fn rate(&self) -> f64 {
        self.lambda.abs()
    }

    /// `d̄/|Λ|`.
    pub fn steady_state(&self) -> f64 {
        self.d_bar / self.rate()
    }
}

/// `(d̄/|Λ|)(1 − e^{−|Λ|t})`.
pub fn robustness_bound(rm: &RobustnessModel, t: f64) -> Result<f64> {
    if rm.lambda == 0.0 {
        return Err(Error::Parameter("contraction rate must be nonzero".into()));
    }
    Ok(rm.steady_state() * (1.0 - (-rm.rate() * t).exp()))
}

/// Integrate `Ṙ = −|Λ|R + ‖d(t)‖` from zero. Each step is solved exactly
/// with `‖d‖` held at the larger of its two endpoint samples, which keeps
/// the result above the true solution for piecewise-monotone samples.
pub fn robustness_ode_bound(rm: &RobustnessModel, times: &[f64], d_norms: &[f64]) -> Result<Vec<f64>> {
    if times.len() != d_norms.len() {
        return Err(Error::Dimension { expected: times.len(), got: d_norms.len() });
    }
    let a = rm.rate();
    let mut out = Vec::with_capacity(times.len());
    let mut r = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            let h = times[k] - times[k - 1];
            let d = d_norms[k].max(d_norms[k - 1]);
            let e = (-a * h).exp();
            r = r * e + d / a * (1.0 - e);
        }
        out.push(r);
    }
    Ok(out)
}
