//! Geometric-center control: a uniform, lagged translation command.

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::linalg::block3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterParams {
    pub x_c: Vector3<f64>,
    pub k_c: f64,
    pub tau: f64,
}

impl CenterParams {
    pub fn new(x_c: Vector3<f64>, k_c: f64, tau: f64) -> Result<Self> {
        if !(k_c > 0.0) || !k_c.is_finite() {
            return Err(Error::Parameter(format!("center gain must be positive, got {k_c}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Parameter(format!("time lag must be positive, got {tau}")));
        }
        Ok(Self { x_c, k_c, tau })
    }
}

pub fn geometric_center(x: &DVector<f64>) -> Vector3<f64> {
    let n = x.len() / 3;
    (0..n).map(|i| block3(x, i)).sum::<Vector3<f64>>() / n.max(1) as f64
}

/// `k_c (x_c − x₀)` for every robot.
pub fn center_control(n: usize, c: &CenterParams, x0_delayed: &Vector3<f64>) -> DVector<f64> {
    let v = (c.x_c - x0_delayed) * c.k_c;
    DVector::from_iterator(3 * n, (0..n).flat_map(|_| [v.x, v.y, v.z]))
}
