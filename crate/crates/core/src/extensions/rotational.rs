//! One-sided cyclic term that spins the first face of a polyhedral tree in
//! its own plane until the edge it shares with the second face lies in the
//! second face's plane.

use nalgebra::{DVector, Vector3};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{block3, rotation_about_z, set_block3, similarity_rotate, Rotation3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedEdge {
    /// Local index in the first face; the edge runs from `a` to `a + 1`.
    pub a: usize,
    /// Outward unit normal of the second face.
    pub neighbor_normal: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationalTerm {
    pub k_r: f64,
    pub nu_f: bool,
    pub nu_b: bool,
    pub control: DVector<f64>,
}

/// `|k_r| [ν_f R_r(x_{i+1} − x_i) + ν_b R_rᵀ(x_{i−1} − x_i)]` over the face,
/// with `k_r = (x_{a+1} − x_a)·n₂` and `R_r` a rotation by `π/|𝒱₁|` in the
/// face frame. `x_face` holds the face robots in face order.
pub fn rotational_q1_control(x_face: &DVector<f64>, frame: &Rotation3, edge: &SharedEdge) -> Result<RotationalTerm> {
    let k = x_face.len() / 3;
    if k < 3 || x_face.len() != 3 * k {
        return Err(Error::Parameter("face state must hold at least 3 robots".into()));
    }
    if edge.a >= k {
        return Err(Error::Parameter(format!("edge index {} out of range for {k} robots", edge.a)));
    }
    let k_r = (block3(x_face, (edge.a + 1) % k) - block3(x_face, edge.a)).dot(&edge.neighbor_normal);
    let nu_f = k_r > 0.0;
    let nu_b = k_r < 0.0;
    let r = similarity_rotate(frame, &rotation_about_z(PI / k as f64));
    let mut u = DVector::zeros(3 * k);
    if nu_f || nu_b {
        for i in 0..k {
            let xi = block3(x_face, i);
            let ui = if nu_f {
                r * (block3(x_face, (i + 1) % k) - xi)
            } else {
                r.transpose() * (block3(x_face, (i + k - 1) % k) - xi)
            };
            set_block3(&mut u, i, &(ui * k_r.abs()));
        }
    }
    Ok(RotationalTerm { k_r, nu_f, nu_b, control: u })
}
