//! Cyclic index assignment from projected bearing angles.

use nalgebra::{Vector2, Vector3};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::linalg::Rotation3;

/// Projection tolerance below which two robots count as coincident.
pub const COINCIDENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// `order[k]` is the original index of the robot placed at slot `k`.
    pub order: Vec<usize>,
    /// Set when coincident projections or equal bearings forced a tie-break.
    pub tie_break: bool,
}

impl Assignment {
    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| items[i].clone()).collect()
    }
}

/// In-plane coordinates in the frame `R_η` relative to the projected centroid.
pub fn project_to_plane(positions: &[Vector3<f64>], plane_rotation: &Rotation3) -> Vec<Vector2<f64>> {
    let r = plane_rotation.matrix();
    let c = positions.iter().sum::<Vector3<f64>>() / positions.len().max(1) as f64;
    positions
        .iter()
        .map(|p| {
            let q = r * (p - c);
            Vector2::new(q.x, q.y)
        })
        .collect()
}

/// Order robots clockwise about the plane normal `R_ηᵀe_z`, starting from
/// robot 0, so the cyclic order traces a simple star-shaped polygon.
pub fn assign_indices(positions: &[Vector3<f64>], plane_rotation: &Rotation3) -> Result<Assignment> {
    let n = positions.len();
    if n < 3 {
        return Err(Error::Parameter(format!("index assignment needs at least 3 robots, got {n}")));
    }
    let pts = project_to_plane(positions, plane_rotation);
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
    let mut tie_break = pts.iter().any(|p| p.norm() <= COINCIDENT_TOL * scale);
    for i in 0..n {
        for j in i + 1..n {
            if (pts[i] - pts[j]).norm() <= COINCIDENT_TOL * scale {
                tie_break = true;
            }
        }
    }
    let theta: Vec<f64> = pts.iter().map(|p| p.y.atan2(p.x)).collect();
    let key: Vec<f64> = theta.iter().map(|t| (theta[0] - t).rem_euclid(TAU)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps original index order among equal bearings
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]));
    if order.windows(2).any(|w| (key[w[0]] - key[w[1]]).abs() <= 1e-12) {
        tie_break = true;
    }
    // robot 0 sits at key 0 but a tie may have moved another robot ahead of it
    if let Some(pos) = order.iter().position(|&i| i == 0) {
        order.rotate_left(pos);
    }
    Ok(Assignment { order, tie_break })
}
