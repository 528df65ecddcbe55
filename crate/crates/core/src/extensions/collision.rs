//! Repulsive-potential collision avoidance and its gated and soft variants.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_block3, block3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionVariant {
    HardRpf,
    /// Active only while the pair is closing (negative line-of-sight speed).
    LosGated,
    TanhSoft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionParams {
    /// Bounding radius; distances at or below it are collisions.
    pub r1: f64,
    /// Detection radius.
    pub r2: f64,
    pub variant: CollisionVariant,
    /// Gain of the soft variant.
    pub k_coll: f64,
    /// Reference spacing of the soft variant, `tanh(ρ − d)`.
    pub rho: f64,
}

impl CollisionParams {
    pub fn new(r1: f64, r2: f64, variant: CollisionVariant, k_coll: f64, rho: f64) -> Result<Self> {
        if !(r1 > 0.0 && r1 < r2) || !r2.is_finite() {
            return Err(Error::Parameter(format!("need 0 < r1 < r2, got r1 = {r1}, r2 = {r2}")));
        }
        Ok(Self { r1, r2, variant, k_coll, rho })
    }

    pub fn hard(r1: f64, r2: f64) -> Result<Self> {
        Self::new(r1, r2, CollisionVariant::HardRpf, 0.0, 0.0)
    }
}

/// Pairwise potential; zero beyond `r₂`, unbounded as `d → r₁⁺`.
pub fn rpf_value(d: f64, cp: &CollisionParams) -> Result<f64> {
    let (r1, r2) = (cp.r1, cp.r2);
    if d <= r1 {
        return Err(Error::Domain(format!("potential undefined at d = {d} <= r1 = {r1}")));
    }
    if d > r2 {
        return Ok(0.0);
    }
    let w = r2 - r1;
    let v = 2.0 * w * w.ln() - r1;
    Ok(w * w / (d - r1) + 2.0 * w * (d - r1).ln() - d - v)
}

/// Normalized force magnitude `(d − r₂)² / (d (d − r₁)²)` on `(r₁, r₂]`.
pub fn rpf_force(d: f64, cp: &CollisionParams) -> Result<f64> {
    if d <= cp.r1 {
        return Err(Error::Domain(format!("force undefined at d = {d} <= r1 = {}", cp.r1)));
    }
    if d > cp.r2 {
        return Ok(0.0);
    }
    Ok((d - cp.r2).powi(2) / (d * (d - cp.r1).powi(2)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

/// Escape velocities for every robot. Returns the first pair found at or
/// inside `r₁` as an event instead of a control.
pub fn collision_control(
    x: &DVector<f64>,
    velocities: Option<&DVector<f64>>,
    cp: &CollisionParams,
) -> std::result::Result<DVector<f64>, CollisionEvent> {
    let n = x.len() / 3;
    let mut u = DVector::zeros(x.len());
    for i in 0..n {
        for j in i + 1..n {
            let rel = block3(x, j) - block3(x, i);
            let d = rel.norm();
            if d <= cp.r1 {
                return Err(CollisionEvent { i, j, distance: d });
            }
            if d > cp.r2 {
                continue;
            }
            let w = match cp.variant {
                CollisionVariant::HardRpf => rpf_force(d, cp).expect("d > r1"),
                CollisionVariant::LosGated => {
                    let vs = velocities
                        .map(|v| (block3(v, j) - block3(v, i)).dot(&rel) / d)
                        .unwrap_or(-1.0);
                    if vs < 0.0 {
                        rpf_force(d, cp).expect("d > r1")
                    } else {
                        0.0
                    }
                }
                CollisionVariant::TanhSoft => cp.k_coll * (cp.rho - d).tanh(),
            };
            let push: Vector3<f64> = rel * w;
            add_block3(&mut u, i, &(-push));
            add_block3(&mut u, j, &push);
        }
    }
    Ok(u)
}

/// Smallest pairwise distance.
pub fn min_pair_distance(x: &DVector<f64>) -> f64 {
    let n = x.len() / 3;
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            best = best.min((block3(x, j) - block3(x, i)).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp() -> CollisionParams {
        CollisionParams::hard(0.4, 1.2).unwrap()
    }

    #[test]
    fn zero_at_detection_radius() {
        let c = cp();
        assert_eq!(rpf_force(1.2, &c).unwrap(), 0.0);
        assert!(rpf_value(1.2, &c).unwrap().abs() < 1e-14);
        assert_eq!(rpf_force(1.2 + 1e-12, &c).unwrap(), 0.0);
        assert!(rpf_force(1.2 - 1e-9, &c).unwrap() < 1e-15);
        assert!(rpf_value(0.4, &c).is_err());
        assert!(rpf_force(0.3, &c).is_err());
    }

    #[test]
    fn blows_up_at_bounding_radius() {
        let c = cp();
        let mut last = 0.0;
        for k in 1..12 {
            let d = 0.4 + 0.5f64.powi(k);
            let f = rpf_force(d, &c).unwrap();
            assert!(f > last);
            last = f;
        }
        assert!(last > 1e5);
    }

    #[test]
    fn far_apart_no_push() {
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
        assert_eq!(collision_control(&x, None, &cp()).unwrap().norm(), 0.0);
    }

    #[test]
    fn receding_pair_gated() {
        let mut c = cp();
        c.variant = CollisionVariant::LosGated;
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.8, 0.0, 0.0]);
        let v = DVector::from_vec(vec![-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(collision_control(&x, Some(&v), &c).unwrap().norm(), 0.0);
        let v = -v;
        assert!(collision_control(&x, Some(&v), &c).unwrap().norm() > 0.0);
    }

    #[test]
    fn pair_is_antisymmetric_and_repulsive() {
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.3, 0.5, 0.1]);
        let u = collision_control(&x, None, &cp()).unwrap();
        assert!((block3(&u, 0) + block3(&u, 1)).norm() < 1e-15);
        assert!(block3(&u, 0).dot(&(block3(&x, 1) - block3(&x, 0))) < 0.0);
    }

    #[test]
    fn collision_reported() {
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.2, 0.0, 0.0]);
        let e = collision_control(&x, None, &cp()).unwrap_err();
        assert_eq!((e.i, e.j), (0, 1));
    }
}
