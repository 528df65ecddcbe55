//! Polygon formation subspace: the constraint matrix `V` whose null space is
//! the set of regular n-gons in a given plane, and its orthonormal factors.

use nalgebra::{DMatrix, DVector, Vector3};
use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{block_diag_repeat, kron, mat3_to_dmatrix, rotation_about_z, ShiftCirculant, Rotation3};

/// Relative singular-value tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolygonSpec {
    pub n: usize,
    /// `R_η`; the polygon normal is `R_ηᵀ e_z`.
    pub plane_rotation: Rotation3,
}

impl PolygonSpec {
    pub fn new(n: usize, plane_rotation: Rotation3) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("a polygon needs n >= 3 robots, got {n}")));
        }
        Ok(Self { n, plane_rotation })
    }

    pub fn planar(n: usize) -> Result<Self> {
        Self::new(n, Rotation3::identity())
    }
}

/// `V` together with a row-orthonormal `V̄` (same null space) and `Ū`, an
/// orthonormal basis of that null space stored as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    pub v: DMatrix<f64>,
    pub vbar: DMatrix<f64>,
    pub ubar: DMatrix<f64>,
    pub rank: usize,
}

impl ConstraintMatrix {
    pub fn from_v(v: DMatrix<f64>) -> Result<Self> {
        let (vbar, ubar) = orthonormalize(&v)?;
        let rank = vbar.nrows();
        Ok(Self { v, vbar, ubar, rank })
    }

    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn nullity(&self) -> usize {
        self.ubar.nrows()
    }
}

/// `𝒫ₙ = L₁⊗I₃ + (L₁−L₂)⊗R_{2π/n}`.
pub fn polygon_p(n: usize) -> Result<DMatrix<f64>> {
    let l1 = ShiftCirculant::new(n, 1)?.matrix();
    let l2 = ShiftCirculant::new(n, 2 % n)?.matrix();
    let r = mat3_to_dmatrix(&rotation_about_z(2.0 * PI / n as f64).matrix());
    Ok(kron(&l1, &DMatrix::identity(3, 3)) + kron(&(&l1 - &l2), &r))
}

/// Row selector `𝒲ₙ`: the first `n−2` rotational block rows, plus (when
/// `in_plane`) the z-component of block row `n−2`.
pub fn polygon_w(n: usize, in_plane: bool) -> DMatrix<f64> {
    let rows = 3 * (n - 2) + usize::from(in_plane);
    let mut w = DMatrix::zeros(rows, 3 * n);
    for r in 0..3 * (n - 2) {
        w[(r, r)] = 1.0;
    }
    if in_plane {
        w[(rows - 1, 3 * (n - 2) + 2)] = 1.0;
    }
    w
}

/// `𝒲ₙ 𝒫ₙ 𝓡_η` acting on the `n` robot blocks of a polygon.
pub fn polygon_rows(n: usize, plane_rotation: &Rotation3, in_plane: bool) -> Result<DMatrix<f64>> {
    let p = polygon_p(n)?;
    let w = polygon_w(n, in_plane);
    Ok(w * p * block_diag_repeat(n, &plane_rotation.matrix()))
}

pub fn build_polygon_v(spec: &PolygonSpec) -> Result<ConstraintMatrix> {
    if spec.n < 3 {
        return Err(Error::Parameter(format!("a polygon needs n >= 3 robots, got {}", spec.n)));
    }
    ConstraintMatrix::from_v(polygon_rows(spec.n, &spec.plane_rotation, true)?)
}

/// Split `ℝ^{cols}` into the row space of `v` and its complement, both with
/// orthonormal rows, via an SVD of `v` padded to a square matrix.
pub fn orthonormalize(v: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (rows, cols) = v.shape();
    if rows > cols {
        return Err(Error::Structural(format!(
            "{rows} constraint rows on {cols} coordinates cannot be independent"
        )));
    }
    let mut padded = DMatrix::zeros(cols, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(v);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = svd.singular_values[order[0]];
    let rank = order.iter().filter(|&&i| smax > 0.0 && svd.singular_values[i] > RANK_TOL * smax).count();
    if rank < rows {
        return Err(Error::Structural(format!(
            "constraint matrix has rank {rank} but {rows} rows"
        )));
    }
    let pick = |idx: &[usize]| {
        let mut m = DMatrix::zeros(idx.len(), cols);
        for (r, &i) in idx.iter().enumerate() {
            m.row_mut(r).copy_from(&vt.row(i));
        }
        m
    };
    Ok((pick(&order[..rank]), pick(&order[rank..])))
}

/// `‖V̄x‖`.
pub fn formation_error(cm: &ConstraintMatrix, x: &DVector<f64>) -> Result<f64> {
    check_dim(cm.dim(), x.len())?;
    Ok((&cm.vbar * x).norm())
}

pub fn is_on_subspace(cm: &ConstraintMatrix, x: &DVector<f64>, tol: f64) -> bool {
    formation_error(cm, x).map(|e| e <= tol).unwrap_or(false)
}

/// Stacked vertices of a regular n-gon whose indices run clockwise about the
/// normal `R_ηᵀ e_z`, the orientation the constraint matrix encodes.
pub fn regular_polygon(
    n: usize,
    center: &Vector3<f64>,
    circumradius: f64,
    phase: f64,
    plane_rotation: &Rotation3,
) -> DVector<f64> {
    let rt = plane_rotation.matrix().transpose();
    let mut x = DVector::zeros(3 * n);
    for i in 0..n {
        let a = phase - 2.0 * PI * i as f64 / n as f64;
        let p = center + rt * Vector3::new(a.cos(), a.sin(), 0.0) * circumradius;
        x.fixed_rows_mut::<3>(3 * i).copy_from(&p);
    }
    x
}

/// Circumradius of a regular n-gon with side length `side`.
pub fn circumradius_for_side(n: usize, side: f64) -> f64 {
    side / (2.0 * (PI / n as f64).sin())
}
