//! Symmetric cyclic pursuit for a single polygon and its eigenvalue-based
//! convergence certificate.

use nalgebra::{DMatrix, DVector, Matrix3};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    block3, block_diag_repeat, kron, lambda_min_sym, mat3_to_dmatrix, rotation_about_z, set_block3,
    similarity_rotate, Rotation3, ShiftCirculant,
};
use crate::report::CertificationEntry;
use crate::subspace::{polygon_p, ConstraintMatrix, RANK_TOL};

/// Definiteness threshold: a margin must exceed this to certify.
pub const DEFINITENESS_TOL: f64 = 1e-10;

/// Closed-form and numeric margins may differ by this much (relative to the
/// spectral scale) before the numeric value takes over.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicParams {
    pub n: usize,
    pub horizon: usize,
    /// `k_m` for `m = 1..=horizon`.
    pub gains: Vec<f64>,
    /// `α_m` for `m = 1..=horizon`.
    pub angles: Vec<f64>,
    pub plane_rotation: Rotation3,
}

impl CyclicParams {
    /// Gains must be finite and nonnegative. A zero gain is accepted so that
    /// degenerate configurations can be reported as uncertified instead of
    /// rejected at parse time.
    pub fn new(
        n: usize,
        gains: Vec<f64>,
        angles: Vec<f64>,
        plane_rotation: Rotation3,
    ) -> Result<Self> {
        let horizon = gains.len();
        if n < 3 {
            return Err(Error::Parameter(format!("cyclic pursuit needs n >= 3, got {n}")));
        }
        if horizon == 0 || horizon >= n - 1 {
            return Err(Error::Parameter(format!(
                "horizon must satisfy 0 < N < n-1, got N = {horizon}, n = {n}"
            )));
        }
        if angles.len() != horizon {
            return Err(Error::Dimension { expected: horizon, got: angles.len() });
        }
        if gains.iter().any(|k| !k.is_finite() || *k < 0.0) {
            return Err(Error::Parameter("cyclic gains must be finite and nonnegative".into()));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Parameter("rotation angles must be finite".into()));
        }
        Ok(Self { n, horizon, gains, angles, plane_rotation })
    }

    /// Uniform gain `k` with the fixed-size angles `α_m = mπ/n`.
    pub fn uniform(n: usize, horizon: usize, k: f64, plane_rotation: Rotation3) -> Result<Self> {
        Self::new(n, vec![k; horizon], fixed_size_angles(n, horizon), plane_rotation)
    }

    pub fn with_angles(&self, angles: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.gains.clone(), angles, self.plane_rotation)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.gains.iter().map(|k| k * c).collect(), self.angles.clone(), self.plane_rotation)
    }

    /// `R_ηᵀ R_{α_m} R_η` for each `m`.
    pub fn world_rotations(&self) -> Vec<Matrix3<f64>> {
        self.angles
            .iter()
            .map(|a| similarity_rotate(&self.plane_rotation, &rotation_about_z(*a)))
            .collect()
    }
}

pub fn fixed_size_angles(n: usize, horizon: usize) -> Vec<f64> {
    (1..=horizon).map(|m| m as f64 * PI / n as f64).collect()
}

/// Drift term `g(x)` of the open-loop robots, with a caller-supplied bound on
/// `λ_max(𝒫ₙ ∂g/∂x 𝒫ₙᵀ)`.
#[derive(Clone, Default)]
pub struct InternalDynamics {
    pub g: Option<Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>>,
    pub jacobian_sup: f64,
}

impl InternalDynamics {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.g {
            Some(g) => g(x),
            None => DVector::zeros(x.len()),
        }
    }
}

impl fmt::Debug for InternalDynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InternalDynamics")
            .field("g", &self.g.as_ref().map(|_| "<fn>"))
            .field("jacobian_sup", &self.jacobian_sup)
            .finish()
    }
}

/// `u_i = Σ_m k_m [R_m(x_{i+m} − x_i) + R_mᵀ(x_{i−m} − x_i)]` with the
/// rotations expressed in the world frame.
pub fn cyclic_control(x: &DVector<f64>, p: &CyclicParams) -> Result<DVector<f64>> {
    check_dim(3 * p.n, x.len())?;
    let n = p.n;
    let rots = p.world_rotations();
    let mut u = DVector::zeros(3 * n);
    for i in 0..n {
        let xi = block3(x, i);
        let mut ui = nalgebra::Vector3::zeros();
        for (m0, (k, r)) in p.gains.iter().zip(rots.iter()).enumerate() {
            let m = m0 + 1;
            let fwd = block3(x, (i + m) % n) - xi;
            let back = block3(x, (i + n - m) % n) - xi;
            ui += (r * fwd + r.transpose() * back) * *k;
        }
        set_block3(&mut u, i, &ui);
    }
    Ok(u)
}

/// `L_m⊗R + L_mᵀ⊗Rᵀ` with `R` a rotation by `alpha` about `e_z`.
pub fn assemble_l_term(n: usize, m: usize, alpha: f64) -> Result<DMatrix<f64>> {
    let l = ShiftCirculant::new(n, m)?.matrix();
    let r = mat3_to_dmatrix(&rotation_about_z(alpha).matrix());
    Ok(kron(&l, &r) + kron(&l.transpose(), &r.transpose()))
}

/// `𝓛_η = 𝓡_ηᵀ (Σ_m k_m (L_m⊗R_m + L_mᵀ⊗R_mᵀ)) 𝓡_η`, so that `u = −𝓛_η x`.
pub fn assemble_l(p: &CyclicParams) -> Result<DMatrix<f64>> {
    let n = p.n;
    let mut l = DMatrix::zeros(3 * n, 3 * n);
    for (m0, (k, a)) in p.gains.iter().zip(p.angles.iter()).enumerate() {
        l += assemble_l_term(n, m0 + 1, *a)? * *k;
    }
    let re = block_diag_repeat(n, &p.plane_rotation.matrix());
    Ok(re.transpose() * l * re)
}

/// Closed-form eigenvalue `λ^(m)_{ik}` of `𝒫ₙ (L_m⊗R_α + L_mᵀ⊗R_αᵀ) 𝒫ₙᵀ`,
/// with `i` one-based and `k ∈ {−1, 0, 1}`.
pub fn eigen_term(n: usize, m: usize, alpha: f64, i: usize, k: i32) -> f64 {
    let nf = n as f64;
    let ka = k as f64 * alpha;
    let phase = 2.0 * PI * (m * (i - 1)) as f64 / nf;
    let lap = 2.0 * (ka.cos() - (ka + phase).cos());
    let chord = |p: f64| 2.0 - 2.0 * (2.0 * PI * p / nf).cos();
    let i0 = (i - 1) as f64;
    lap * chord(i0) * chord(i0 + k as f64)
}

/// True for the five modes annihilated by `𝒫ₙ` (translations along every
/// axis plus scaling and rotation in the plane).
pub fn is_null_mode(n: usize, i: usize, k: i32) -> bool {
    i == 1 || (i == 2 && k == -1) || (i == n && k == 1)
}

/// All `3n` closed-form values in `(i, k)` order.
pub fn theorem4_eigenvalues(n: usize, m: usize, alpha: f64) -> Vec<f64> {
    (1..=n)
        .flat_map(|i| [-1, 0, 1].map(|k| eigen_term(n, m, alpha, i, k)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem4Report {
    /// Min of `Σ_m k_m λ^(m)_{ik}` over the non-null modes.
    pub closed_form_min: f64,
    /// `(i, k)` achieving `closed_form_min`.
    pub argmin: (usize, i32),
    /// Same minimum from a dense eigendecomposition restricted to `range(𝒫ₙ)`.
    pub numeric_min: f64,
    pub margin: f64,
    pub certified: bool,
    pub warnings: Vec<String>,
}

impl Theorem4Report {
    pub fn entry(&self) -> CertificationEntry {
        CertificationEntry {
            check: "polygon-eigenvalue".into(),
            margin: self.margin,
            certified: self.certified,
            warnings: self.warnings.clone(),
        }
    }
}

/// Orthonormal basis (columns) of the column space of `a`.
fn range_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let cols: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&j| svd.singular_values[j] > RANK_TOL * smax).collect();
    DMatrix::from_fn(a.nrows(), cols.len(), |r, c| u[(r, cols[c])])
}

/// Minimum over the non-null `(i, k)` modes of the closed-form spectrum,
/// cross-checked against dense numerics. Definiteness is invariant under the
/// plane rotation, so the check runs in the polygon frame.
pub fn theorem4_margin(p: &CyclicParams, dynamics: &InternalDynamics) -> Result<Theorem4Report> {
    let n = p.n;
    let mut best = (f64::INFINITY, (0usize, 0i32));
    let mut scale = 0.0f64;
    for i in 1..=n {
        for k in [-1, 0, 1] {
            let v: f64 = p
                .gains
                .iter()
                .zip(p.angles.iter())
                .enumerate()
                .map(|(m0, (g, a))| g * eigen_term(n, m0 + 1, *a, i, k))
                .sum();
            if !v.is_finite() {
                return Err(Error::Consistency(format!("non-finite eigenvalue at mode ({i}, {k})")));
            }
            scale = scale.max(v.abs());
            if !is_null_mode(n, i, k) && v < best.0 {
                best = (v, (i, k));
            }
        }
    }

    let pn = polygon_p(n)?;
    let frame = CyclicParams { plane_rotation: Rotation3::identity(), ..p.clone() };
    let a = &pn * assemble_l(&frame)? * pn.transpose();
    let q = range_basis(&pn);
    let numeric_min = lambda_min_sym(&(q.transpose() * a * &q));

    let mut warnings = Vec::new();
    let chosen = if (best.0 - numeric_min).abs() > CROSS_CHECK_TOL * scale.max(1.0) {
        warnings.push(format!(
            "closed-form minimum {:.9e} disagrees with numeric {:.9e}; using numeric",
            best.0, numeric_min
        ));
        numeric_min
    } else {
        best.0
    };
    let margin = chosen - dynamics.jacobian_sup;
    Ok(Theorem4Report {
        closed_form_min: best.0,
        argmin: best.1,
        numeric_min,
        margin,
        certified: margin > DEFINITENESS_TOL,
        warnings,
    })
}

/// `λ_min` of the symmetric part of `V̄ 𝓛 V̄ᵀ`.
pub fn contraction_rate(cm: &ConstraintMatrix, l: &DMatrix<f64>) -> f64 {
    lambda_min_sym(&(&cm.vbar * l * cm.vbar.transpose()))
}
