//! Circulant and block-circulant matrices, rotations about an axis, Kronecker
//! products and the small dense spectral helpers used by the controllers.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Matrix3, Unit, Vector3};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;

/// First row of an n×n circulant matrix.
///
/// Row `i` of the generated matrix is row `i-1` shifted right by one place,
/// so entry `(i, j)` is `first_row[(j - i) mod n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantSpec<T> {
    pub first_row: Vec<T>,
}

impl<T> CirculantSpec<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    pub fn new(first_row: Vec<T>) -> Result<Self> {
        if first_row.is_empty() {
            return Err(Error::Parameter("circulant needs at least one entry".into()));
        }
        Ok(Self { first_row })
    }

    pub fn n(&self) -> usize {
        self.first_row.len()
    }

    pub fn matrix(&self) -> DMatrix<T> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.first_row[(j + n - i) % n])
    }

    /// Recover the generating row of `m`, or `None` when `m` is not circulant
    /// to within `tol` (absolute, entrywise).
    pub fn from_matrix(m: &DMatrix<T>, tol: f64) -> Option<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return None;
        }
        let spec = Self { first_row: m.row(0).iter().copied().collect() };
        let regen = spec.matrix();
        let ok = m.iter().zip(regen.iter()).all(|(a, b)| (*a - *b).modulus() <= tol);
        ok.then_some(spec)
    }
}

/// Eigenvalues of a circulant matrix from the DFT of its first row, in index
/// order `k = 0..n` (not sorted).
///
/// `λ_k = Σ_p c_p ω^{k p}` with `ω = e^{2πj/n}`; the matching eigenvector has
/// components `ω^{k j} / √n`.
pub fn circulant_eigenvalues<T>(spec: &CirculantSpec<T>) -> Vec<Complex64>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = spec.n();
    (0..n)
        .map(|k| {
            spec.first_row
                .iter()
                .enumerate()
                .map(|(p, c)| {
                    let c = Complex64::new(c.real(), c.imaginary());
                    c * unit_root(n, (k * p) as f64)
                })
                .sum()
        })
        .collect()
}

/// Eigenvector paired with `circulant_eigenvalues(..)[k]`.
pub fn circulant_eigenvector(n: usize, k: usize) -> DVector<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DVector::from_fn(n, |j, _| unit_root(n, (k * j) as f64) * s)
}

fn unit_root(n: usize, power: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * power / n as f64)
}

/// The difference circulant `L_m = circ[1, 0, …, −1, …, 0]` with the −1 at
/// offset `m`, so `(L_m x)_i = x_i − x_{i+m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftCirculant {
    pub n: usize,
    pub m: usize,
}

impl ShiftCirculant {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter(format!("shift circulant needs n >= 3, got {n}")));
        }
        if m >= n {
            return Err(Error::Parameter(format!("shift offset {m} out of range for n = {n}")));
        }
        Ok(Self { n, m })
    }

    pub fn spec(&self) -> CirculantSpec<f64> {
        let mut row = vec![0.0; self.n];
        row[0] += 1.0;
        row[self.m] -= 1.0;
        CirculantSpec { first_row: row }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.spec().matrix()
    }
}

pub fn build_shift_circulant(n: usize, m: usize) -> Result<DMatrix<f64>> {
    Ok(ShiftCirculant::new(n, m)?.matrix())
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Proper rotation given by a unit axis and an angle (right-hand rule).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3 {
    pub axis: Vector3<f64>,
    pub angle: f64,
}

impl Rotation3 {
    pub fn new(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        let norm = axis.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(Error::Parameter("rotation axis must be a nonzero vector".into()));
        }
        Ok(Self { axis: axis / norm, angle })
    }

    pub fn identity() -> Self {
        Self { axis: Vector3::z(), angle: 0.0 }
    }

    pub fn about_z(angle: f64) -> Self {
        Self { axis: Vector3::z(), angle }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        nalgebra::Rotation3::from_axis_angle(&Unit::new_unchecked(self.axis), self.angle).into_inner()
    }

    /// Axis/angle of an orthogonal matrix with determinant +1.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix(m);
        match rot.axis_angle() {
            Some((axis, angle)) => Self { axis: axis.into_inner(), angle },
            None => Self::identity(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self { axis: self.axis, angle: -self.angle }
    }

    /// `self ∘ other`, i.e. the matrix product `self.matrix() * other.matrix()`.
    pub fn compose(&self, other: &Rotation3) -> Self {
        Self::from_matrix(&(self.matrix() * other.matrix()))
    }

    /// Eigenvalues in the order `e^{-jθ}, 1, e^{jθ}`.
    pub fn eigenvalues(&self) -> [Complex64; 3] {
        [
            Complex64::from_polar(1.0, -self.angle),
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, self.angle),
        ]
    }

    /// For a frame rotation `R_η`, the plane normal `R_ηᵀ e_z`.
    pub fn plane_normal(&self) -> Vector3<f64> {
        self.matrix().transpose() * Vector3::z()
    }
}

pub fn rotation_about_z(angle: f64) -> Rotation3 {
    Rotation3::about_z(angle)
}

/// `R_ηᵀ R R_η`: rotation by the same angle about `R_ηᵀ · axis(R)`.
pub fn similarity_rotate(r_eta: &Rotation3, r: &Rotation3) -> Matrix3<f64> {
    let e = r_eta.matrix();
    e.transpose() * r.matrix() * e
}

/// A frame rotation `R_η` whose plane normal `R_ηᵀ e_z` equals `normal`.
///
/// Rows of the matrix are `a, b, n` with `a = normalize(t × n)`, `b = n × a`
/// and `t` the coordinate axis least aligned with `n`.
pub fn frame_from_normal(normal: &Vector3<f64>) -> Result<Rotation3> {
    let norm = normal.norm();
    if !(norm > 1e-12) {
        return Err(Error::Parameter("plane normal must be nonzero".into()));
    }
    let n = normal / norm;
    let t = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = t.cross(&n).normalize();
    let b = n.cross(&a);
    let m = Matrix3::from_rows(&[a.transpose(), b.transpose(), n.transpose()]);
    Ok(Rotation3::from_matrix(&m))
}

/// `C ⊗ R` with `C` circulant and `R` a rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCirculant {
    pub circulant_part: CirculantSpec<f64>,
    pub block_part: Rotation3,
}

impl BlockCirculant {
    pub fn matrix(&self) -> DMatrix<f64> {
        let r = self.block_part.matrix();
        kron(&self.circulant_part.matrix(), &DMatrix::from_iterator(3, 3, r.iter().copied()))
    }

    /// Products `μ_i ν_k` of factor eigenvalues for `i = 0..n`, `k = -1, 0, 1`.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let rot = self.block_part.eigenvalues();
        circulant_eigenvalues(&self.circulant_part)
            .into_iter()
            .flat_map(|mu| rot.map(|nu| mu * nu))
            .collect()
    }
}

pub fn mat3_to_dmatrix(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(3, 3, m.iter().copied())
}

/// `I_n ⊗ R`.
pub fn block_diag_repeat(n: usize, r: &Matrix3<f64>) -> DMatrix<f64> {
    kron(&DMatrix::identity(n, n), &mat3_to_dmatrix(r))
}

pub fn sym_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = sym_part(a).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn lambda_min_sym(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::NAN)
}

pub fn lambda_max_sym(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).last().copied().unwrap_or(f64::NAN)
}

/// Singular values, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numeric_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > rel_tol * smax).count(),
        _ => 0,
    }
}

pub fn block3(x: &DVector<f64>, i: usize) -> Vector3<f64> {
    Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])
}

pub fn set_block3(x: &mut DVector<f64>, i: usize, v: &Vector3<f64>) {
    x[3 * i] = v.x;
    x[3 * i + 1] = v.y;
    x[3 * i + 2] = v.z;
}

pub fn add_block3(x: &mut DVector<f64>, i: usize, v: &Vector3<f64>) {
    x[3 * i] += v.x;
    x[3 * i + 1] += v.y;
    x[3 * i + 2] += v.z;
}

pub fn stack_points(points: &[Vector3<f64>]) -> DVector<f64> {
    DVector::from_iterator(3 * points.len(), points.iter().flat_map(|p| [p.x, p.y, p.z]))
}

pub fn unstack_points(x: &DVector<f64>) -> Vec<Vector3<f64>> {
    (0..x.len() / 3).map(|i| block3(x, i)).collect()
}
