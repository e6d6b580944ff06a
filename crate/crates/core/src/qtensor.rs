//! Small-matrix algebra on S0, the symmetric traceless 3x3 tensors.
//!
//! Tensors are stored as full 3x3 matrices; the constructors enforce
//! symmetry and tracelessness instead of using a 5-parameter basis.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};

use crate::eigen;
use crate::error::{Error, Result};

/// Tolerance on `|u| - 1` for directors.
pub const DIRECTOR_TOL: f64 = 1e-12;

/// A symmetric traceless 3x3 tensor: the nematic order parameter at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QTensor(Matrix3<f64>);

impl Default for QTensor {
    fn default() -> Self {
        Self::zero()
    }
}

impl QTensor {
    pub fn zero() -> Self {
        QTensor(Matrix3::zeros())
    }

    /// Checks symmetry (1e-14 absolute per entry) and tracelessness
    /// (1e-14 relative to `1 + |M|`).
    pub fn try_from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let asym = (m - m.transpose()).abs().max();
        if asym > 1e-14 {
            return Err(Error::NotInS0(format!("asymmetry {asym:.3e}")));
        }
        let tr = m.trace();
        if tr.abs() > 1e-14 * (1.0 + m.norm()) {
            return Err(Error::NotInS0(format!("trace {tr:.3e}")));
        }
        Ok(QTensor(m))
    }

    /// Wraps a matrix the caller already knows to be in S0.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        QTensor(m)
    }

    /// Builds a tensor from its five independent entries
    /// `(Q11, Q12, Q13, Q22, Q23)`; `Q33 = -Q11 - Q22`.
    pub fn from_components(c: [f64; 5]) -> Self {
        let [q11, q12, q13, q22, q23] = c;
        QTensor(Matrix3::new(
            q11,
            q12,
            q13,
            q12,
            q22,
            q23,
            q13,
            q23,
            -q11 - q22,
        ))
    }

    pub fn components(&self) -> [f64; 5] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)]]
    }

    pub fn diag(d1: f64, d2: f64, d3: f64) -> Result<Self> {
        Self::try_from_matrix(Matrix3::from_diagonal(&Vector3::new(d1, d2, d3)))
    }

    /// `diag(-s/3, -s/3, 2s/3)`, the diagonal uniaxial tensor with director e3.
    pub fn q_plus(s_plus: f64) -> Self {
        QTensor(Matrix3::from_diagonal(&Vector3::new(
            -s_plus / 3.0,
            -s_plus / 3.0,
            2.0 * s_plus / 3.0,
        )))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.0
    }

    pub fn frobenius(&self, other: &QTensor) -> f64 {
        frobenius(&self.0, &other.0)
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn eigen(&self) -> EigenSystem {
        eigen_decompose(self)
    }
}

impl Add for QTensor {
    type Output = QTensor;
    fn add(self, rhs: QTensor) -> QTensor {
        QTensor(self.0 + rhs.0)
    }
}

impl Sub for QTensor {
    type Output = QTensor;
    fn sub(self, rhs: QTensor) -> QTensor {
        QTensor(self.0 - rhs.0)
    }
}

impl AddAssign for QTensor {
    fn add_assign(&mut self, rhs: QTensor) {
        self.0 += rhs.0;
    }
}

impl SubAssign for QTensor {
    fn sub_assign(&mut self, rhs: QTensor) {
        self.0 -= rhs.0;
    }
}

impl Mul<f64> for QTensor {
    type Output = QTensor;
    fn mul(self, rhs: f64) -> QTensor {
        QTensor(self.0 * rhs)
    }
}

impl Mul<QTensor> for f64 {
    type Output = QTensor;
    fn mul(self, rhs: QTensor) -> QTensor {
        QTensor(rhs.0 * self)
    }
}

impl Neg for QTensor {
    type Output = QTensor;
    fn neg(self) -> QTensor {
        QTensor(-self.0)
    }
}

/// Frobenius-orthogonal projection onto S0: `(M + Mᵀ)/2 - (tr M / 3) I`.
pub fn symmetrize_traceless(m: &Matrix3<f64>) -> QTensor {
    let mut s = (m + m.transpose()) * 0.5;
    let t = s.trace() / 3.0;
    for i in 0..3 {
        s[(i, i)] -= t;
    }
    QTensor(s)
}

/// `⟨A, B⟩ = Σ A_ij B_ij`.
pub fn frobenius(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// `[A, B] = AB - BA`.
pub fn lie_bracket(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
    a * b - b * a
}

/// A proper rotation matrix (orthogonal, determinant +1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    pub fn try_from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        if orth > 1e-12 {
            return Err(Error::NotARotation(format!("|RᵀR - I| = {orth:.3e}")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::NotARotation(format!("det = {det}")));
        }
        Ok(Rotation(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `Rᵀ M R`.
    pub fn conjugate(&self, m: &Matrix3<f64>) -> Matrix3<f64> {
        self.0.transpose() * m * self.0
    }

    pub fn column(&self, j: usize) -> Vector3<f64> {
        self.0.column(j).into_owned()
    }
}

/// Eigenvalues in ascending order, eigenvectors as the columns of a rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: [f64; 3],
    pub rotation: Rotation,
}

impl EigenSystem {
    /// `R diag(μ) Rᵀ`.
    pub fn reconstruct(&self) -> Matrix3<f64> {
        let r = self.rotation.matrix();
        let d = Matrix3::from_diagonal(&Vector3::from(self.eigenvalues));
        r * d * r.transpose()
    }
}

/// Closed-form eigen-decomposition of an S0 tensor; see [`eigen`] for the
/// tie-breaking rules.
pub fn eigen_decompose(q: &QTensor) -> EigenSystem {
    let (vals, vecs) = eigen::symmetric_eigen(q.matrix());
    EigenSystem {
        eigenvalues: vals,
        rotation: Rotation::from_matrix_unchecked(vecs),
    }
}

/// `s (u ⊗ u - I/3)`.
pub fn uniaxial_from_director(u: &Vector3<f64>, s_plus: f64) -> Result<QTensor> {
    let norm = u.norm();
    if (norm - 1.0).abs() > DIRECTOR_TOL {
        return Err(Error::NonUnitDirector { norm });
    }
    Ok(uniaxial_unchecked(u, s_plus))
}

pub(crate) fn uniaxial_unchecked(u: &Vector3<f64>, s_plus: f64) -> QTensor {
    let mut m = u * u.transpose();
    for i in 0..3 {
        m[(i, i)] -= 1.0 / 3.0;
    }
    QTensor(m * s_plus)
}
