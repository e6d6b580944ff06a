use nalgebra::{Matrix3, Vector3};

use super::ops::Components;
use super::Grid;
use crate::energy::Gradient;
use crate::error::{Error, Result};
use crate::qtensor::QTensor;

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if grid.len() == len {
        Ok(())
    } else {
        Err(Error::Grid(format!("expected {} values, got {len}", grid.len())))
    }
}

/// A field of Q-tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: Grid,
    values: Vec<QTensor>,
}

impl TensorField {
    pub fn new(grid: Grid, values: Vec<QTensor>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(TensorField { grid, values })
    }

    pub fn constant(grid: Grid, q: QTensor) -> Self {
        TensorField {
            grid,
            values: vec![q; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, QTensor::zero())
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> QTensor) -> Self {
        TensorField {
            grid,
            values: (0..grid.len()).map(|i| f(grid.coords(i))).collect(),
        }
    }

    /// Builds a field from the five arrays `(Q11, Q12, Q13, Q22, Q23)`.
    pub fn from_components(grid: Grid, c: [&[f64]; 5]) -> Self {
        let values = (0..grid.len())
            .map(|i| QTensor::from_components([c[0][i], c[1][i], c[2][i], c[3][i], c[4][i]]))
            .collect();
        TensorField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[QTensor] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [QTensor] {
        &mut self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One of the five independent entries, `c` indexing `(Q11, Q12, Q13, Q22, Q23)`.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|q| q.components()[c]).collect()
    }

    pub fn map(&self, f: impl Fn(&QTensor) -> QTensor) -> Self {
        TensorField {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn zip_map(&self, other: &TensorField, f: impl Fn(&QTensor, &QTensor) -> QTensor) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(TensorField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        })
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &TensorField) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        TensorField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| *a + *b * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &TensorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.matrix() - b.matrix()).abs().max())
            .fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }
}

impl Components for TensorField {
    fn component_arrays(&self) -> Vec<Vec<f64>> {
        (0..9)
            .map(|e| self.values.iter().map(|q| q.matrix()[(e / 3, e % 3)]).collect())
            .collect()
    }
}

/// A field of 3-vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    values: Vec<Vector3<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, values: Vec<Vector3<f64>>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(VectorField { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Grid, values: Vec<Vector3<f64>>) -> Self {
        VectorField { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            values: vec![Vector3::zeros(); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> Vector3<f64>) -> Self {
        VectorField {
            grid,
            values: (0..grid.len()).map(|i| f(grid.coords(i))).collect(),
        }
    }

    pub fn from_components(grid: Grid, c: [&[f64]; 3]) -> Self {
        VectorField {
            grid,
            values: (0..grid.len()).map(|i| Vector3::new(c[0][i], c[1][i], c[2][i])).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[Vector3<f64>] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[i]).collect()
    }

    pub fn axpy(&self, s: f64, other: &VectorField) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        VectorField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs().max())
            .fold(0.0, f64::max)
    }
}

impl Components for VectorField {
    fn component_arrays(&self) -> Vec<Vec<f64>> {
        (0..3).map(|i| self.component(i)).collect()
    }
}

/// A field of general 3x3 matrices (velocity gradients, stresses).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    grid: Grid,
    values: Vec<Matrix3<f64>>,
}

impl MatrixField {
    pub fn new(grid: Grid, values: Vec<Matrix3<f64>>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(MatrixField { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Grid, values: Vec<Matrix3<f64>>) -> Self {
        MatrixField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[Matrix3<f64>] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> Vec<f64> {
        self.values.iter().map(|m| m[(i, j)]).collect()
    }

    pub fn map(&self, f: impl Fn(&Matrix3<f64>) -> Matrix3<f64>) -> Self {
        MatrixField {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl Components for MatrixField {
    fn component_arrays(&self) -> Vec<Vec<f64>> {
        (0..9).map(|e| self.entry(e / 3, e % 3)).collect()
    }
}

/// A real-valued field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        ScalarField {
            grid,
            values: (0..grid.len()).map(|i| f(grid.coords(i))).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Components for ScalarField {
    fn component_arrays(&self) -> Vec<Vec<f64>> {
        vec![self.values.clone()]
    }
}

/// Pointwise spatial gradients `p[k] = ∂_k Q` of a tensor field, or any
/// other field shaped like one (e.g. `∂f_E/∂p`).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    grid: Grid,
    values: Vec<Gradient>,
}

impl GradientField {
    pub fn new(grid: Grid, values: Vec<Gradient>) -> Result<Self> {
        check_len(&grid, values.len())?;
        Ok(GradientField { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Grid, values: Vec<Gradient>) -> Self {
        GradientField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[Gradient] {
        &self.values
    }

    /// Pointwise `Σ_k |p[k]|²`.
    pub fn norm_squared(&self) -> Vec<f64> {
        self.values.iter().map(|p| p.iter().map(|m| m.norm_squared()).sum()).collect()
    }
}
