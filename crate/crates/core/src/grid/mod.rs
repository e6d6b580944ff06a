//! Periodic torus discretization: grids, FFT-based derivative operators,
//! Leray projection, quadrature and the field containers.

mod field;
mod ops;

pub use field::{GradientField, MatrixField, ScalarField, TensorField, VectorField};
pub use ops::GridOps;

use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Derivative discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Fourier differentiation, exact for band-limited data.
    Spectral,
    /// Second-order central differences.
    Central2,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Spectral => "spectral",
            Scheme::Central2 => "central2",
        }
    }

    pub(crate) fn code(&self) -> u32 {
        match self {
            Scheme::Spectral => 0,
            Scheme::Central2 => 1,
        }
    }

    pub(crate) fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(Scheme::Spectral),
            1 => Some(Scheme::Central2),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spectral" => Ok(Scheme::Spectral),
            "central2" | "central-2nd-order" | "fd" => Ok(Scheme::Central2),
            other => Err(format!("unknown scheme `{other}` (expected spectral or central2)")),
        }
    }
}

/// A uniform periodic grid with `n` points per axis on `[0, length)^dim`.
///
/// Fields always carry 3x3 tensor or 3-vector values; in two dimensions the
/// third coordinate is absent and `∂_3` vanishes identically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    scheme: Scheme,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64, scheme: Scheme) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Grid(format!("dim must be 2 or 3, got {dim}")));
        }
        if n < 8 {
            return Err(Error::Grid(format!("n must be at least 8, got {n}")));
        }
        if scheme == Scheme::Spectral && n % 2 != 0 {
            return Err(Error::Grid(format!("spectral grids need even n, got {n}")));
        }
        if dim == 3 && n > 32 {
            return Err(Error::Grid(format!("3D grids are limited to n <= 32, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Grid(format!("length must be positive, got {length}")));
        }
        Ok(Grid {
            dim,
            n,
            length,
            scheme,
        })
    }

    /// Two-dimensional torus of period `2π`.
    pub fn square(n: usize, scheme: Scheme) -> Result<Self> {
        Grid::new(2, n, 2.0 * PI, scheme)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Result<Self> {
        Grid::new(self.dim, self.n, self.length, scheme)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Flat index `ix + n·iy + n²·iz`.
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Coordinates of a grid point; the third entry is zero in 2D.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let m = self.multi_index(idx);
        [m[0] as f64 * h, m[1] as f64 * h, m[2] as f64 * h]
    }
}
