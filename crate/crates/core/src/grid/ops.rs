//! FFT-backed operators on a periodic grid.
//!
//! Layout and normalization: fields are stored as real arrays indexed
//! `ix + n·iy + n²·iz` and transformed with a full complex FFT along each
//! axis. The forward transform is unnormalized and the inverse divides by
//! the number of points, so `inverse(forward(f)) = f`.
//!
//! Every derivative is a Fourier multiplier `iκ`. For the spectral scheme
//! `κ = 2πm/length` with the Nyquist mode zeroed; for central differences
//! `κ = sin(2πm/n)/h`, which reproduces the `(f[i+1] - f[i-1]) / 2h` stencil
//! exactly. The Laplacian is `-|κ|²`, i.e. the composition of the first
//! derivatives, and the Leray projector is `I - κκᵀ/|κ|²` with the same `κ`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{GradientField, MatrixField, TensorField, VectorField};
use super::{Grid, Scheme};
use crate::error::{Error, Result};

#[derive(Clone)]
pub struct GridOps {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kappa: Vec<[f64; 3]>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for GridOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridOps").field("grid", &self.grid).finish()
    }
}

fn signed_mode(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

impl GridOps {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let h = grid.spacing();
        let axis_symbol: Vec<f64> = (0..n)
            .map(|m| {
                let ms = signed_mode(m, n);
                match grid.scheme() {
                    Scheme::Spectral => {
                        if n % 2 == 0 && m == n / 2 {
                            0.0
                        } else {
                            2.0 * PI * ms as f64 / grid.length()
                        }
                    }
                    Scheme::Central2 => (2.0 * PI * ms as f64 / n as f64).sin() / h,
                }
            })
            .collect();
        let axis_keep: Vec<bool> = (0..n)
            .map(|m| 3 * signed_mode(m, n).unsigned_abs() as usize <= n)
            .collect();
        let mut kappa = Vec::with_capacity(grid.len());
        let mut keep = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let mi = grid.multi_index(idx);
            let mut k = [0.0; 3];
            let mut kp = true;
            for d in 0..grid.dim() {
                k[d] = axis_symbol[mi[d]];
                kp &= axis_keep[mi[d]];
            }
            kappa.push(k);
            keep.push(kp);
        }
        GridOps {
            grid,
            fwd,
            inv,
            kappa,
            keep,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub(crate) fn check(&self, g: &Grid) -> Result<()> {
        if *g == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Derivative symbol `κ` of a flat Fourier index.
    pub fn kappa(&self, idx: usize) -> [f64; 3] {
        self.kappa[idx]
    }

    /// Laplacian symbol `-|κ|²`.
    pub fn laplacian_symbol(&self, idx: usize) -> f64 {
        let k = self.kappa[idx];
        -(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
    }

    /// Whether a mode survives the 2/3-rule truncation (`|m| ≤ n/3` on every axis).
    pub fn keeps_mode(&self, idx: usize) -> bool {
        self.keep[idx]
    }

    /// Largest `|κ|²` on the grid.
    pub fn max_wavenumber_squared(&self) -> f64 {
        self.kappa
            .iter()
            .map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
            .fold(0.0, f64::max)
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inv } else { &self.fwd };
        let n = self.grid.n();
        // Axis 0 is contiguous: rustfft transforms consecutive chunks of n.
        fft.process(buf);
        let mut scratch = vec![Complex64::new(0.0, 0.0); buf.len()];
        for axis in 1..self.grid.dim() {
            let stride = n.pow(axis as u32);
            let outer = buf.len() / (n * stride);
            let mut line = 0;
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for j in 0..n {
                        scratch[line * n + j] = buf[base + j * stride];
                    }
                    line += 1;
                }
            }
            fft.process(&mut scratch);
            line = 0;
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for j in 0..n {
                        buf[base + j * stride] = scratch[line * n + j];
                    }
                    line += 1;
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.grid.len(), "field length does not match grid");
        let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    /// Inverse transform; returns the real part scaled by `1/N`.
    pub fn inverse(&self, mut hat: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut hat, true);
        let scale = 1.0 / hat.len() as f64;
        hat.iter().map(|z| z.re * scale).collect()
    }

    /// Full complex inverse, scaled by `1/N`.
    pub fn inverse_complex(&self, mut hat: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut hat, true);
        let scale = 1.0 / hat.len() as f64;
        hat.iter().map(|z| z * scale).collect()
    }

    fn multiply_ik(&self, hat: &[Complex64], axis: usize) -> Vec<Complex64> {
        hat.iter()
            .zip(&self.kappa)
            .map(|(z, k)| Complex64::new(-z.im * k[axis], z.re * k[axis]))
            .collect()
    }

    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        if axis >= self.grid.dim() {
            return vec![0.0; f.len()];
        }
        let hat = self.forward(f);
        self.inverse(self.multiply_ik(&hat, axis))
    }

    /// All three partial derivatives from a single forward transform.
    pub fn derivatives(&self, f: &[f64]) -> [Vec<f64>; 3] {
        let hat = self.forward(f);
        let mut out = [vec![0.0; f.len()], vec![0.0; f.len()], vec![0.0; f.len()]];
        for (axis, o) in out.iter_mut().enumerate().take(self.grid.dim()) {
            *o = self.inverse(self.multiply_ik(&hat, axis));
        }
        out
    }

    /// `Σ_k ∂_k f_k`, accumulated in Fourier space.
    pub fn divergence_of(&self, f: [&[f64]; 3]) -> Vec<f64> {
        let len = self.grid.len();
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for (axis, fk) in f.iter().enumerate().take(self.grid.dim()) {
            let hat = self.forward(fk);
            for ((a, z), k) in acc.iter_mut().zip(&hat).zip(&self.kappa) {
                *a += Complex64::new(-z.im * k[axis], z.re * k[axis]);
            }
        }
        self.inverse(acc)
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut hat = self.forward(f);
        for (idx, z) in hat.iter_mut().enumerate() {
            *z *= self.laplacian_symbol(idx);
        }
        self.inverse(hat)
    }

    pub fn dealias_hat(&self, hat: &mut [Complex64]) {
        for (z, &k) in hat.iter_mut().zip(&self.keep) {
            if !k {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// 2/3-rule truncation of a real field.
    pub fn dealias(&self, f: &[f64]) -> Vec<f64> {
        let mut hat = self.forward(f);
        self.dealias_hat(&mut hat);
        self.inverse(hat)
    }

    /// Equal-weight sum times the cell volume; exact for trigonometric
    /// polynomials resolved by the grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete `L²` inner product of two real arrays.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    // ---- field-level operators ----

    /// `p[k] = ∂_k Q` at every point.
    pub fn gradient_tensor(&self, q: &TensorField) -> GradientField {
        let len = self.grid.len();
        let mut out = vec![[Matrix3::zeros(); 3]; len];
        for c in 0..5 {
            let comp = q.component(c);
            let d = self.derivatives(&comp);
            for (axis, dk) in d.iter().enumerate().take(self.grid.dim()) {
                for (o, &v) in out.iter_mut().zip(dk) {
                    set_component(&mut o[axis], c, v);
                }
            }
        }
        GradientField::new_unchecked(self.grid, out)
    }

    /// `(∇v)_ij = ∂_j v_i`.
    pub fn gradient_vector(&self, v: &VectorField) -> MatrixField {
        let len = self.grid.len();
        let mut out = vec![Matrix3::zeros(); len];
        for i in 0..3 {
            let comp = v.component(i);
            let d = self.derivatives(&comp);
            for (j, dj) in d.iter().enumerate().take(self.grid.dim()) {
                for (o, &x) in out.iter_mut().zip(dj) {
                    o[(i, j)] = x;
                }
            }
        }
        MatrixField::new_unchecked(self.grid, out)
    }

    pub fn divergence_vector(&self, v: &VectorField) -> Vec<f64> {
        let c = [v.component(0), v.component(1), v.component(2)];
        self.divergence_of([&c[0], &c[1], &c[2]])
    }

    /// Row-wise divergence `(∇·M)_i = Σ_j ∂_j M_ij`.
    pub fn divergence_matrix(&self, m: &MatrixField) -> VectorField {
        let len = self.grid.len();
        let mut out = vec![Vector3::zeros(); len];
        for i in 0..3 {
            let rows: [Vec<f64>; 3] = [m.entry(i, 0), m.entry(i, 1), m.entry(i, 2)];
            let d = self.divergence_of([&rows[0], &rows[1], &rows[2]]);
            for (o, x) in out.iter_mut().zip(d) {
                o[i] = x;
            }
        }
        VectorField::new_unchecked(self.grid, out)
    }

    /// `Σ_k ∂_k G^k`, entry by entry, for a field of gradient-shaped blocks.
    pub fn divergence_blocks(&self, g: &GradientField) -> MatrixField {
        let len = self.grid.len();
        let mut out = vec![Matrix3::zeros(); len];
        for i in 0..3 {
            for j in 0..3 {
                let parts: [Vec<f64>; 3] = std::array::from_fn(|k| g.values().iter().map(|b| b[k][(i, j)]).collect());
                let d = self.divergence_of([&parts[0], &parts[1], &parts[2]]);
                for (o, x) in out.iter_mut().zip(d) {
                    o[(i, j)] = x;
                }
            }
        }
        MatrixField::new_unchecked(self.grid, out)
    }

    /// Divergence-free part of `v`: `(I - κκᵀ/|κ|²) v̂` on every nonzero mode.
    pub fn leray_project(&self, v: &VectorField) -> VectorField {
        let hats: Vec<Vec<Complex64>> = (0..3).map(|i| self.forward(&v.component(i))).collect();
        let mut proj = hats.clone();
        for idx in 0..self.grid.len() {
            let k = self.kappa[idx];
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                continue;
            }
            let dot = hats[0][idx] * k[0] + hats[1][idx] * k[1] + hats[2][idx] * k[2];
            for i in 0..3 {
                proj[i][idx] = hats[i][idx] - dot * (k[i] / k2);
            }
        }
        let comps: Vec<Vec<f64>> = proj.into_iter().map(|h| self.inverse(h)).collect();
        VectorField::from_components(self.grid, [&comps[0], &comps[1], &comps[2]])
    }

    /// `(Ω, D)`: skew and symmetric parts of `∇v`.
    pub fn vorticity_strain_split(&self, v: &VectorField) -> (MatrixField, MatrixField) {
        let gv = self.gradient_vector(v);
        let omega = gv.map(|m| (m - m.transpose()) * 0.5);
        let d = gv.map(|m| (m + m.transpose()) * 0.5);
        (omega, d)
    }

    pub fn norm_l2(&self, f: &impl Components) -> f64 {
        f.component_arrays()
            .iter()
            .map(|c| self.inner(c, c))
            .sum::<f64>()
            .sqrt()
    }

    /// `sqrt(‖f‖² + ‖∇f‖²)`.
    pub fn norm_h1(&self, f: &impl Components) -> f64 {
        let mut s = 0.0;
        for c in f.component_arrays() {
            s += self.inner(&c, &c);
            for d in self.derivatives(&c).iter().take(self.grid.dim()) {
                s += self.inner(d, d);
            }
        }
        s.sqrt()
    }

    /// `sqrt(‖∇f‖²)`: the gradient seminorm.
    pub fn seminorm_h1(&self, f: &impl Components) -> f64 {
        let mut s = 0.0;
        for c in f.component_arrays() {
            for d in self.derivatives(&c).iter().take(self.grid.dim()) {
                s += self.inner(d, d);
            }
        }
        s.sqrt()
    }
}

/// Entry arrays whose squared sum is the pointwise squared norm.
pub trait Components {
    fn component_arrays(&self) -> Vec<Vec<f64>>;
}

/// Writes component `c` of the `(Q11, Q12, Q13, Q22, Q23)` parametrization.
fn set_component(m: &mut Matrix3<f64>, c: usize, v: f64) {
    match c {
        0 => {
            m[(0, 0)] = v;
            m[(2, 2)] -= v;
        }
        1 => {
            m[(0, 1)] = v;
            m[(1, 0)] = v;
        }
        2 => {
            m[(0, 2)] = v;
            m[(2, 0)] = v;
        }
        3 => {
            m[(1, 1)] = v;
            m[(2, 2)] -= v;
        }
        _ => {
            m[(1, 2)] = v;
            m[(2, 1)] = v;
        }
    }
}
