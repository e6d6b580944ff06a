use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::density::{bulk_tilde, elastic_density_raw, g_b_matrix};
use crate::error::{Error, Result};
use crate::qtensor::{symmetrize_traceless, uniaxial_unchecked, QTensor};

/// Number of random S_delta points used when estimating the coercivity bounds.
pub const COERCIVITY_SAMPLES: usize = 400;
const COERCIVITY_SEED: u64 = 0x5eed_c0e7;

/// Bulk constants `a, b, c` and the quantities derived from them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BulkConstants {
    a: f64,
    b: f64,
    c: f64,
    s_plus: f64,
    lambda: f64,
    f_tilde_min: f64,
}

impl BulkConstants {
    /// Validates positivity, derives `s₊`, `λ` and `min f̃_B`, and cross-checks
    /// the analytic minimum against gradient descent from random starts.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (key, v) in [("a", a), ("b", b), ("c", c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        let s_plus = (b + (b * b + 24.0 * a * c).sqrt()) / (4.0 * c);
        let lambda = (s_plus * b).min(3.0 * a);
        let f_tilde_min = -a * s_plus.powi(2) / 3.0 - 2.0 * b * s_plus.powi(3) / 27.0
            + c * s_plus.powi(4) / 9.0;
        let bc = BulkConstants {
            a,
            b,
            c,
            s_plus,
            lambda,
            f_tilde_min,
        };
        let numeric = bc.numeric_minimum(8, 0xb01c);
        let tol = 1e-8 * f_tilde_min.abs().max(1.0);
        if (numeric - f_tilde_min).abs() > tol {
            return Err(Error::Material(format!(
                "analytic bulk minimum {f_tilde_min} disagrees with numeric {numeric}"
            )));
        }
        Ok(bc)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn s_plus(&self) -> f64 {
        self.s_plus
    }
    /// `min{s₊ b, 3a}`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn f_tilde_min(&self) -> f64 {
        self.f_tilde_min
    }

    pub fn q_plus(&self) -> QTensor {
        QTensor::q_plus(self.s_plus)
    }

    /// Radius of the S_delta neighbourhood used throughout: `0.1 s₊`.
    pub fn delta(&self) -> f64 {
        0.1 * self.s_plus
    }

    /// Minimum of `f̃_B` over S0 found by gradient descent along `g_B`
    /// (the S0 gradient of `-f̃_B`).
    pub fn numeric_minimum(&self, starts: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curvature = self.a + self.b * self.s_plus + self.c * self.s_plus * self.s_plus;
        let step = 0.2 / curvature;
        let mut best = f64::INFINITY;
        for _ in 0..starts {
            let m = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let mut q = symmetrize_traceless(&m);
            q = q * (self.s_plus / q.norm().max(1e-12));
            let mut prev = bulk_tilde(q.matrix(), self);
            for _ in 0..100_000 {
                let g = g_b_matrix(q.matrix(), self);
                q = QTensor::from_matrix_unchecked(q.matrix() + g * step);
                let f = bulk_tilde(q.matrix(), self);
                if (prev - f).abs() <= 1e-16 * f.abs().max(1.0) {
                    prev = f;
                    break;
                }
                prev = f;
            }
            best = best.min(prev);
        }
        best
    }
}

/// Elastic moduli, the rescaling parameter `L`, and derived bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ElasticConstants {
    l1: f64,
    l2: f64,
    l3: f64,
    l4: f64,
    l1_tilde: f64,
    big_l: f64,
    s_plus: f64,
    alpha: f64,
    lambda_up: f64,
}

impl ElasticConstants {
    /// Fails unless the three linear coercivity inequalities hold and the
    /// sampled `α` is positive.
    pub fn new(l1: f64, l2: f64, l3: f64, l4: f64, big_l: f64, bulk: &BulkConstants) -> Result<Self> {
        for (key, v) in [("L1", l1), ("L2", l2), ("L3", l3), ("L4", l4)] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        if !(big_l > 0.0 && big_l.is_finite()) {
            return Err(Error::config("L", format!("must be positive, got {big_l}")));
        }
        let report = check_coercivity(l1, l2, l3, l4, bulk);
        if !report.ok {
            return Err(Error::Coercivity(
                report.failing.unwrap_or_else(|| format!("alpha = {}", report.alpha)),
            ));
        }
        Ok(ElasticConstants {
            l1,
            l2,
            l3,
            l4,
            l1_tilde: l1_tilde(l1, l4, bulk.s_plus()),
            big_l,
            s_plus: bulk.s_plus(),
            alpha: report.alpha,
            lambda_up: report.lambda_up,
        })
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn l3(&self) -> f64 {
        self.l3
    }
    pub fn l4(&self) -> f64 {
        self.l4
    }
    pub fn l1_tilde(&self) -> f64 {
        self.l1_tilde
    }
    /// The rescaling parameter `L` multiplying the bulk term as `f_B / L`.
    pub fn big_l(&self) -> f64 {
        self.big_l
    }
    pub fn s_plus(&self) -> f64 {
        self.s_plus
    }
    /// Sampled lower bound: `f_E(Q, p) ≥ α/2 |p|²` on S_delta.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// Sampled upper bound: `f_E(Q, p) ≤ Λ/2 |p|²` on S_delta.
    pub fn lambda_up(&self) -> f64 {
        self.lambda_up
    }

    pub fn with_big_l(mut self, big_l: f64) -> Result<Self> {
        if !(big_l > 0.0 && big_l.is_finite()) {
            return Err(Error::config("L", format!("must be positive, got {big_l}")));
        }
        self.big_l = big_l;
        Ok(self)
    }
}

pub fn l1_tilde(l1: f64, l4: f64, s_plus: f64) -> f64 {
    if l4 >= 0.0 {
        l1 - 2.0 * l4 / (3.0 * s_plus)
    } else {
        l1 + 4.0 * l4 / (3.0 * s_plus)
    }
}

/// Bulk and elastic constants together.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Material {
    pub bulk: BulkConstants,
    pub elastic: ElasticConstants,
}

impl Material {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a: f64, b: f64, c: f64, l1: f64, l2: f64, l3: f64, l4: f64, big_l: f64) -> Result<Self> {
        let bulk = BulkConstants::new(a, b, c)?;
        let elastic = ElasticConstants::new(l1, l2, l3, l4, big_l, &bulk)?;
        Ok(Material { bulk, elastic })
    }

    /// `a = b = c = 1`, `L1 = 1, L2 = 0.2, L3 = 0.1, L4 = 0.3`, `L = 0.1`.
    pub fn default_material() -> Self {
        Material::new(1.0, 1.0, 1.0, 1.0, 0.2, 0.1, 0.3, 0.1).expect("default material is valid")
    }

    pub fn s_plus(&self) -> f64 {
        self.bulk.s_plus()
    }

    pub fn big_l(&self) -> f64 {
        self.elastic.big_l()
    }

    pub fn with_big_l(&self, big_l: f64) -> Result<Self> {
        Ok(Material {
            bulk: self.bulk,
            elastic: self.elastic.with_big_l(big_l)?,
        })
    }
}

/// Outcome of the coercivity test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub ok: bool,
    pub alpha: f64,
    pub lambda_up: f64,
    pub samples: usize,
    pub failing: Option<String>,
}

/// Checks `L̃₁ + L₃ > 0`, `2L̃₁ - L₃ > 0`, `L̃₁ + 5/3 L₂ + 1/6 L₃ > 0` and
/// estimates `α` (and the matching upper constant) as the extreme eigenvalues
/// of the quadratic form `p ↦ 2 f_E(Q, p)` over sampled `Q ∈ S_delta`, with
/// `p` ranging over gradients of S0-valued fields.
pub fn check_coercivity(l1: f64, l2: f64, l3: f64, l4: f64, bulk: &BulkConstants) -> CoercivityReport {
    let lt = l1_tilde(l1, l4, bulk.s_plus());
    let conditions = [
        ("L1~ + L3 > 0", lt + l3),
        ("2 L1~ - L3 > 0", 2.0 * lt - l3),
        ("L1~ + 5/3 L2 + 1/6 L3 > 0", lt + 5.0 / 3.0 * l2 + l3 / 6.0),
    ];
    let failing = conditions
        .iter()
        .find(|(_, v)| *v <= 0.0)
        .map(|(name, v)| format!("{name} fails ({v})"));

    let mut rng = ChaCha8Rng::seed_from_u64(COERCIVITY_SEED);
    let mut alpha = f64::INFINITY;
    let mut lambda_up = 0.0f64;
    for i in 0..COERCIVITY_SAMPLES {
        // First sample is exactly on the manifold.
        let q = if i == 0 {
            bulk.q_plus()
        } else {
            sample_s_delta(&mut rng, bulk)
        };
        let (lo, hi) = elastic_form_extremes(q.matrix(), [l1, l2, l3, l4], lt, bulk.s_plus());
        alpha = alpha.min(lo);
        lambda_up = lambda_up.max(hi);
    }
    CoercivityReport {
        ok: failing.is_none() && alpha > 0.0,
        alpha,
        lambda_up,
        samples: COERCIVITY_SAMPLES,
        failing,
    }
}

/// Orthonormal basis of S0.
pub(crate) fn s0_basis() -> [Matrix3<f64>; 5] {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let r6 = 1.0 / 6f64.sqrt();
    let mut e = [Matrix3::zeros(); 5];
    e[0][(0, 0)] = r2;
    e[0][(1, 1)] = -r2;
    e[1][(0, 0)] = r6;
    e[1][(1, 1)] = r6;
    e[1][(2, 2)] = -2.0 * r6;
    for (k, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        e[k + 2][(i, j)] = r2;
        e[k + 2][(j, i)] = r2;
    }
    e
}

/// Extreme eigenvalues of the 15x15 matrix of `p ↦ 2 f_E(Q, p)` on
/// `p ∈ S0 ⊗ R³`, built by polarization.
fn elastic_form_extremes(q: &Matrix3<f64>, moduli: [f64; 4], lt: f64, s_plus: f64) -> (f64, f64) {
    let basis = s0_basis();
    let elem = |idx: usize| -> [Matrix3<f64>; 3] {
        let mut p = [Matrix3::zeros(); 3];
        p[idx / 5] = basis[idx % 5];
        p
    };
    let f = |p: &[Matrix3<f64>; 3]| elastic_density_raw(q, p, moduli, lt, s_plus);
    let diag: Vec<f64> = (0..15).map(|i| f(&elem(i))).collect();
    let mut m = DMatrix::<f64>::zeros(15, 15);
    for i in 0..15 {
        m[(i, i)] = 2.0 * diag[i];
        for j in (i + 1)..15 {
            let (pi, pj) = (elem(i), elem(j));
            let sum = [pi[0] + pj[0], pi[1] + pj[1], pi[2] + pj[2]];
            let v = f(&sum) - diag[i] - diag[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let eig = m.symmetric_eigen().eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Random point of S_delta: a random uniaxial tensor plus a perturbation of
/// Frobenius norm at most `delta`.
pub fn sample_s_delta(rng: &mut impl Rng, bulk: &BulkConstants) -> QTensor {
    let u = random_unit(rng);
    let base = uniaxial_unchecked(&u, bulk.s_plus());
    let m = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let dir = symmetrize_traceless(&m);
    let r = bulk.delta() * rng.gen_range(0.0f64..1.0).sqrt();
    base + dir * (r / dir.norm().max(1e-300))
}

pub fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
