//! Pointwise energy densities and their derivatives.
//!
//! A spatial gradient is stored as `p[k] = ∂_k Q`, so `p[k][(i, j)]` is
//! `∂_k Q_ij`. Derivatives with respect to `p` follow the same layout:
//! `G[k][(i, j)] = ∂f_E / ∂(∂_k Q_ij)`.

use nalgebra::Matrix3;

use super::constants::{BulkConstants, ElasticConstants};
use crate::qtensor::{frobenius, QTensor};

pub type Gradient = [Matrix3<f64>; 3];

pub fn zero_gradient() -> Gradient {
    [Matrix3::zeros(); 3]
}

/// `f̃_B` extended to arbitrary 3x3 matrices with `tr Q²` read as `|M|²`.
pub fn bulk_tilde(m: &Matrix3<f64>, bc: &BulkConstants) -> f64 {
    let n2 = m.norm_squared();
    let tr3 = (m * m * m).trace();
    -0.5 * bc.a() * n2 - bc.b() / 3.0 * tr3 + 0.25 * bc.c() * n2 * n2
}

/// `f̃_B(M) - min f̃_B` without clamping; smooth in every entry.
pub fn f_b_general(m: &Matrix3<f64>, bc: &BulkConstants) -> f64 {
    bulk_tilde(m, bc) - bc.f_tilde_min()
}

/// Shifted bulk density, clamped at zero against rounding at the minimum.
pub fn f_b_density(q: &QTensor, bc: &BulkConstants) -> f64 {
    f_b_general(q.matrix(), bc).max(0.0)
}

pub fn g_b_matrix(q: &Matrix3<f64>, bc: &BulkConstants) -> Matrix3<f64> {
    let n2 = q.norm_squared();
    q * (bc.a() - bc.c() * n2) + (q * q - Matrix3::identity() * (n2 / 3.0)) * bc.b()
}

pub fn g_b(q: &QTensor, bc: &BulkConstants) -> QTensor {
    QTensor::from_matrix_unchecked(g_b_matrix(q.matrix(), bc))
}

/// Second derivatives of the bulk density with respect to the nine entries.
#[derive(Clone, Debug, PartialEq)]
pub struct BulkHessian {
    h: [[[[f64; 3]; 3]; 3]; 3],
}

impl BulkHessian {
    /// `∂²f_B / ∂Q_ij ∂Q_kl`.
    pub fn entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.h[i][j][k][l]
    }

    pub fn quadratic_form(&self, xi: &Matrix3<f64>) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        s += self.h[i][j][k][l] * xi[(i, j)] * xi[(k, l)];
                    }
                }
            }
        }
        s
    }

    pub fn apply(&self, xi: &Matrix3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += self.h[i][j][k][l] * xi[(k, l)];
                }
            }
            s
        })
    }
}

pub fn hessian_fb(q: &QTensor, bc: &BulkConstants) -> BulkHessian {
    let m = q.matrix();
    let n2 = m.norm_squared();
    let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    let mut h = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let dd = d(i, k) * d(j, l);
                    h[i][j][k][l] = -bc.a() * dd
                        - bc.b() * (d(k, j) * m[(l, i)] + d(l, i) * m[(j, k)])
                        + bc.c() * (dd * n2 + 2.0 * m[(i, j)] * m[(k, l)]);
                }
            }
        }
    }
    BulkHessian { h }
}

fn grad_norm_squared(p: &Gradient) -> f64 {
    p.iter().map(|m| m.norm_squared()).sum()
}

/// `a_i = Σ_j ∂_j Q_ij`.
fn divergence_vector(p: &Gradient) -> [f64; 3] {
    let mut a = [0.0; 3];
    for (i, ai) in a.iter_mut().enumerate() {
        *ai = (0..3).map(|j| p[j][(i, j)]).sum();
    }
    a
}

/// `Σ ∂_j Q_ik ∂_k Q_ij`.
fn twist_term(p: &Gradient) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                s += p[j][(i, k)] * p[k][(i, j)];
            }
        }
    }
    s
}

/// Gram matrix `M_lk = <∂_l Q, ∂_k Q>`.
fn gram(p: &Gradient) -> Matrix3<f64> {
    Matrix3::from_fn(|l, k| frobenius(&p[l], &p[k]))
}

/// Elastic density with the moduli passed explicitly. `lt` is `L̃₁`.
pub(crate) fn elastic_density_raw(
    q: &Matrix3<f64>,
    p: &Gradient,
    moduli: [f64; 4],
    lt: f64,
    s_plus: f64,
) -> f64 {
    let [_, l2, l3, l4] = moduli;
    let a = divergence_vector(p);
    let p2 = grad_norm_squared(p);
    let mut f = 0.5 * lt * p2
        + 0.5 * l2 * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
        + 0.5 * l3 * twist_term(p);
    if l4 != 0.0 {
        let qq = q * q.transpose();
        let mut l4_term = frobenius(&qq, &gram(p));
        if l4 < 0.0 {
            l4_term -= q.norm_squared() * p2;
        }
        f += 1.5 / s_plus * l4 * l4_term;
    }
    f
}

pub fn f_e_density(q: &QTensor, p: &Gradient, ec: &ElasticConstants) -> f64 {
    elastic_density_raw(
        q.matrix(),
        p,
        [ec.l1(), ec.l2(), ec.l3(), ec.l4()],
        ec.l1_tilde(),
        ec.s_plus(),
    )
}

/// The density with the cubic `L4 Q_lk ∂_l Q : ∂_k Q` term, evaluated as is.
pub fn original_density(q: &QTensor, p: &Gradient, ec: &ElasticConstants) -> f64 {
    let a = divergence_vector(p);
    let m = q.matrix();
    0.5 * ec.l1() * grad_norm_squared(p)
        + 0.5 * ec.l2() * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
        + 0.5 * ec.l3() * twist_term(p)
        + 0.5 * ec.l4() * frobenius(m, &gram(p))
}

/// `∂f_E / ∂p`, one 3x3 block per spatial direction.
pub fn d_p_f_e(q: &QTensor, p: &Gradient, ec: &ElasticConstants) -> Gradient {
    d_p_f_e_matrix(q.matrix(), p, ec)
}

pub(crate) fn d_p_f_e_matrix(q: &Matrix3<f64>, p: &Gradient, ec: &ElasticConstants) -> Gradient {
    let a = divergence_vector(p);
    let mut g = [Matrix3::zeros(); 3];
    for (m, gm) in g.iter_mut().enumerate() {
        let mut coef = ec.l1_tilde();
        if ec.l4() < 0.0 {
            coef -= 3.0 * ec.l4() / ec.s_plus() * q.norm_squared();
        }
        *gm = p[m] * coef;
        for r in 0..3 {
            gm[(r, m)] += ec.l2() * a[r];
        }
        // L3: (∂_b Q)_{a m}
        for r in 0..3 {
            for c in 0..3 {
                gm[(r, c)] += ec.l3() * p[c][(r, m)];
            }
        }
    }
    if ec.l4() != 0.0 {
        let c4 = 1.5 * ec.l4() / ec.s_plus();
        let qq = q * q.transpose();
        let sym = qq + qq.transpose();
        for (m, gm) in g.iter_mut().enumerate() {
            for (k, pk) in p.iter().enumerate() {
                let w = c4 * sym[(m, k)];
                if w != 0.0 {
                    *gm += pk * w;
                }
            }
        }
    }
    g
}

/// `∂f_E / ∂Q` at fixed gradient.
pub fn d_q_f_e(q: &QTensor, p: &Gradient, ec: &ElasticConstants) -> Matrix3<f64> {
    d_q_f_e_matrix(q.matrix(), p, ec)
}

pub(crate) fn d_q_f_e_matrix(q: &Matrix3<f64>, p: &Gradient, ec: &ElasticConstants) -> Matrix3<f64> {
    if ec.l4() == 0.0 {
        return Matrix3::zeros();
    }
    let c4 = 1.5 * ec.l4() / ec.s_plus();
    let m = gram(p);
    let mut f = (m + m.transpose()) * q * c4;
    if ec.l4() < 0.0 {
        f -= q * (2.0 * c4 * grad_norm_squared(p));
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::constants::{sample_s_delta, Material};
    use crate::qtensor::symmetrize_traceless;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_bulk() -> BulkConstants {
        BulkConstants::new(1.0, 1.0, 1.0).unwrap()
    }

    fn random_gradient(rng: &mut impl Rng) -> Gradient {
        let mut p = zero_gradient();
        for pk in p.iter_mut() {
            *pk = symmetrize_traceless(&Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0))).into_matrix();
        }
        p
    }

    fn random_matrix(rng: &mut impl Rng) -> Matrix3<f64> {
        Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn bulk_values() {
        let bc = unit_bulk();
        assert_abs_diff_eq!(f_b_density(&bc.q_plus(), &bc), 0.0, epsilon = 1e-14);
        let f0 = f_b_density(&QTensor::zero(), &bc);
        assert_abs_diff_eq!(f0, -bc.f_tilde_min(), epsilon = 1e-15);
        assert!(f0 > 0.0);
    }

    #[test]
    fn g_b_examples() {
        let bc = unit_bulk();
        assert_eq!(g_b(&QTensor::zero(), &bc), QTensor::zero());
        assert_abs_diff_eq!(g_b(&bc.q_plus(), &bc).norm(), 0.0, epsilon = 1e-14);
        let q = QTensor::diag(1.0, 1.0, -2.0).unwrap();
        let g = g_b(&q, &bc).into_matrix();
        let expected = Matrix3::from_diagonal(&nalgebra::Vector3::new(-6.0, -6.0, 12.0));
        assert_abs_diff_eq!(g, expected, epsilon = 1e-13);
    }

    #[test]
    fn g_b_is_negative_gradient_up_to_trace() {
        let bc = BulkConstants::new(0.7, 1.3, 2.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-5;
        for _ in 0..50 {
            let q = symmetrize_traceless(&random_matrix(&mut rng)).into_matrix();
            let mut grad = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    let mut e = Matrix3::zeros();
                    e[(i, j)] = h;
                    grad[(i, j)] = (f_b_general(&(q + e), &bc) - f_b_general(&(q - e), &bc)) / (2.0 * h);
                }
            }
            let rhs = -grad - Matrix3::identity() * (bc.b() / 3.0 * q.norm_squared());
            assert_abs_diff_eq!(g_b_matrix(&q, &bc), rhs, epsilon = 1e-8);
        }
    }

    #[test]
    fn hessian_spot_values() {
        let bc = unit_bulk();
        let h = hessian_fb(&bc.q_plus(), &bc);
        assert_abs_diff_eq!(h.entry(0, 0, 0, 0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.entry(2, 2, 2, 2), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(h.entry(0, 0, 1, 1), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(h.entry(0, 0, 2, 2), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn hessian_matches_second_differences() {
        let bc = BulkConstants::new(0.4, 1.1, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let step = 1e-4;
        for _ in 0..10 {
            let q = symmetrize_traceless(&random_matrix(&mut rng));
            let hess = hessian_fb(&q, &bc);
            let m = q.matrix();
            for (i, j, k, l) in [(0, 0, 0, 0), (0, 1, 1, 0), (0, 2, 1, 1), (2, 1, 1, 2), (1, 1, 2, 2)] {
                let mut e1 = Matrix3::zeros();
                e1[(i, j)] = step;
                let mut e2 = Matrix3::zeros();
                e2[(k, l)] = step;
                let f = |x: Matrix3<f64>| f_b_general(&x, &bc);
                let fd = (f(m + e1 + e2) - f(m + e1 - e2) - f(m - e1 + e2) + f(m - e1 - e2))
                    / (4.0 * step * step);
                assert!((fd - hess.entry(i, j, k, l)).abs() < 1e-6, "({i}{j},{k}{l})");
            }
        }
    }

    #[test]
    fn one_constant_density() {
        let mat = Material::new(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.1).unwrap();
        let mut p = zero_gradient();
        p[0][(0, 1)] = 1.0 / 2f64.sqrt();
        p[0][(1, 0)] = 1.0 / 2f64.sqrt();
        p[1][(2, 2)] = 1.0;
        // |p|^2 = 2
        let q = QTensor::diag(0.3, -0.1, -0.2).unwrap();
        assert_abs_diff_eq!(f_e_density(&q, &p, &mat.elastic), 1.0, epsilon = 1e-14);
        assert_eq!(f_e_density(&q, &zero_gradient(), &mat.elastic), 0.0);
    }

    fn fd_checks(mat: &Material, seed: u64) {
        let ec = &mat.elastic;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-6;
        for _ in 0..20 {
            let q = sample_s_delta(&mut rng, &mat.bulk);
            let p = random_gradient(&mut rng);
            let g = d_p_f_e(&q, &p, ec);
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut pp = p;
                        let mut pm = p;
                        pp[k][(i, j)] += h;
                        pm[k][(i, j)] -= h;
                        let fd = (f_e_density(&q, &pp, ec) - f_e_density(&q, &pm, ec)) / (2.0 * h);
                        assert!((fd - g[k][(i, j)]).abs() < 1e-7, "dp {k}{i}{j}: {fd} vs {}", g[k][(i, j)]);
                    }
                }
            }
            let f = d_q_f_e(&q, &p, ec);
            for i in 0..3 {
                for j in 0..3 {
                    let mut e = Matrix3::zeros();
                    e[(i, j)] = h;
                    let qp = q.matrix() + e;
                    let qm = q.matrix() - e;
                    let fd = (elastic_density_raw(&qp, &p, [ec.l1(), ec.l2(), ec.l3(), ec.l4()], ec.l1_tilde(), ec.s_plus())
                        - elastic_density_raw(&qm, &p, [ec.l1(), ec.l2(), ec.l3(), ec.l4()], ec.l1_tilde(), ec.s_plus()))
                        / (2.0 * h);
                    assert!((fd - f[(i, j)]).abs() < 1e-7, "dq {i}{j}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_checks(&Material::default_material(), 1);
        fd_checks(&Material::new(1.0, 1.0, 1.0, 1.0, 0.5, -0.2, -0.1, 0.1).unwrap(), 2);
    }

    #[test]
    fn bounds_hold_on_samples() {
        let mat = Material::default_material();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let q = sample_s_delta(&mut rng, &mat.bulk);
            let p = random_gradient(&mut rng);
            let f = f_e_density(&q, &p, &mat.elastic);
            let p2: f64 = p.iter().map(|m| m.norm_squared()).sum();
            assert!(f >= 0.5 * mat.elastic.alpha() * p2 * (1.0 - 1e-9));
        }
    }
}
