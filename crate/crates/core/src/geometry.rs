//! The uniaxial manifold `S_* = { s₊(u⊗u - I/3) : |u| = 1 }`: nearest-point
//! projection, the diagonalizing rotation, block-form checks and the
//! uniaxial molecular field.

use nalgebra::{Matrix3, Vector3};

use crate::eigen::normalize_sign;
use crate::energy::{g_b_matrix, BulkConstants, ElasticTerms, Material};
use crate::error::{Error, Result};
use crate::grid::{GridOps, MatrixField, ScalarField, TensorField};
use crate::qtensor::{frobenius, symmetrize_traceless, uniaxial_unchecked, QTensor, Rotation};

/// Largest distance to `S_*` accepted by the uniaxial molecular field.
pub const MANIFOLD_TOL: f64 = 1e-8;

/// Relative step for the central-difference derivative of `π`.
pub const DPI_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionResult {
    pub pi_q: QTensor,
    pub director: Vector3<f64>,
    pub distance: f64,
    /// Gap between the two largest eigenvalues of `Q`.
    pub gap: f64,
    pub rotation: Rotation,
    pub in_s_delta: bool,
}

/// Nearest point of `S_*`: `s₊(u⊗u - I/3)` with `u` the top eigenvector.
///
/// When the top eigenvalue is (nearly) double the result still uses the
/// eigensolver's deterministic tie-break, but `in_s_delta` is false.
pub fn project_pi(q: &QTensor, bc: &BulkConstants) -> ProjectionResult {
    let eig = q.eigen();
    let director = normalize_sign(eig.rotation.column(2));
    let pi_q = uniaxial_unchecked(&director, bc.s_plus());
    let distance = (*q - pi_q).norm();
    let gap = eig.eigenvalues[2] - eig.eigenvalues[1];
    ProjectionResult {
        pi_q,
        director,
        distance,
        gap,
        rotation: gauge_rotation(&director),
        in_s_delta: distance <= bc.delta() && gap >= 0.5 * bc.s_plus(),
    }
}

/// Rotation with the director as third column. The first column is the
/// reference axis `e1` (or `e2` when `|u·e1| > 0.9`) projected onto `u⊥`,
/// and the second completes a right-handed frame.
fn gauge_rotation(u: &Vector3<f64>) -> Rotation {
    let reference = if u[0].abs() > 0.9 { Vector3::y() } else { Vector3::x() };
    let c1 = (reference - u * u.dot(&reference)).normalize();
    let c2 = u.cross(&c1);
    Rotation::from_matrix_unchecked(Matrix3::from_columns(&[c1, c2, *u]))
}

/// `R_Q` with `R_Qᵀ π(Q) R_Q = Q⁺`; fails outside `S_δ`.
pub fn rotation_rq(q: &QTensor, bc: &BulkConstants) -> Result<Rotation> {
    let p = project_pi(q, bc);
    if !p.in_s_delta {
        return Err(Error::OutsideSDelta {
            distance: p.distance,
            gap: p.gap,
        });
    }
    Ok(p.rotation)
}

/// `Q̃ = R_Qᵀ Q R_Q`.
pub fn block_form(q: &QTensor, bc: &BulkConstants) -> Result<Matrix3<f64>> {
    Ok(rotation_rq(q, bc)?.conjugate(q.matrix()))
}

/// `max(|g_B(Q̃)_13|, |g_B(Q̃)_23|)`.
pub fn gb_block_residual(q: &QTensor, bc: &BulkConstants) -> Result<f64> {
    let g = g_b_matrix(&block_form(q, bc)?, bc);
    Ok(g[(0, 2)].abs().max(g[(1, 2)].abs()))
}

/// Pairing of `dᵏ/dtᵏ g_B(Q̃(t))` with `Ṙᵀ π R - Rᵀ π Ṙ` along a path
/// `Q(t)` in `S_δ`, for `k = 0` and `k = 1`. Derivatives are fourth-order
/// central differences with step `h`.
pub fn rotation_identity_residual(
    path: impl Fn(f64) -> QTensor,
    t: f64,
    h: f64,
    bc: &BulkConstants,
) -> Result<[f64; 2]> {
    let frame = |s: f64| -> Result<(Matrix3<f64>, Matrix3<f64>, Matrix3<f64>)> {
        let q = path(s);
        let p = project_pi(&q, bc);
        let r = rotation_rq(&q, bc)?;
        let g = g_b_matrix(&r.conjugate(q.matrix()), bc);
        Ok((*r.matrix(), p.pi_q.into_matrix(), g))
    };
    let (r0, pi0, g0) = frame(t)?;
    let samples = [t - 2.0 * h, t - h, t + h, t + 2.0 * h]
        .iter()
        .map(|&s| frame(s))
        .collect::<Result<Vec<_>>>()?;
    let d4 = |m: &dyn Fn(usize) -> Matrix3<f64>| (m(0) - m(1) * 8.0 + m(2) * 8.0 - m(3)) / (12.0 * h);
    let r_dot = d4(&|i| samples[i].0);
    let g_dot = d4(&|i| samples[i].2);
    let w = r_dot.transpose() * pi0 * r0 - r0.transpose() * pi0 * r_dot;
    Ok([frobenius(&g0, &w).abs(), frobenius(&g_dot, &w).abs()])
}

/// Projects every value onto `S_*`; returns the field and the largest
/// distance removed.
pub fn renormalize(q: &TensorField, bc: &BulkConstants) -> (TensorField, f64) {
    let mut max_d = 0.0f64;
    let mut values = Vec::with_capacity(q.len());
    for qi in q.values() {
        let p = project_pi(qi, bc);
        max_d = max_d.max(p.distance);
        values.push(p.pi_q);
    }
    (TensorField::new(*q.grid(), values).expect("same grid"), max_d)
}

/// Largest pointwise distance to `S_*`.
pub fn max_manifold_distance(q: &TensorField, bc: &BulkConstants) -> f64 {
    q.values()
        .iter()
        .map(|qi| project_pi(qi, bc).distance)
        .fold(0.0, f64::max)
}

/// The uniaxial field `s₊(u(x)⊗u(x) - I/3)` for a director field `u`.
pub fn uniaxial_field(
    grid: crate::grid::Grid,
    s_plus: f64,
    director: impl Fn([f64; 3]) -> Vector3<f64>,
) -> TensorField {
    TensorField::from_fn(grid, |x| {
        let u = director(x);
        uniaxial_unchecked(&u.normalize(), s_plus)
    })
}

pub(crate) fn check_on_manifold(q: &TensorField, bc: &BulkConstants) -> Result<()> {
    for (index, qi) in q.values().iter().enumerate() {
        let distance = project_pi(qi, bc).distance;
        if distance > MANIFOLD_TOL || !distance.is_finite() {
            return Err(Error::OffManifold { index, distance });
        }
    }
    Ok(())
}

/// Molecular field of the uniaxial system, with `P = Q + (s₊/3) I`,
/// `G^k = ∂f_E/∂p^k` and `F = ∂f_E/∂Q`:
///
/// ```text
/// H = ∂_k(G^k P + P G^kᵀ) - (2/s₊) ∂_k(P <P, G^k>)
///     - (G^k ∂_kQ + ∂_kQ G^kᵀ)
///     + (2/s₊) [<G^k, ∂_kQ> P + <G^k, P> ∂_kQ]
///     - F P - P Fᵀ + (2/s₊) <F, P> P
/// ```
///
/// The result is projected onto S0 to remove the trace left by the discrete
/// product rule.
pub fn molecular_field_uniaxial(ops: &GridOps, q: &TensorField, mat: &Material) -> Result<TensorField> {
    check_on_manifold(q, &mat.bulk)?;
    let terms = ElasticTerms::new(ops, q, &mat.elastic);
    Ok(uniaxial_field_from_terms(ops, q, &terms, mat.s_plus()))
}

pub(crate) fn uniaxial_field_from_terms(
    ops: &GridOps,
    q: &TensorField,
    terms: &ElasticTerms,
    s: f64,
) -> TensorField {
    let grid = *q.grid();
    let shift = Matrix3::identity() * (s / 3.0);
    let p_of = |qi: &QTensor| qi.matrix() + shift;
    // The derivatives are taken within S0: their skew and trace parts would
    // add a tangential term that is not part of the energy gradient.
    let sym = |m: &Matrix3<f64>| *symmetrize_traceless(m).matrix();
    let d_p: Vec<[Matrix3<f64>; 3]> = terms.d_p.values().iter().map(|g| g.map(|gk| sym(&gk))).collect();
    // Fluxes whose divergence is taken: flux[k] = G^k P + P G^kᵀ - (2/s) P <P, G^k>.
    let flux: Vec<[Matrix3<f64>; 3]> = q
        .values()
        .iter()
        .zip(&d_p)
        .map(|(qi, g)| {
            let p = p_of(qi);
            std::array::from_fn(|k| g[k] * p + p * g[k].transpose() - p * (2.0 / s * frobenius(&p, &g[k])))
        })
        .collect();
    let div = ops.divergence_blocks(&crate::grid::GradientField::new_unchecked(grid, flux));
    let values = q
        .values()
        .iter()
        .enumerate()
        .map(|(i, qi)| {
            let p = p_of(qi);
            let g = &d_p[i];
            let dq = &terms.grad.values()[i];
            let f = &sym(&terms.d_q[i]);
            let mut h = div.values()[i];
            for k in 0..3 {
                h -= g[k] * dq[k] + dq[k] * g[k].transpose();
                h += (p * frobenius(&g[k], &dq[k]) + dq[k] * frobenius(&g[k], &p)) * (2.0 / s);
            }
            h -= f * p + p * f.transpose();
            h += p * (2.0 / s * frobenius(f, &p));
            symmetrize_traceless(&h)
        })
        .collect();
    TensorField::new(grid, values).expect("same grid")
}

/// Largest relative normal component `|H - dπ(Q)[H]| / max|H|` over the
/// grid, with `dπ` by central differences of step `1e-5 s₊ / |H|`.
pub fn tangency_residual(q: &TensorField, h: &TensorField, bc: &BulkConstants) -> f64 {
    let scale = h.max_norm();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for (qi, hi) in q.values().iter().zip(h.values()) {
        let n = hi.norm();
        if n == 0.0 {
            continue;
        }
        let eps = DPI_STEP * bc.s_plus() / n;
        let plus = project_pi(&(*qi + *hi * eps), bc).pi_q;
        let minus = project_pi(&(*qi - *hi * eps), bc).pi_q;
        let dpi = (plus - minus) * (0.5 / eps);
        worst = worst.max((*hi - dpi).norm() / scale);
    }
    worst
}

/// Pointwise `|LHS - RHS|` of
/// `Q_lk ∂_lQ:∂_kQ = (3/s₊)(Q_ln ∂_lQ_ij)(Q_kn ∂_kQ_ij) - (2s₊/3)|∇Q|²`.
pub fn third_identity_residual(ops: &GridOps, q: &TensorField, bc: &BulkConstants) -> ScalarField {
    let (lhs, rhs) = third_identity_sides(ops, q, bc);
    let values = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();
    ScalarField::new(*q.grid(), values).expect("same grid")
}

/// Both sides of the identity, pointwise.
pub fn third_identity_sides(ops: &GridOps, q: &TensorField, bc: &BulkConstants) -> (Vec<f64>, Vec<f64>) {
    let s = bc.s_plus();
    let grad = ops.gradient_tensor(q);
    let mut lhs = Vec::with_capacity(q.len());
    let mut rhs = Vec::with_capacity(q.len());
    for (qi, p) in q.values().iter().zip(grad.values()) {
        let m = qi.matrix();
        let mut l = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                l += m[(a, b)] * frobenius(&p[a], &p[b]);
            }
        }
        let mut quartic = 0.0;
        for n in 0..3 {
            // Σ_l Q_ln ∂_l Q
            let t = p[0] * m[(0, n)] + p[1] * m[(1, n)] + p[2] * m[(2, n)];
            quartic += t.norm_squared();
        }
        let p2: f64 = p.iter().map(|x| x.norm_squared()).sum();
        lhs.push(l);
        rhs.push(3.0 / s * quartic - 2.0 * s / 3.0 * p2);
    }
    (lhs, rhs)
}

/// Field of rotations `R_Q` as matrices (for diagnostics).
pub fn rotation_field(q: &TensorField, bc: &BulkConstants) -> Result<MatrixField> {
    let values = q
        .values()
        .iter()
        .map(|qi| rotation_rq(qi, bc).map(|r| *r.matrix()))
        .collect::<Result<Vec<_>>>()?;
    MatrixField::new(*q.grid(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{elastic_energy, random_unit, sample_s_delta};
    use crate::grid::{Grid, Scheme};
    use crate::qtensor::lie_bracket;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn bc() -> BulkConstants {
        BulkConstants::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn projection_fixed_point_and_example() {
        let bc = bc();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q = uniaxial_unchecked(&random_unit(&mut rng), 1.5);
            let p = project_pi(&q, &bc);
            assert_abs_diff_eq!(p.pi_q.matrix(), q.matrix(), epsilon = 1e-12);
            assert!(p.distance < 1e-12);
            let again = project_pi(&p.pi_q, &bc);
            assert_abs_diff_eq!(again.pi_q.matrix(), p.pi_q.matrix(), epsilon = 1e-15);
        }
        let q = QTensor::diag(-0.4, -0.5, 0.9).unwrap();
        let p = project_pi(&q, &bc);
        assert_abs_diff_eq!(p.pi_q.matrix(), QTensor::q_plus(1.5).matrix(), epsilon = 1e-14);
        assert_abs_diff_eq!(p.director, Vector3::z(), epsilon = 1e-14);
        // brute force over a director grid
        let mut best = f64::INFINITY;
        let m = 100;
        for i in 0..m {
            for j in 0..m {
                let th = PI * (i as f64 + 0.5) / m as f64;
                let ph = 2.0 * PI * j as f64 / m as f64;
                let u = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
                best = best.min((q - uniaxial_unchecked(&u, 1.5)).norm());
            }
        }
        assert!(p.distance <= best + 1e-12);
    }

    #[test]
    fn projection_commutes_and_diagonalizes() {
        let bc = bc();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let q = sample_s_delta(&mut rng, &bc);
            let p = project_pi(&q, &bc);
            assert!(p.in_s_delta);
            assert!(lie_bracket(q.matrix(), p.pi_q.matrix()).abs().max() < 1e-10);
            let r = p.rotation;
            assert_abs_diff_eq!(r.conjugate(p.pi_q.matrix()), *QTensor::q_plus(1.5).matrix(), epsilon = 1e-10);
            let qt = r.conjugate(q.matrix());
            for (i, j) in [(0, 2), (1, 2), (2, 0), (2, 1)] {
                assert!(qt[(i, j)].abs() < 1e-10);
            }
            assert!(Rotation::try_from_matrix(*r.matrix()).is_ok());
            assert!(gb_block_residual(&q, &bc).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn rotation_examples() {
        let bc = bc();
        let r = rotation_rq(&QTensor::q_plus(1.5), &bc).unwrap();
        assert_abs_diff_eq!(*r.matrix(), Matrix3::identity(), epsilon = 1e-15);
        let q = uniaxial_unchecked(&Vector3::x(), 1.5);
        let r = rotation_rq(&q, &bc).unwrap();
        let expected = Matrix3::from_columns(&[Vector3::y(), Vector3::z(), Vector3::x()]);
        assert_abs_diff_eq!(*r.matrix(), expected, epsilon = 1e-15);
        assert!(rotation_rq(&QTensor::zero(), &bc).is_err());
    }

    #[test]
    fn rotation_is_locally_lipschitz() {
        let bc = bc();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let base = sample_s_delta(&mut rng, &bc);
            let dir = symmetrize_traceless(&Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
            let dir = dir * (1.0 / dir.norm());
            let r0 = rotation_rq(&base, &bc).unwrap();
            let u = project_pi(&base, &bc).director;
            if (u[0].abs() - 0.9).abs() < 0.05 {
                continue; // gauge switch
            }
            for k in 1..6 {
                let h = 10f64.powi(-k - 2);
                let r1 = rotation_rq(&(base + dir * h), &bc).unwrap();
                let ratio = (r1.matrix() - r0.matrix()).norm() / h;
                assert!(ratio < 50.0, "ratio {ratio}");
            }
        }
    }

    #[test]
    fn rotation_identity_vanishes() {
        let bc = bc();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = sample_s_delta(&mut rng, &bc);
            let d1 = symmetrize_traceless(&Matrix3::from_fn(|_, _| rng.gen_range(-0.05..0.05)));
            let d2 = symmetrize_traceless(&Matrix3::from_fn(|_, _| rng.gen_range(-0.05..0.05)));
            let path = move |t: f64| a + d1 * t.sin() + d2 * (t * t);
            let res = rotation_identity_residual(path, 0.1, 1e-3, &bc).unwrap();
            assert!(res[0] < 1e-8 && res[1] < 1e-8, "{res:?}");
        }
    }

    fn winding(n: usize, s: f64) -> (GridOps, TensorField) {
        let ops = GridOps::new(Grid::square(n, Scheme::Spectral).unwrap());
        let q = uniaxial_field(*ops.grid(), s, |x| Vector3::new(x[0].cos(), x[0].sin(), 0.0));
        (ops, q)
    }

    #[test]
    fn third_identity_hand_value() {
        let bc = bc();
        let (ops, q) = winding(32, 1.5);
        let (lhs, rhs) = third_identity_sides(&ops, &q, &bc);
        assert_abs_diff_eq!(lhs[0], 4.5, epsilon = 1e-10);
        assert_abs_diff_eq!(rhs[0], 4.5, epsilon = 1e-10);
        let r = third_identity_residual(&ops, &q, &bc);
        assert!(r.max() < 1e-10);
        let c = TensorField::constant(*ops.grid(), QTensor::q_plus(1.5));
        assert_eq!(third_identity_residual(&ops, &c, &bc).max(), 0.0);
    }

    #[test]
    fn uniaxial_field_rejects_off_manifold() {
        let mat = Material::default_material();
        let (ops, q) = winding(16, 1.5);
        let bad = q.map(|x| *x * 1.01);
        assert!(matches!(
            molecular_field_uniaxial(&ops, &bad, &mat),
            Err(Error::OffManifold { .. })
        ));
        let c = TensorField::constant(*ops.grid(), mat.bulk.q_plus());
        assert!(molecular_field_uniaxial(&ops, &c, &mat).unwrap().max_norm() < 1e-14);
    }

    #[test]
    fn uniaxial_field_is_tangent() {
        let mat = Material::default_material();
        let ops = GridOps::new(Grid::square(32, Scheme::Spectral).unwrap());
        let q = uniaxial_field(*ops.grid(), 1.5, |x| {
            let th = 0.7 * x[0].sin() + 0.4 * (x[1] - x[0]).cos();
            let ph = 0.5 * x[1].sin();
            Vector3::new(th.cos() * ph.cos(), th.sin() * ph.cos(), ph.sin())
        });
        let h = molecular_field_uniaxial(&ops, &q, &mat).unwrap();
        assert!(h.max_norm() > 1e-3);
        let r = tangency_residual(&q, &h, &mat.bulk);
        assert!(r < 1e-6, "normal component {r:e}");
    }

    fn angle_pairing(mat: &Material, base: f64) -> (f64, f64, f64, f64) {
        let ops = GridOps::new(Grid::square(32, Scheme::Spectral).unwrap());
        let g = *ops.grid();
        let w = |x: [f64; 3]| x[1].sin() + 0.5 * x[0].cos();
        let angle = move |x: [f64; 3], eps: f64| x[0] + base * (x[1] + 0.2).sin() + eps * w(x);
        let field = |eps: f64| {
            uniaxial_field(g, mat.s_plus(), |x| Vector3::new(angle(x, eps).cos(), angle(x, eps).sin(), 0.0))
        };
        let q = field(0.0);
        let h = molecular_field_uniaxial(&ops, &q, mat).unwrap();
        // ∂Q/∂ε at ε = 0 for the director angle perturbation
        let dq = TensorField::from_fn(g, |x| {
            let th = angle(x, 0.0);
            let u = Vector3::new(th.cos(), th.sin(), 0.0);
            let du = Vector3::new(-th.sin(), th.cos(), 0.0) * w(x);
            QTensor::from_matrix_unchecked((u * du.transpose() + du * u.transpose()) * mat.s_plus())
        });
        let pairing: Vec<f64> = h.values().iter().zip(dq.values()).map(|(a, b)| a.frobenius(b)).collect();
        let lhs = ops.integrate(&pairing);
        let e = 1e-5;
        let rhs = -(elastic_energy(&ops, &field(e), &mat.elastic) - elastic_energy(&ops, &field(-e), &mat.elastic))
            / (2.0 * e);
        let normal = tangency_residual(&q, &h, &mat.bulk) * h.max_norm();
        (lhs, rhs, normal, h.max_norm())
    }

    #[test]
    fn one_constant_uniaxial_field_matches_energy_gradient() {
        // s₊ = 1, where the uniaxial field is the tangential part of the
        // biaxial one and hence the energy gradient on the manifold.
        let mat = Material::new(1.0 / 3.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(mat.s_plus(), 1.0, epsilon = 1e-15);
        // The plain winding u = (cos x, sin x, 0) is a critical point: H = 0.
        let (lhs, rhs, normal, hmax) = angle_pairing(&mat, 0.0);
        assert!(hmax < 1e-10 && normal < 1e-10);
        assert!(lhs.abs() < 1e-9 && rhs.abs() < 1e-8);
        let (lhs, rhs, normal, hmax) = angle_pairing(&mat, 0.3);
        assert!(normal <= 1e-6 * hmax);
        assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs(), "{lhs} vs {rhs}");
    }
}
