//! Field-level energies, molecular fields and the distortion stress.

use nalgebra::Matrix3;
use serde::Serialize;

use super::constants::{ElasticConstants, Material};
use super::density::{d_p_f_e_matrix, d_q_f_e_matrix, f_b_density, f_e_density, g_b};
use crate::grid::{GradientField, GridOps, MatrixField, TensorField, VectorField};
use crate::qtensor::symmetrize_traceless;

/// The gradient of a tensor field together with `∂f_E/∂p` and `∂f_E/∂Q`
/// evaluated pointwise; shared by the molecular fields and the stress.
#[derive(Clone, Debug)]
pub struct ElasticTerms {
    pub grad: GradientField,
    pub d_p: GradientField,
    pub d_q: Vec<Matrix3<f64>>,
}

impl ElasticTerms {
    pub fn new(ops: &GridOps, q: &TensorField, ec: &ElasticConstants) -> Self {
        let grad = ops.gradient_tensor(q);
        let mut d_p = Vec::with_capacity(q.len());
        let mut d_q = Vec::with_capacity(q.len());
        for (qi, pi) in q.values().iter().zip(grad.values()) {
            d_p.push(d_p_f_e_matrix(qi.matrix(), pi, ec));
            d_q.push(d_q_f_e_matrix(qi.matrix(), pi, ec));
        }
        ElasticTerms {
            d_p: GradientField::new_unchecked(*q.grid(), d_p),
            grad,
            d_q,
        }
    }
}

/// Symmetrized, trace-free `Σ_k ∂_k(∂f_E/∂p^k) - ∂f_E/∂Q`.
pub fn molecular_field_biaxial(ops: &GridOps, q: &TensorField, ec: &ElasticConstants) -> TensorField {
    molecular_field_from_terms(ops, &ElasticTerms::new(ops, q, ec))
}

pub fn molecular_field_from_terms(ops: &GridOps, terms: &ElasticTerms) -> TensorField {
    let div = ops.divergence_blocks(&terms.d_p);
    let values = div
        .values()
        .iter()
        .zip(&terms.d_q)
        .map(|(d, f)| symmetrize_traceless(&(d - f)))
        .collect();
    TensorField::new(*ops.grid(), values).expect("same grid")
}

/// `𝓗 + g_B / L`.
pub fn full_molecular_field(ops: &GridOps, q: &TensorField, mat: &Material) -> TensorField {
    let h = molecular_field_biaxial(ops, q, &mat.elastic);
    add_bulk_force(&h, q, mat)
}

pub(crate) fn add_bulk_force(h: &TensorField, q: &TensorField, mat: &Material) -> TensorField {
    let inv_l = 1.0 / mat.big_l();
    h.zip_map(q, |hi, qi| *hi + g_b(qi, &mat.bulk) * inv_l)
        .expect("same grid")
}

/// `σ_ij = -<∂f_E/∂p^j, ∂_i Q>`.
pub fn distortion_stress(ops: &GridOps, q: &TensorField, ec: &ElasticConstants) -> MatrixField {
    stress_from_terms(&ElasticTerms::new(ops, q, ec))
}

pub fn stress_from_terms(terms: &ElasticTerms) -> MatrixField {
    let values = terms
        .grad
        .values()
        .iter()
        .zip(terms.d_p.values())
        .map(|(p, g)| Matrix3::from_fn(|i, j| -crate::qtensor::frobenius(&g[j], &p[i])))
        .collect();
    MatrixField::new(*terms.grad.grid(), values).expect("same grid")
}

/// Integrated energy split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub bulk_over_l: f64,
    pub kinetic: f64,
    pub total: f64,
}

pub fn elastic_energy(ops: &GridOps, q: &TensorField, ec: &ElasticConstants) -> f64 {
    let grad = ops.gradient_tensor(q);
    let dens: Vec<f64> = q
        .values()
        .iter()
        .zip(grad.values())
        .map(|(qi, pi)| f_e_density(qi, pi, ec))
        .collect();
    ops.integrate(&dens)
}

pub fn bulk_energy(ops: &GridOps, q: &TensorField, mat: &Material) -> f64 {
    let dens: Vec<f64> = q.values().iter().map(|qi| f_b_density(qi, &mat.bulk)).collect();
    ops.integrate(&dens)
}

pub fn kinetic_energy(ops: &GridOps, v: &VectorField) -> f64 {
    let dens: Vec<f64> = v.values().iter().map(|x| 0.5 * x.norm_squared()).collect();
    ops.integrate(&dens)
}

/// `∫ f_E`, `∫ f_B / L`, `∫ |v|²/2`. Pass `bulk = false` for the uniaxial
/// system, whose energy has no bulk part.
pub fn energy_breakdown(
    ops: &GridOps,
    q: &TensorField,
    v: &VectorField,
    mat: &Material,
    bulk: bool,
) -> EnergyBreakdown {
    let elastic = elastic_energy(ops, q, &mat.elastic);
    let bulk_over_l = if bulk {
        bulk_energy(ops, q, mat) / mat.big_l()
    } else {
        0.0
    };
    let kinetic = kinetic_energy(ops, v);
    EnergyBreakdown {
        elastic,
        bulk_over_l,
        kinetic,
        total: elastic + bulk_over_l + kinetic,
    }
}
