use nalgebra::{Matrix3, Vector3};

use super::{SimState, System};
use crate::energy::{add_bulk_force, molecular_field_from_terms, stress_from_terms, ElasticTerms};
use crate::error::{Error, Result};
use crate::geometry::{check_on_manifold, uniaxial_field_from_terms};
use crate::grid::{GridOps, MatrixField, TensorField, VectorField};
use crate::qtensor::{lie_bracket, symmetrize_traceless};

/// Time derivatives of a state plus the two dissipation integrals.
#[derive(Clone, Debug)]
pub struct Rates {
    pub dq: TensorField,
    /// Velocity rate before the Leray projection; includes `Δv`.
    pub dv: VectorField,
    /// Biaxial: `∫|𝓗 + g_B/L|²`. Uniaxial: `∫<H, 𝓗>`.
    pub dissipation_h: f64,
    pub dissipation_gradv: f64,
}

/// `dQ/dt = -v·∇Q - [Q, Ω] + 𝓗 + g_B/L`,
/// `dv/dt = -v·∇v + Δv + ∇·([Q, 𝓗] + σ)`.
///
/// `[Q, g_B] = 0`, so the bracket in the momentum equation uses `𝓗` alone.
/// Advection is evaluated in skew-symmetric form `(v·∇v + ∇·(v⊗v))/2`.
pub fn rhs_biaxial(ops: &GridOps, state: &SimState, freeze_velocity: bool) -> Result<Rates> {
    if state.system != System::Biaxial {
        return Err(Error::Unsupported("rhs_biaxial called on a uniaxial state".into()));
    }
    let q = &state.q;
    let terms = ElasticTerms::new(ops, q, &state.material.elastic);
    let h_el = molecular_field_from_terms(ops, &terms);
    let h_full = add_bulk_force(&h_el, q, &state.material);
    let sq: Vec<f64> = h_full.values().iter().map(|h| h.norm_squared()).collect();
    let dissipation_h = ops.integrate(&sq);
    assemble(ops, state, &terms, &h_full, &h_el, dissipation_h, freeze_velocity)
}

/// Same structure with the constrained molecular field `H` in both the Q
/// equation and the bracket. Rejects input off the manifold.
pub fn rhs_uniaxial(ops: &GridOps, state: &SimState, freeze_velocity: bool) -> Result<Rates> {
    if state.system != System::Uniaxial {
        return Err(Error::Unsupported("rhs_uniaxial called on a biaxial state".into()));
    }
    check_on_manifold(&state.q, &state.material.bulk)?;
    let q = &state.q;
    let terms = ElasticTerms::new(ops, q, &state.material.elastic);
    let h_el = molecular_field_from_terms(ops, &terms);
    let h = uniaxial_field_from_terms(ops, q, &terms, state.material.s_plus());
    let pairing: Vec<f64> = h.values().iter().zip(h_el.values()).map(|(a, b)| a.frobenius(b)).collect();
    let dissipation_h = ops.integrate(&pairing);
    assemble(ops, state, &terms, &h, &h, dissipation_h, freeze_velocity)
}

pub fn rhs(ops: &GridOps, state: &SimState, freeze_velocity: bool) -> Result<Rates> {
    match state.system {
        System::Biaxial => rhs_biaxial(ops, state, freeze_velocity),
        System::Uniaxial => rhs_uniaxial(ops, state, freeze_velocity),
    }
}

/// `drive` enters the Q equation, `bracket_field` the antisymmetric stress.
fn assemble(
    ops: &GridOps,
    state: &SimState,
    terms: &ElasticTerms,
    drive: &TensorField,
    bracket_field: &TensorField,
    dissipation_h: f64,
    freeze_velocity: bool,
) -> Result<Rates> {
    let grid = *ops.grid();
    let q = &state.q;
    let v = &state.v;
    let gradv = ops.gradient_vector(v);
    let dq_values = q
        .values()
        .iter()
        .enumerate()
        .map(|(i, qi)| {
            let p = &terms.grad.values()[i];
            let vi = v.values()[i];
            let gv = gradv.values()[i];
            let omega = (gv - gv.transpose()) * 0.5;
            let adv = p[0] * vi[0] + p[1] * vi[1] + p[2] * vi[2];
            symmetrize_traceless(&(drive.values()[i].matrix() - adv - lie_bracket(qi.matrix(), &omega)))
        })
        .collect();
    let dq = TensorField::new(grid, dq_values)?;

    let sq: Vec<f64> = gradv.values().iter().map(|m| m.norm_squared()).collect();
    let dissipation_gradv = ops.integrate(&sq);

    let dv = if freeze_velocity {
        VectorField::zeros(grid)
    } else {
        let sigma = stress_from_terms(terms);
        let total: Vec<Matrix3<f64>> = q
            .values()
            .iter()
            .zip(bracket_field.values())
            .zip(sigma.values())
            .map(|((qi, hi), si)| lie_bracket(qi.matrix(), hi.matrix()) + si)
            .collect();
        let div_stress = ops.divergence_matrix(&MatrixField::new(grid, total)?);
        let outer = MatrixField::new(grid, v.values().iter().map(|x| x * x.transpose()).collect())?;
        let div_outer = ops.divergence_matrix(&outer);
        let lap: Vec<Vec<f64>> = (0..3).map(|i| ops.laplacian(&v.component(i))).collect();
        let values = (0..grid.len())
            .map(|i| {
                let vi = v.values()[i];
                let conv = gradv.values()[i] * vi;
                let adv = (conv + div_outer.values()[i]) * 0.5;
                let lap_i = Vector3::new(lap[0][i], lap[1][i], lap[2][i]);
                lap_i - adv + div_stress.values()[i]
            })
            .collect();
        VectorField::new(grid, values)?
    };
    Ok(Rates {
        dq,
        dv,
        dissipation_h,
        dissipation_gradv,
    })
}
