//! Landau-de Gennes energy: material constants, densities, derivatives and
//! the field-level molecular field and stress.

mod constants;
mod density;

pub use constants::{
    check_coercivity, l1_tilde, random_unit, sample_s_delta, BulkConstants, CoercivityReport,
    ElasticConstants, Material, COERCIVITY_SAMPLES,
};
pub use density::{
    bulk_tilde, d_p_f_e, d_q_f_e, f_b_density, f_b_general, f_e_density, g_b, g_b_matrix,
    hessian_fb, original_density, zero_gradient, BulkHessian, Gradient,
};
mod fields;

pub use fields::{
    bulk_energy, distortion_stress, elastic_energy, energy_breakdown, full_molecular_field,
    kinetic_energy, molecular_field_biaxial, molecular_field_from_terms, stress_from_terms,
    ElasticTerms, EnergyBreakdown,
};
pub(crate) use fields::add_bulk_force;
