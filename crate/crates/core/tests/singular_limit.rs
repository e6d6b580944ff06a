//! The uniaxial system is the small-L limit of the biaxial one, so on the
//! manifold the uniaxial molecular field must equal the tangential part of
//! the biaxial one.

use nalgebra::{Matrix3, Vector3};
use nematic_core::energy::{molecular_field_biaxial, Material};
use nematic_core::geometry::{molecular_field_uniaxial, uniaxial_field};
use nematic_core::grid::{Grid, GridOps, Scheme};

/// `X P + P X - (2/s) <X, P> P` with `P = Q + s I / 3`: the orthogonal
/// projection onto the tangent space at `Q` when `s = 1`.
fn tangential(x: &Matrix3<f64>, q: &Matrix3<f64>, s: f64) -> Matrix3<f64> {
    let p = q + Matrix3::identity() * (s / 3.0);
    x * p + p * x - p * (2.0 / s * x.component_mul(&p).sum())
}

#[test]
fn uniaxial_field_is_tangential_part_of_biaxial_field() {
    let ops = GridOps::new(Grid::square(128, Scheme::Spectral).unwrap());
    let g = *ops.grid();
    for (l2, l3, l4) in [(0.0, 0.0, 0.0), (0.2, 0.0, 0.0), (0.0, 0.1, 0.0), (0.0, 0.0, 0.3), (0.2, 0.1, 0.3)] {
        let m = Material::new(1.0 / 3.0, 1.0, 1.0, 1.0, l2, l3, l4, 0.1).unwrap();
        let s = m.s_plus();
        assert!((s - 1.0).abs() < 1e-14);
        let q = uniaxial_field(g, s, |x| {
            Vector3::new(x[1].cos() * x[0].sin(), x[1].sin(), 0.7 + 0.3 * x[0].cos())
        });
        let h = molecular_field_uniaxial(&ops, &q, &m).unwrap();
        let hb = molecular_field_biaxial(&ops, &q, &m.elastic);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..g.len() {
            let t = tangential(hb.values()[i].matrix(), q.values()[i].matrix(), s);
            worst = worst.max((h.values()[i].matrix() - t).norm());
            scale = scale.max(t.norm());
        }
        assert!(worst / scale < 1e-5, "L2..L4 = {l2}, {l3}, {l4}: relative {}", worst / scale);
    }
}
