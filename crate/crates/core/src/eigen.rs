//! Closed-form eigensolver for real symmetric 3x3 matrices.
//!
//! Eigenvalues come from the trigonometric solution of the characteristic
//! cubic followed by one Newton step on the cubic. The eigenvector of the
//! best-separated eigenvalue is taken from cross products of the rows of
//! `A - λI`; the remaining pair is resolved by an exact 2x2 rotation in the
//! orthogonal complement.
//!
//! Determinism rules:
//! - eigenvalues are returned in ascending order;
//! - each eigenvector has its largest-magnitude component positive
//!   (first index wins on exact ties);
//! - when two eigenvalues differ by less than `1e-9 |A|`, the eigenspace basis
//!   is built from the best-aligned coordinate axis and the two vectors are
//!   ordered lexicographically, largest first, and the two eigenvalues are
//!   replaced by their mean (so reconstruction is exact only up to the gap);
//! - the first column is finally replaced by `c2 × c3` so that the
//!   eigenvector matrix is a proper rotation.

use nalgebra::{Matrix2, Matrix3, Vector3};
use std::f64::consts::PI;

/// Relative eigenvalue gap below which two eigenvalues are treated as tied.
pub const TIE_TOL: f64 = 1e-9;

pub fn symmetric_eigen(a: &Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let a = (a + a.transpose()) * 0.5;
    let scale = a.norm();
    if scale == 0.0 || !scale.is_finite() {
        return ([0.0; 3], Matrix3::identity());
    }
    let b = a / scale;
    let mut vals = eigenvalues_normalized(&b);
    for v in vals.iter_mut() {
        *v = newton_polish(&b, *v);
    }
    vals.sort_by(|x, y| x.total_cmp(y));

    let spread = vals[2] - vals[0];
    if spread < TIE_TOL {
        let mean = (vals[0] + vals[1] + vals[2]) / 3.0;
        return ([mean * scale; 3], Matrix3::identity());
    }

    let gap_low = vals[1] - vals[0];
    let gap_high = vals[2] - vals[1];
    // Index of the best separated eigenvalue and the remaining pair.
    let (iso, pair) = if gap_high >= gap_low {
        (2, [0, 1])
    } else {
        (0, [1, 2])
    };
    let v = null_vector(&(b - Matrix3::identity() * vals[iso]));

    let mut cols = [Vector3::zeros(); 3];
    cols[iso] = normalize_sign(v);

    let (w1, w2) = complement_basis(&v);
    let m = Matrix2::new(
        w1.dot(&(b * w1)),
        w1.dot(&(b * w2)),
        w2.dot(&(b * w1)),
        w2.dot(&(b * w2)),
    );
    // Rayleigh quotients are more accurate than the cubic roots for close pairs.
    vals[iso] = v.dot(&(b * v));
    let pair_gap = ((m[(0, 0)] - m[(1, 1)]).powi(2) + 4.0 * m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    if pair_gap < TIE_TOL {
        let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
        vals[pair[0]] = mean;
        vals[pair[1]] = mean;
        let x1 = best_axis_in_plane(&v);
        let x2 = v.cross(&x1).normalize();
        let mut xs = [normalize_sign(x1), normalize_sign(x2)];
        xs.sort_by(|p, q| lex_cmp(q, p));
        cols[pair[0]] = xs[0];
        cols[pair[1]] = xs[1];
    } else {
        let theta = 0.5 * (2.0 * m[(0, 1)]).atan2(m[(0, 0)] - m[(1, 1)]);
        let (s, c) = theta.sin_cos();
        let xa = w1 * c + w2 * s;
        let xb = w2 * c - w1 * s;
        let ra = xa.dot(&(b * xa));
        let rb = xb.dot(&(b * xb));
        let (lo, hi, rlo, rhi) = if ra <= rb { (xa, xb, ra, rb) } else { (xb, xa, rb, ra) };
        cols[pair[0]] = normalize_sign(lo);
        cols[pair[1]] = normalize_sign(hi);
        vals[pair[0]] = rlo;
        vals[pair[1]] = rhi;
    }
    cols[0] = cols[1].cross(&cols[2]);

    let r = Matrix3::from_columns(&cols);
    ([vals[0] * scale, vals[1] * scale, vals[2] * scale], r)
}

fn eigenvalues_normalized(b: &Matrix3<f64>) -> [f64; 3] {
    let q = b.trace() / 3.0;
    let c = b - Matrix3::identity() * q;
    let p = (c.norm_squared() / 6.0).sqrt();
    if p < 1e-300 {
        return [q; 3];
    }
    let r = ((c / p).determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e_max = q + 2.0 * p * phi.cos();
    let e_min = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e_mid = 3.0 * q - e_max - e_min;
    [e_min, e_mid, e_max]
}

/// One Newton step on `det(B - λI)`, kept only if it reduces the residual.
fn newton_polish(b: &Matrix3<f64>, lambda: f64) -> f64 {
    let charpoly = |l: f64| (b - Matrix3::identity() * l).determinant();
    let m = b - Matrix3::identity() * lambda;
    // d/dλ det(B - λI) = -tr adj(B - λI)
    let tr_adj = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    if tr_adj.abs() < 1e-8 {
        return lambda;
    }
    let f0 = charpoly(lambda);
    let candidate = lambda + f0 / tr_adj;
    if charpoly(candidate).abs() <= f0.abs() {
        candidate
    } else {
        lambda
    }
}

/// Unit vector spanning the (numerical) kernel of a rank-2 symmetric matrix.
fn null_vector(m: &Matrix3<f64>) -> Vector3<f64> {
    let r0 = m.row(0).transpose();
    let r1 = m.row(1).transpose();
    let r2 = m.row(2).transpose();
    let candidates = [r0.cross(&r1), r1.cross(&r2), r2.cross(&r0)];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
        .copied()
        .unwrap_or_else(Vector3::z);
    if best.norm_squared() < 1e-300 {
        return Vector3::z();
    }
    best.normalize()
}

fn complement_basis(v: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    // Coordinate axis least aligned with v.
    let k = (0..3)
        .min_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
        .unwrap_or(0);
    let e = Vector3::ith(k, 1.0);
    let w1 = (e - v * v[k]).normalize();
    let w2 = v.cross(&w1);
    (w1, w2)
}

/// Projection of the best-aligned coordinate axis onto the plane `v⊥`.
fn best_axis_in_plane(v: &Vector3<f64>) -> Vector3<f64> {
    let mut best = Vector3::zeros();
    let mut best_norm = -1.0;
    for k in 0..3 {
        let e = Vector3::ith(k, 1.0);
        let p = e - v * v[k];
        let n = p.norm();
        if n > best_norm + 1e-12 {
            best = p;
            best_norm = n;
        }
    }
    best / best_norm
}

pub(crate) fn normalize_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut imax = 0;
    for i in 1..3 {
        if v[i].abs() > v[imax].abs() {
            imax = i;
        }
    }
    if v[imax] < 0.0 {
        -v
    } else {
        v
    }
}

fn lex_cmp(a: &Vector3<f64>, b: &Vector3<f64>) -> std::cmp::Ordering {
    for i in 0..3 {
        match a[i].total_cmp(&b[i]) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}
