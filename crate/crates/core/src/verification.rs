//! Named numerical checks of the algebraic identities, variational
//! derivatives and the energy balance, each returning a [`CheckReport`].

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{
    elastic_energy, f_b_density, f_b_general, g_b_matrix, hessian_fb, molecular_field_biaxial, sample_s_delta,
    BulkConstants, Material,
};
use crate::error::{Error, Result};
use crate::geometry::{
    gb_block_residual, molecular_field_uniaxial, project_pi, rotation_identity_residual, tangency_residual,
    third_identity_residual, third_identity_sides, uniaxial_field,
};
use crate::grid::{Grid, GridOps, Scheme, TensorField};
use crate::qtensor::{frobenius, lie_bracket, symmetrize_traceless, QTensor};
use crate::solver::{initial_state, EnergyLedger, InitPreset, InitSpec, SchemeConfig, Solver, System, TimeScheme};

/// Outcome of one check; `passed` iff `max_residual <= tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    /// What the check establishes.
    pub provenance: String,
}

impl CheckReport {
    fn new(name: &str, samples: usize, max_residual: f64, tolerance: f64, seed: u64, provenance: &str) -> Self {
        CheckReport {
            name: name.to_string(),
            samples,
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
            seed,
            provenance: provenance.to_string(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Registry order.
pub const CHECK_NAMES: [&str; 13] = [
    "lie_identity",
    "abc_relation",
    "hessian_entries",
    "hessian_quadratic_form",
    "gB_is_gradient",
    "third_identity",
    "gB_block",
    "pi_commutes",
    "fB_dist_lower",
    "uniaxial_H_tangency",
    "biaxial_H_gradient",
    "energy_identity",
    "coercivity",
];

pub fn run_check(name: &str, material: &Material, seed: u64) -> Result<CheckReport> {
    let m = material;
    Ok(match name {
        "lie_identity" => lie_identity(seed),
        "abc_relation" => abc_relation(&m.bulk, seed),
        "hessian_entries" => hessian_entries(&m.bulk, seed),
        "hessian_quadratic_form" => hessian_quadratic_form(&m.bulk, seed),
        "gB_is_gradient" => gb_is_gradient(&m.bulk, seed),
        "third_identity" => third_identity(&m.bulk, seed),
        "gB_block" => gb_block(&m.bulk, seed)?,
        "pi_commutes" => pi_commutes(&m.bulk, seed),
        "fB_dist_lower" => fb_dist_lower(&m.bulk, seed),
        "uniaxial_H_tangency" => uniaxial_h_tangency(m, seed)?,
        "biaxial_H_gradient" => biaxial_h_gradient(m, seed),
        "energy_identity" => energy_identity(m, seed)?,
        "coercivity" => coercivity(m, seed),
        other => return Err(Error::UnknownCheck(other.to_string())),
    })
}

/// Names matching a shell-style glob, in registry order.
pub fn matching_checks(pattern: Option<&str>) -> Result<Vec<&'static str>> {
    match pattern {
        None => Ok(CHECK_NAMES.to_vec()),
        Some(p) => {
            let pat = glob::Pattern::new(p).map_err(|e| Error::config("--filter", e.to_string()))?;
            Ok(CHECK_NAMES.iter().copied().filter(|n| pat.matches(n)).collect())
        }
    }
}

/// A random material satisfying the coercivity conditions.
pub fn random_coercive_material(seed: u64) -> Material {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = Material::new(
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.5..2.0),
            rng.gen_range(-0.2..0.6),
            rng.gen_range(-0.3..0.6),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(0.05..0.5),
        );
        if let Ok(m) = m {
            return m;
        }
    }
}

fn rand_matrix(rng: &mut ChaCha8Rng, scale: f64) -> Matrix3<f64> {
    Matrix3::from_fn(|_, _| rng.gen_range(-scale..scale))
}

fn rand_symmetric(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let m = rand_matrix(rng, 1.0);
    (m + m.transpose()) * 0.5
}

fn lie_identity(seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1000;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let a = rand_symmetric(&mut rng);
        let b = rand_symmetric(&mut rng);
        let f = rand_matrix(&mut rng, 1.0);
        let ab = lie_bracket(&a, &b);
        let lhs = frobenius(&lie_bracket(&a, &f), &b);
        let mid = frobenius(&f, &ab);
        let rhs = -frobenius(&f.transpose(), &ab);
        worst = worst.max((lhs - mid).abs()).max((mid - rhs).abs());
    }
    CheckReport::new(
        "lie_identity",
        n,
        worst,
        1e-12,
        seed,
        "<[A,F],B> = <F,[A,B]> = -<F^T,[A,B]> for symmetric A, B",
    )
}

fn abc_residual(bc: &BulkConstants) -> f64 {
    let s = bc.s_plus();
    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-300);
    let q2 = bc.q_plus().norm_squared();
    rel(2.0 * bc.c() * s * s, 3.0 * bc.a() + bc.b() * s).max(rel(q2, 2.0 / 3.0 * s * s))
}

fn abc_relation(bc: &BulkConstants, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = abc_residual(bc);
    let n = 100;
    for _ in 0..n {
        let r = BulkConstants::new(rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0))
            .expect("positive constants");
        worst = worst.max(abc_residual(&r));
    }
    CheckReport::new(
        "abc_relation",
        n + 1,
        worst,
        1e-12,
        seed,
        "2 c s+^2 = 3a + b s+ and |Q+|^2 = 2/3 s+^2",
    )
}

/// `((i, j), (k, l), value)` of one Hessian entry.
pub type HessianEntry = ((usize, usize), (usize, usize), f64);

/// Closed-form second derivatives at `Q⁺`.
pub fn hessian_closed_form(bc: &BulkConstants) -> [HessianEntry; 6] {
    let (a, b, s) = (bc.a(), bc.b(), bc.s_plus());
    let d11 = a / 3.0 + 10.0 * s * b / 9.0;
    let d33 = 4.0 * a / 3.0 - 5.0 * s * b / 9.0;
    let o12 = a / 3.0 + s * b / 9.0;
    let o13 = -(2.0 * a / 3.0 + 2.0 * s * b / 9.0);
    [
        ((0, 0), (0, 0), d11),
        ((1, 1), (1, 1), d11),
        ((2, 2), (2, 2), d33),
        ((0, 0), (1, 1), o12),
        ((0, 0), (2, 2), o13),
        ((1, 1), (2, 2), o13),
    ]
}

fn hessian_entries(bc: &BulkConstants, seed: u64) -> CheckReport {
    let h = hessian_fb(&bc.q_plus(), bc);
    let mut worst = 0.0f64;
    let s = bc.s_plus();
    for ((i, j), (k, l), v) in hessian_closed_form(bc) {
        worst = worst.max((h.entry(i, j, k, l) - v).abs());
    }
    // The same entries in their un-reduced form.
    let c = bc.c();
    let b = bc.b();
    let raw = [
        (h.entry(0, 0, 0, 0), s * b + 2.0 * s * s * c / 9.0),
        (h.entry(2, 2, 2, 2), -s * b + 8.0 * s * s * c / 9.0),
        (h.entry(0, 0, 1, 1), 2.0 * s * s * c / 9.0),
    ];
    for (x, y) in raw {
        worst = worst.max((x - y).abs());
    }
    CheckReport::new(
        "hessian_entries",
        9,
        worst,
        1e-10,
        seed,
        "diagonal-block second derivatives of f_B at Q+",
    )
}

/// Random symmetric traceless `ξ` with `ξ13 = ξ23 = 0`.
fn block_xi(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let (x11, x22, x12) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    Matrix3::new(x11, x12, 0.0, x12, x22, 0.0, 0.0, 0.0, -x11 - x22)
}

fn hessian_quadratic_form(bc: &BulkConstants, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = hessian_fb(&bc.q_plus(), bc);
    let (a, b, s, lambda) = (bc.a(), bc.b(), bc.s_plus(), bc.lambda());
    let mut worst = 0.0f64;
    let n = 1000;
    let mut check = |xi: &Matrix3<f64>| {
        let form = h.quadratic_form(xi);
        let closed = s * b * (xi[(0, 0)].powi(2) + xi[(1, 1)].powi(2) + xi[(0, 1)].powi(2) + xi[(1, 0)].powi(2))
            + 3.0 * a * xi[(2, 2)].powi(2);
        let deficit = (lambda * xi.norm_squared() - form).max(0.0);
        worst = worst.max((form - closed).abs()).max(deficit);
    };
    check(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -2.0)));
    for _ in 0..n {
        check(&block_xi(&mut rng));
    }
    CheckReport::new(
        "hessian_quadratic_form",
        n + 1,
        worst,
        1e-10,
        seed,
        "Hessian form at Q+ on block-form xi equals s+ b (xi11^2+xi22^2+xi12^2+xi21^2) + 3a xi33^2 >= lambda |xi|^2",
    )
}

fn gb_is_gradient(bc: &BulkConstants, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 200;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let q = symmetrize_traceless(&rand_matrix(&mut rng, 1.0)).into_matrix();
        let mut grad = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut e = Matrix3::zeros();
                e[(i, j)] = h;
                grad[(i, j)] = (f_b_general(&(q + e), bc) - f_b_general(&(q - e), bc)) / (2.0 * h);
            }
        }
        let expected = -grad - Matrix3::identity() * (bc.b() / 3.0 * q.norm_squared());
        let g = g_b_matrix(&q, bc);
        worst = worst.max((g - expected).abs().max() / g.norm().max(1.0));
    }
    CheckReport::new(
        "gB_is_gradient",
        n,
        worst,
        1e-6,
        seed,
        "g_B = -dF_B/dQ - (b/3) tr(Q^2) I, finite differences",
    )
}

fn third_identity(bc: &BulkConstants, seed: u64) -> CheckReport {
    let s = bc.s_plus();
    let ops = GridOps::new(Grid::square(64, Scheme::Spectral).expect("valid grid"));
    let g = *ops.grid();
    let mut worst = 0.0f64;
    let mut fields = vec![
        uniaxial_field(g, s, |x| Vector3::new(x[0].cos(), x[0].sin(), 0.0)),
        uniaxial_field(g, s, |x| Vector3::new(x[1].cos() * x[0].sin(), x[1].sin(), 0.7 + 0.3 * x[0].cos())),
    ];
    let mat = Material::new(bc.a(), bc.b(), bc.c(), 1.0, 0.0, 0.0, 0.0, 0.1).expect("one-constant material");
    let mut spec = InitSpec::new(InitPreset::SmoothDirector);
    spec.seed = seed;
    spec.amplitude = 0.5;
    fields.push(initial_state(g, &mat, System::Uniaxial, &spec).expect("director preset").q);
    for q in &fields {
        worst = worst.max(third_identity_residual(&ops, q, bc).max());
    }
    // At x = 0 the winding has u = e1, |∂₁u| = 1 and both sides equal 4 s₊³ / 3.
    let (lhs, rhs) = third_identity_sides(&ops, &fields[0], bc);
    let hand = 4.0 * s.powi(3) / 3.0;
    worst = worst.max((lhs[0] - hand).abs()).max((rhs[0] - hand).abs());
    CheckReport::new(
        "third_identity",
        fields.len() * g.len() + 1,
        worst,
        1e-8,
        seed,
        "Q_lk dlQ:dkQ = (3/s+)(Q_ln dlQ_ij)(Q_kn dkQ_ij) - (2 s+/3)|grad Q|^2 on uniaxial fields",
    )
}

fn gb_block(bc: &BulkConstants, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let n = 200;
    let d = 0.3 * bc.delta();
    for _ in 0..n {
        let q = sample_s_delta(&mut rng, bc);
        worst = worst.max(gb_block_residual(&q, bc)?);
    }
    let paths = 50;
    for _ in 0..paths {
        let u = crate::energy::random_unit(&mut rng);
        let base = crate::qtensor::uniaxial_from_director(&u, bc.s_plus())?;
        let d0 = symmetrize_traceless(&rand_matrix(&mut rng, 1.0));
        let d1 = symmetrize_traceless(&rand_matrix(&mut rng, 1.0));
        let d2 = symmetrize_traceless(&rand_matrix(&mut rng, 1.0));
        let k = d / (d0.norm() + d1.norm() + d2.norm());
        let path = move |t: f64| base + d0 * k + d1 * (k * t.sin()) + d2 * (k * t * t);
        let r = rotation_identity_residual(path, 0.1, 1e-3, bc)?;
        worst = worst.max(r[0]).max(r[1]);
    }
    Ok(CheckReport::new(
        "gB_block",
        n + 2 * paths,
        worst,
        1e-10,
        seed,
        "g_B of the rotated tensor has no 13/23 entries, and pairs to zero with the rotation generator (k = 0, 1)",
    ))
}

fn pi_commutes(bc: &BulkConstants, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1000;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let q = sample_s_delta(&mut rng, bc);
        let p = project_pi(&q, bc);
        worst = worst.max(lie_bracket(q.matrix(), p.pi_q.matrix()).abs().max());
    }
    CheckReport::new("pi_commutes", n, worst, 1e-10, seed, "pi(Q) commutes with Q on S_delta")
}

fn fb_dist_lower(bc: &BulkConstants, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2000;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let q = sample_s_delta(&mut rng, bc);
        let d = project_pi(&q, bc).distance;
        worst = worst.max(0.5 * bc.lambda() * d * d - f_b_density(&q, bc));
    }
    CheckReport::new(
        "fB_dist_lower",
        n,
        worst.max(0.0),
        1e-12,
        seed,
        "f_B(Q) >= (lambda/2) dist(Q, S_*)^2 on S_delta",
    )
}

fn smooth_director_field(g: Grid, m: &Material, seed: u64) -> Result<TensorField> {
    let mut spec = InitSpec::new(InitPreset::SmoothDirector);
    spec.seed = seed;
    spec.amplitude = 0.5;
    Ok(initial_state(g, m, System::Uniaxial, &spec)?.q)
}

fn uniaxial_h_tangency(m: &Material, seed: u64) -> Result<CheckReport> {
    // Products of a renormalized director are not band-limited; 64 points
    // keep the truncation part of the normal component below the tolerance.
    let ops = GridOps::new(Grid::square(64, Scheme::Spectral).expect("valid grid"));
    let q = smooth_director_field(*ops.grid(), m, seed)?;
    let h = molecular_field_uniaxial(&ops, &q, m)?;
    let r = tangency_residual(&q, &h, &m.bulk);
    Ok(CheckReport::new(
        "uniaxial_H_tangency",
        q.len(),
        r,
        1e-6,
        seed,
        "uniaxial molecular field lies in the tangent space of S_*",
    ))
}

fn biaxial_h_gradient(m: &Material, seed: u64) -> CheckReport {
    let ops = GridOps::new(Grid::square(32, Scheme::Spectral).expect("valid grid"));
    let g = *ops.grid();
    let mut spec = InitSpec::new(InitPreset::BiaxialPerturbation);
    spec.seed = seed;
    spec.amplitude = 1.0;
    let q = initial_state(g, m, System::Biaxial, &spec).expect("biaxial preset").q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let e: Vec<QTensor> = (0..3).map(|_| symmetrize_traceless(&rand_matrix(&mut rng, 1.0))).collect();
    let dq = TensorField::from_fn(g, |x| {
        e[0] * (x[0] - 0.4).sin() + e[1] * (x[1] - 2.0 * x[0] + 0.5).cos() + e[2] * (x[0] + x[1]).cos()
    });
    let h = molecular_field_biaxial(&ops, &q, &m.elastic);
    let pairing: Vec<f64> = h.values().iter().zip(dq.values()).map(|(a, b)| a.frobenius(b)).collect();
    let lhs = ops.integrate(&pairing);
    let eps = 1e-5;
    let ep = elastic_energy(&ops, &q.axpy(eps, &dq), &m.elastic);
    let em = elastic_energy(&ops, &q.axpy(-eps, &dq), &m.elastic);
    let rhs = -(ep - em) / (2.0 * eps);
    CheckReport::new(
        "biaxial_H_gradient",
        g.len(),
        (lhs - rhs).abs() / rhs.abs().max(1e-300),
        1e-6,
        seed,
        "biaxial molecular field is the negative L2 gradient of the elastic energy",
    )
}

/// Largest energy-identity residual of an IMEX run to a fixed time.
fn identity_residual_at(m: &Material, seed: u64, dt: f64, steps: usize) -> Result<f64> {
    let g = Grid::square(16, Scheme::Spectral).expect("valid grid");
    let ops = GridOps::new(g);
    let mut spec = InitSpec::new(InitPreset::BiaxialPerturbation);
    spec.seed = seed;
    spec.amplitude = 1.0;
    spec.velocity = 0.5;
    let mut state = initial_state(g, m, System::Biaxial, &spec)?;
    let cfg = SchemeConfig {
        dt: Some(dt),
        scheme: TimeScheme::Imex,
        ..Default::default()
    };
    let mut solver = Solver::new(ops.clone(), cfg, &state)?;
    let mut ledger = EnergyLedger::start(&ops, &state, &solver.rates(&state)?);
    solver.run(&mut state, steps, |s, info| {
        ledger.record(&ops, s, info);
        Ok(())
    })?;
    Ok(ledger.max_residual())
}

fn energy_identity(m: &Material, seed: u64) -> Result<CheckReport> {
    let g = Grid::square(16, Scheme::Spectral).expect("valid grid");
    let ops = GridOps::new(g);
    let probe = initial_state(g, m, System::Biaxial, &InitSpec::new(InitPreset::TaylorGreen))?;
    let dt = 0.25 * crate::solver::Solver::new(ops, SchemeConfig::default(), &probe)?.dt();
    let coarse = identity_residual_at(m, seed, dt, 8)?;
    let fine = identity_residual_at(m, seed, 0.5 * dt, 16)?;
    let ratio = coarse / fine;
    Ok(CheckReport::new(
        "energy_identity",
        2,
        (ratio - 2.0).abs() / 2.0,
        0.2,
        seed,
        "energy identity residual is first order in dt (halving dt halves it)",
    ))
}

fn coercivity(m: &Material, seed: u64) -> CheckReport {
    let r = crate::energy::check_coercivity(
        m.elastic.l1(),
        m.elastic.l2(),
        m.elastic.l3(),
        m.elastic.l4(),
        &m.bulk,
    );
    let residual = if r.ok { -r.alpha } else { r.alpha.abs().max(1.0) };
    CheckReport::new(
        "coercivity",
        r.samples,
        residual,
        0.0,
        seed,
        "elastic form is uniformly positive (sampled alpha > 0)",
    )
}
