use log::{debug, info, warn};
use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::rhs::{rhs, Rates};
use super::{SchemeConfig, SimState, System, TimeScheme};
use crate::error::{Error, Result};
use crate::geometry::renormalize;
use crate::grid::{GridOps, Scheme, TensorField, VectorField};

const PICARD_MAX_HALVINGS: u32 = 5;
const PICARD_STALL: usize = 3;

/// Convergence record of one Picard solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PicardStats {
    pub iterations: usize,
    /// `‖d_{m+1}‖ / ‖d_m‖` for consecutive iterate differences.
    pub ratios: Vec<f64>,
    pub halvings: u32,
    pub converged: bool,
    pub final_difference: f64,
}

/// What a single step did.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepInfo {
    /// Step actually taken (smaller than the nominal one after Picard halvings).
    pub dt: f64,
    /// Dissipation integrals of the rates that drove the step.
    pub dissipation_h: f64,
    pub dissipation_gradv: f64,
    /// Distance removed by the manifold projection (0 when none happened).
    pub renormalized: f64,
    pub picard: Option<PicardStats>,
}

/// Advances a [`SimState`] with a fixed step size chosen at construction.
#[derive(Clone, Debug)]
pub struct Solver {
    ops: GridOps,
    cfg: SchemeConfig,
    dt: f64,
}

impl Solver {
    pub fn new(ops: GridOps, cfg: SchemeConfig, state: &SimState) -> Result<Self> {
        cfg.validate()?;
        ops.check(state.grid())?;
        if cfg.scheme == TimeScheme::Picard && state.system == System::Uniaxial {
            return Err(Error::Unsupported(
                "the picard scheme is only available for the biaxial system".into(),
            ));
        }
        let dt = match cfg.dt {
            Some(dt) => dt,
            None => dt_auto(&ops, state),
        };
        info!("time step dt = {dt:.3e} ({})", cfg.scheme.as_str());
        Ok(Solver { ops, cfg, dt })
    }

    pub fn ops(&self) -> &GridOps {
        &self.ops
    }
    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Rates used by the solver: uniaxial states are evaluated at `π(Q)`.
    pub fn rates(&self, state: &SimState) -> Result<Rates> {
        if state.system == System::Uniaxial {
            let (q, _) = renormalize(&state.q, &state.material.bulk);
            let projected = SimState { q, ..state.clone() };
            rhs(&self.ops, &projected, self.cfg.freeze_velocity)
        } else {
            rhs(&self.ops, state, self.cfg.freeze_velocity)
        }
    }

    pub fn step(&mut self, state: &mut SimState) -> Result<StepInfo> {
        let mut info = match self.cfg.scheme {
            TimeScheme::Imex => self.imex(state)?,
            TimeScheme::ExplicitRk2 => self.heun(state)?,
            TimeScheme::Picard => self.picard(state)?,
        };
        state.t += info.dt;
        state.step += 1;
        if state.system == System::Uniaxial && state.step % self.cfg.renormalize_every == 0 {
            let (q, d) = renormalize(&state.q, &state.material.bulk);
            state.q = q;
            info.renormalized = d;
        }
        check_finite(state)?;
        Ok(info)
    }

    /// Runs `steps` steps, calling `observe` after each one.
    pub fn run(
        &mut self,
        state: &mut SimState,
        steps: usize,
        mut observe: impl FnMut(&SimState, &StepInfo) -> Result<()>,
    ) -> Result<()> {
        for _ in 0..steps {
            let info = self.step(state)?;
            observe(state, &info)?;
        }
        Ok(())
    }

    fn mask(&self) -> bool {
        self.cfg.dealias && self.ops.grid().scheme() == Scheme::Spectral
    }

    fn imex(&self, state: &mut SimState) -> Result<StepInfo> {
        let r = self.rates(state)?;
        let dt = self.dt;
        let kappa = state.material.elastic.l1_tilde();
        let mask = self.mask();
        state.q = implicit_tensor(&self.ops, &state.q, &r.dq, dt, kappa, mask, None);
        if !self.cfg.freeze_velocity {
            let v = implicit_vector(&self.ops, &state.v, &r.dv, dt, 1.0, mask, None);
            state.v = self.ops.leray_project(&v);
        }
        Ok(StepInfo {
            dt,
            dissipation_h: r.dissipation_h,
            dissipation_gradv: r.dissipation_gradv,
            renormalized: 0.0,
            picard: None,
        })
    }

    fn heun(&self, state: &mut SimState) -> Result<StepInfo> {
        let dt = self.dt;
        let mask = self.mask();
        let r1 = self.rates(state)?;
        let mut pred = state.clone();
        pred.q = explicit_tensor(&self.ops, &state.q, &r1.dq, dt, mask);
        if state.system == System::Uniaxial {
            pred.q = renormalize(&pred.q, &state.material.bulk).0;
        }
        if !self.cfg.freeze_velocity {
            pred.v = self.ops.leray_project(&explicit_vector(&self.ops, &state.v, &r1.dv, dt, mask));
        }
        let r2 = self.rates(&pred)?;
        let dq = r1.dq.axpy(1.0, &r2.dq);
        state.q = explicit_tensor(&self.ops, &state.q, &dq, 0.5 * dt, mask);
        if !self.cfg.freeze_velocity {
            let dv = r1.dv.axpy(1.0, &r2.dv);
            state.v = self.ops.leray_project(&explicit_vector(&self.ops, &state.v, &dv, 0.5 * dt, mask));
        }
        Ok(StepInfo {
            dt,
            dissipation_h: r1.dissipation_h,
            dissipation_gradv: r1.dissipation_gradv,
            renormalized: 0.0,
            picard: None,
        })
    }

    /// Backward Euler via the linearized fixed point
    /// `(1 - dt Λ Δ) Q_{m+1} = Qⁿ + dt (F(Q_m, v_m) - Λ ΔQ_m)`, same for `v`.
    /// Stalling iterations halve the step; the solver keeps the reduced step.
    fn picard(&mut self, state: &mut SimState) -> Result<StepInfo> {
        let mut halvings = 0u32;
        loop {
            match self.picard_solve(state, self.dt)? {
                Ok((new_state, rates, mut stats)) => {
                    stats.halvings = halvings;
                    let dt = self.dt;
                    state.q = new_state.q;
                    state.v = new_state.v;
                    return Ok(StepInfo {
                        dt,
                        dissipation_h: rates.dissipation_h,
                        dissipation_gradv: rates.dissipation_gradv,
                        renormalized: 0.0,
                        picard: Some(stats),
                    });
                }
                Err(ratio) => {
                    halvings += 1;
                    if halvings > PICARD_MAX_HALVINGS {
                        return Err(Error::PicardDiverged {
                            halvings: PICARD_MAX_HALVINGS,
                            ratio,
                        });
                    }
                    self.dt *= 0.5;
                    warn!("picard iteration stalled (ratio {ratio:.3}); dt halved to {:.3e}", self.dt);
                }
            }
        }
    }

    /// Inner result is `Err(ratio)` when the iteration stalls.
    #[allow(clippy::type_complexity)]
    fn picard_solve(
        &self,
        start: &SimState,
        dt: f64,
    ) -> Result<std::result::Result<(SimState, Rates, PicardStats), f64>> {
        let kappa = start.material.elastic.lambda_up();
        let mask = self.mask();
        let mut iterate = start.clone();
        let mut stats = PicardStats::default();
        let mut prev_diff: Option<f64> = None;
        let mut stall = 0usize;
        loop {
            let r = self.rates(&iterate)?;
            let q_next = implicit_tensor(&self.ops, &start.q, &r.dq, dt, kappa, mask, Some(&iterate.q));
            let v_next = if self.cfg.freeze_velocity {
                start.v.clone()
            } else {
                let v = implicit_vector(&self.ops, &start.v, &r.dv, dt, kappa, mask, Some(&iterate.v));
                self.ops.leray_project(&v)
            };
            let dq = q_next.axpy(-1.0, &iterate.q);
            let dv = v_next.axpy(-1.0, &iterate.v);
            let diff = self.ops.norm_h1(&dq) + self.ops.norm_l2(&dv);
            if !diff.is_finite() {
                return Ok(Err(f64::INFINITY));
            }
            stats.iterations += 1;
            stats.final_difference = diff;
            if let Some(p) = prev_diff {
                let ratio = if p > 0.0 { diff / p } else { 0.0 };
                stats.ratios.push(ratio);
                if ratio >= 1.0 {
                    stall += 1;
                    if stall >= PICARD_STALL {
                        return Ok(Err(ratio));
                    }
                } else {
                    stall = 0;
                }
            }
            prev_diff = Some(diff);
            iterate.q = q_next;
            iterate.v = v_next;
            if diff < self.cfg.picard_tol {
                stats.converged = true;
                let r = self.rates(&iterate)?;
                debug!("picard converged in {} iterations", stats.iterations);
                return Ok(Ok((iterate, r, stats)));
            }
            if stats.iterations >= self.cfg.picard_max_iters {
                info!(
                    "picard reached {} iterations (difference {diff:.3e}); accepting iterate",
                    stats.iterations
                );
                let r = self.rates(&iterate)?;
                return Ok(Ok((iterate, r, stats)));
            }
        }
    }
}

/// `dt = min(0.25 h / max|v|, 1 / (Λ kmax²))`, and for the biaxial system
/// also `0.5 L / a`.
pub(crate) fn dt_auto(ops: &GridOps, state: &SimState) -> f64 {
    let h = ops.grid().spacing();
    let vmax = state.v.max_abs();
    let mut dt = 1.0 / (state.material.elastic.lambda_up() * ops.max_wavenumber_squared());
    if vmax > 0.0 {
        dt = dt.min(0.25 * h / vmax);
    }
    if state.system == System::Biaxial {
        dt = dt.min(0.5 * state.material.big_l() / state.material.bulk.a());
    }
    dt
}

fn check_finite(state: &SimState) -> Result<()> {
    if state.q.values().iter().any(|q| !q.matrix().iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite {
            field: "Q",
            t: state.t,
            step: state.step,
        });
    }
    if state.v.values().iter().any(|v| !v.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite {
            field: "v",
            t: state.t,
            step: state.step,
        });
    }
    Ok(())
}

/// `û_new = (û + dt·(f̂ - κ Δ̂ û_lag)) / (1 - dt κ Δ̂)` per mode, where the
/// lagged field defaults to `u` itself (giving `û + dt f̂ / (1 + dt κ |k|²)`).
/// With `mask` set, the forcing is zeroed on modes outside the 2/3 rule.
fn implicit_component(
    ops: &GridOps,
    u: &[f64],
    f: &[f64],
    lag: Option<&[f64]>,
    dt: f64,
    kappa: f64,
    mask: bool,
) -> Vec<f64> {
    let u_hat = ops.forward(u);
    let f_hat = ops.forward(f);
    let lag_hat = lag.map(|l| ops.forward(l));
    let out: Vec<Complex64> = (0..u_hat.len())
        .map(|i| {
            let lap = ops.laplacian_symbol(i);
            let lagged = lag_hat.as_ref().map_or(u_hat[i], |l| l[i]);
            let forcing = if mask && !ops.keeps_mode(i) {
                Complex64::new(0.0, 0.0)
            } else {
                f_hat[i]
            };
            let rhs = forcing - lagged * (kappa * lap);
            (u_hat[i] + rhs * dt) / (1.0 - dt * kappa * lap)
        })
        .collect();
    ops.inverse(out)
}

fn implicit_tensor(
    ops: &GridOps,
    q: &TensorField,
    f: &TensorField,
    dt: f64,
    kappa: f64,
    mask: bool,
    lag: Option<&TensorField>,
) -> TensorField {
    let comps: Vec<Vec<f64>> = (0..5)
        .map(|c| {
            let lag_c = lag.map(|l| l.component(c));
            implicit_component(ops, &q.component(c), &f.component(c), lag_c.as_deref(), dt, kappa, mask)
        })
        .collect();
    TensorField::from_components(*q.grid(), [&comps[0], &comps[1], &comps[2], &comps[3], &comps[4]])
}

fn implicit_vector(
    ops: &GridOps,
    v: &VectorField,
    f: &VectorField,
    dt: f64,
    kappa: f64,
    mask: bool,
    lag: Option<&VectorField>,
) -> VectorField {
    let comps: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let lag_c = lag.map(|l| l.component(c));
            implicit_component(ops, &v.component(c), &f.component(c), lag_c.as_deref(), dt, kappa, mask)
        })
        .collect();
    VectorField::from_components(*v.grid(), [&comps[0], &comps[1], &comps[2]])
}

fn explicit_tensor(ops: &GridOps, q: &TensorField, f: &TensorField, dt: f64, mask: bool) -> TensorField {
    implicit_tensor(ops, q, f, dt, 0.0, mask, None)
}

fn explicit_vector(ops: &GridOps, v: &VectorField, f: &VectorField, dt: f64, mask: bool) -> VectorField {
    implicit_vector(ops, v, f, dt, 0.0, mask, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Material;
    use crate::geometry::max_manifold_distance;
    use crate::grid::Grid;
    use crate::solver::{energy_report, initial_state, InitPreset, InitSpec};

    fn setup(n: usize, system: System, preset: InitPreset, velocity: f64) -> (GridOps, SimState) {
        let g = Grid::square(n, Scheme::Spectral).unwrap();
        let mat = Material::new(1.0 / 3.0, 1.0, 1.0, 1.0, 0.2, 0.1, 0.3, 0.1).unwrap();
        let mut spec = InitSpec::new(preset);
        spec.velocity = velocity;
        spec.amplitude = 0.3;
        spec.seed = 5;
        (GridOps::new(g), initial_state(g, &mat, system, &spec).unwrap())
    }

    fn cfg(scheme: TimeScheme, dt: f64) -> SchemeConfig {
        SchemeConfig {
            dt: Some(dt),
            scheme,
            ..Default::default()
        }
    }

    #[test]
    fn stationary_state_stays_put() {
        for scheme in [TimeScheme::Imex, TimeScheme::ExplicitRk2, TimeScheme::Picard] {
            let (ops, mut st) = setup(16, System::Biaxial, InitPreset::Stationary, 0.0);
            let start = st.clone();
            let mut s = Solver::new(ops, cfg(scheme, 1e-3), &st).unwrap();
            for _ in 0..3 {
                s.step(&mut st).unwrap();
                assert!(st.q.max_abs_diff(&start.q) < 1e-12);
                assert!(st.v.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn velocity_stays_divergence_free() {
        let (ops, mut st) = setup(16, System::Biaxial, InitPreset::BiaxialPerturbation, 0.5);
        let mut s = Solver::new(ops.clone(), cfg(TimeScheme::Imex, 1e-3), &st).unwrap();
        for _ in 0..5 {
            s.step(&mut st).unwrap();
            assert!(ops.divergence_vector(&st.v).iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn gradient_flow_decreases_energy() {
        for system in [System::Biaxial, System::Uniaxial] {
            let (ops, mut st) = setup(16, system, InitPreset::SmoothDirector, 0.0);
            let mut config = cfg(TimeScheme::Imex, 1e-3);
            config.freeze_velocity = true;
            let mut s = Solver::new(ops.clone(), config, &st).unwrap();
            let mut e = energy_report(&ops, &st).total;
            for _ in 0..20 {
                s.step(&mut st).unwrap();
                let e_new = energy_report(&ops, &st).total;
                assert!(e_new < e, "{system}: {e_new} >= {e}");
                e = e_new;
            }
        }
    }

    #[test]
    fn explicit_step_leaves_manifold_at_second_order() {
        // n = 16 under-resolves this field; its normal truncation error dominates.
        let (ops, st) = setup(32, System::Uniaxial, InitPreset::SmoothDirector, 0.3);
        let drift = |dt: f64| {
            let r = rhs(&ops, &st, false).unwrap();
            max_manifold_distance(&st.q.axpy(dt, &r.dq), &st.material.bulk)
        };
        let ratio = drift(1e-3) / drift(5e-4);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn uniaxial_run_stays_on_manifold() {
        let (ops, mut st) = setup(16, System::Uniaxial, InitPreset::SmoothDirector, 0.3);
        let mut s = Solver::new(ops, cfg(TimeScheme::ExplicitRk2, 1e-3), &st).unwrap();
        for _ in 0..5 {
            let info = s.step(&mut st).unwrap();
            assert!(info.renormalized < 1e-5);
            assert!(max_manifold_distance(&st.q, &st.material.bulk) < 1e-12);
        }
    }

    #[test]
    fn imex_and_heun_agree_to_local_second_order() {
        let gap = |dt: f64| {
            let (ops, st) = setup(16, System::Biaxial, InitPreset::BiaxialPerturbation, 0.5);
            let mut a = st.clone();
            let mut b = st.clone();
            let mut sa = Solver::new(ops.clone(), cfg(TimeScheme::Imex, dt), &st).unwrap();
            let mut sb = Solver::new(ops.clone(), cfg(TimeScheme::ExplicitRk2, dt), &st).unwrap();
            for _ in 0..10 {
                sa.step(&mut a).unwrap();
                sb.step(&mut b).unwrap();
            }
            a.q.max_abs_diff(&b.q).max(a.v.max_abs_diff(&b.v))
        };
        let ratio = gap(2e-3) / gap(1e-3);
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn picard_contracts_for_small_steps() {
        let (ops, mut st) = setup(16, System::Biaxial, InitPreset::BiaxialPerturbation, 0.5);
        let auto = dt_auto(&ops, &st);
        let mut s = Solver::new(ops, cfg(TimeScheme::Picard, auto / 4.0), &st).unwrap();
        let info = s.step(&mut st).unwrap();
        let stats = info.picard.unwrap();
        assert!(stats.converged);
        assert!(stats.ratios.len() >= 4);
        assert!(stats.ratios.iter().take(4).all(|&r| r <= 0.9), "{:?}", stats.ratios);
    }

    #[test]
    fn picard_halves_a_step_that_is_too_large() {
        let (ops, mut st) = setup(16, System::Biaxial, InitPreset::BiaxialPerturbation, 0.5);
        let mut s = Solver::new(ops, cfg(TimeScheme::Picard, 1.0), &st).unwrap();
        match s.step(&mut st) {
            Ok(info) => assert!(info.picard.unwrap().halvings > 0 && info.dt < 1.0),
            Err(e) => assert!(matches!(e, Error::PicardDiverged { .. })),
        }
    }

    #[test]
    fn picard_is_rejected_for_uniaxial_runs() {
        let (ops, st) = setup(8, System::Uniaxial, InitPreset::SmoothDirector, 0.0);
        assert!(matches!(
            Solver::new(ops, cfg(TimeScheme::Picard, 1e-3), &st),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn nan_aborts_with_diagnostics() {
        let (ops, mut st) = setup(8, System::Biaxial, InitPreset::Stationary, 0.0);
        st.q.values_mut()[3] = crate::qtensor::QTensor::from_components([f64::NAN, 0.0, 0.0, 0.0, 0.0]);
        let mut s = Solver::new(ops, cfg(TimeScheme::Imex, 1e-3), &st).unwrap();
        assert!(matches!(s.step(&mut st), Err(Error::NonFinite { step: 1, .. })));
    }

    #[test]
    fn automatic_step_respects_bulk_stiffness() {
        let (ops, st) = setup(16, System::Biaxial, InitPreset::TaylorGreen, 1.0);
        let dt = dt_auto(&ops, &st);
        assert!(dt <= 0.5 * st.material.big_l() / st.material.bulk.a());
        assert!(dt <= 0.25 * ops.grid().spacing());
        assert!(dt > 0.0);
    }
}
