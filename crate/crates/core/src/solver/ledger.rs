use serde::Serialize;

use super::rhs::Rates;
use super::step::StepInfo;
use super::{SimState, System};
use crate::energy::{energy_breakdown, EnergyBreakdown};
use crate::grid::GridOps;

/// Column order of the ledger CSV.
pub const LEDGER_HEADER: &str =
    "t,E_elastic,E_bulk_over_L,E_kinetic,E_total,dissipation_H,dissipation_gradv,identity_residual";

/// One ledger line. The dissipation columns hold the integrals of the
/// rates that produced this row (for row 0, the rates at the initial state).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub e_elastic: f64,
    pub e_bulk_over_l: f64,
    pub e_kinetic: f64,
    pub e_total: f64,
    pub dissipation_h: f64,
    pub dissipation_gradv: f64,
    /// `|(E_{n+1} - E_n)/dt + D_n|`; zero on the first row.
    pub identity_residual: f64,
}

impl LedgerRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.e_elastic,
            self.e_bulk_over_l,
            self.e_kinetic,
            self.e_total,
            self.dissipation_h,
            self.dissipation_gradv,
            self.identity_residual
        )
    }
}

/// Energy of a state: the bulk part only counts for the biaxial system.
pub fn energy_report(ops: &GridOps, state: &SimState) -> EnergyBreakdown {
    energy_breakdown(ops, &state.q, &state.v, &state.material, state.system == System::Biaxial)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    /// Starts a ledger at the initial state.
    pub fn start(ops: &GridOps, state: &SimState, rates: &Rates) -> Self {
        let e = energy_report(ops, state);
        EnergyLedger {
            rows: vec![row(state.t, &e, rates.dissipation_h, rates.dissipation_gradv, 0.0)],
        }
    }

    /// Appends the row for `state` reached by the step described in `info`.
    pub fn record(&mut self, ops: &GridOps, state: &SimState, info: &StepInfo) -> LedgerRow {
        let e = energy_report(ops, state);
        let prev = self.rows.last().map_or(e.total, |r| r.e_total);
        let d = info.dissipation_h + info.dissipation_gradv;
        let residual = ((e.total - prev) / info.dt + d).abs();
        let r = row(state.t, &e, info.dissipation_h, info.dissipation_gradv, residual);
        self.rows.push(r);
        r
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    /// Largest identity residual over the run.
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.identity_residual).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(100 * (self.rows.len() + 1));
        s.push_str(LEDGER_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_line());
            s.push('\n');
        }
        s
    }
}

fn row(t: f64, e: &EnergyBreakdown, dh: f64, dg: f64, residual: f64) -> LedgerRow {
    LedgerRow {
        t,
        e_elastic: e.elastic,
        e_bulk_over_l: e.bulk_over_l,
        e_kinetic: e.kinetic,
        e_total: e.total,
        dissipation_h: dh,
        dissipation_gradv: dg,
        identity_residual: residual,
    }
}

/// `max_x ∫_{B_R(x)} |∇Q|³ + |v|³`, computed as a periodic convolution with
/// the indicator of the ball. Logged as a diagnostic only.
pub fn concentration_diagnostic(ops: &GridOps, state: &SimState, radius: f64) -> f64 {
    let grid = *ops.grid();
    let grad = ops.gradient_tensor(&state.q);
    let density: Vec<f64> = grad
        .norm_squared()
        .iter()
        .zip(state.v.values())
        .map(|(g2, v)| g2.powf(1.5) + v.norm().powi(3))
        .collect();
    // Ball centred at the origin, using the minimum-image distance.
    let len = grid.length();
    let ball: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.coords(i);
            let r2: f64 = x
                .iter()
                .take(grid.dim())
                .map(|&c| {
                    let d = if c > 0.5 * len { c - len } else { c };
                    d * d
                })
                .sum();
            if r2 <= radius * radius {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let fd = ops.forward(&density);
    let fb = ops.forward(&ball);
    let prod = fd.iter().zip(&fb).map(|(a, b)| a * b).collect();
    let conv = ops.inverse(prod);
    conv.into_iter().fold(f64::NEG_INFINITY, f64::max) * grid.cell_volume()
}
