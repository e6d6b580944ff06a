//! Time integration of the biaxial and uniaxial Beris-Edwards systems
//! (with `ξ = 0`, `Γ = ν = 1`) and the energy ledger.

mod init;
mod ledger;
mod rhs;
mod step;

pub use init::{initial_state, taylor_green, InitPreset, InitSpec};
pub use ledger::{concentration_diagnostic, energy_report, EnergyLedger, LedgerRow, LEDGER_HEADER};
pub use rhs::{rhs, rhs_biaxial, rhs_uniaxial, Rates};
pub use step::{PicardStats, Solver, StepInfo};
pub(crate) use step::dt_auto;

use serde::Serialize;
use std::fmt;
use std::str::FromStr;

use crate::energy::Material;
use crate::error::{Error, Result};
use crate::grid::{TensorField, VectorField};

/// Which system a state evolves under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// Q in S0 with the bulk penalty `g_B / L`.
    Biaxial,
    /// Q on the uniaxial manifold with the constrained molecular field.
    Uniaxial,
}

impl System {
    pub fn as_str(&self) -> &'static str {
        match self {
            System::Biaxial => "biaxial",
            System::Uniaxial => "uniaxial",
        }
    }

    pub(crate) fn code(&self) -> u32 {
        match self {
            System::Biaxial => 0,
            System::Uniaxial => 1,
        }
    }

    pub(crate) fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(System::Biaxial),
            1 => Some(System::Uniaxial),
            _ => None,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "biaxial" => Ok(System::Biaxial),
            "uniaxial" => Ok(System::Uniaxial),
            other => Err(format!("unknown system `{other}` (expected biaxial or uniaxial)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// First-order implicit-explicit: `L̃₁ΔQ` and `Δv` implicit.
    Imex,
    /// Heun's method.
    ExplicitRk2,
    /// Backward Euler solved by the linearized fixed-point iteration.
    Picard,
}

impl TimeScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            TimeScheme::Imex => "imex",
            TimeScheme::ExplicitRk2 => "explicit-rk2",
            TimeScheme::Picard => "picard",
        }
    }
}

impl FromStr for TimeScheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "imex" => Ok(TimeScheme::Imex),
            "explicit-rk2" | "rk2" | "heun" => Ok(TimeScheme::ExplicitRk2),
            "picard" => Ok(TimeScheme::Picard),
            other => Err(format!("unknown time scheme `{other}` (expected imex, explicit-rk2 or picard)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchemeConfig {
    /// Fixed step, or `None` for the automatic rule.
    pub dt: Option<f64>,
    pub scheme: TimeScheme,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    /// Uniaxial mode: project Q back onto the manifold every this many steps.
    pub renormalize_every: usize,
    /// Keep `v` fixed (pure gradient flow when it is zero).
    pub freeze_velocity: bool,
    /// 2/3-rule truncation of the assembled rates (spectral grids only).
    pub dealias: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            dt: None,
            scheme: TimeScheme::Imex,
            picard_tol: 1e-10,
            picard_max_iters: 50,
            renormalize_every: 1,
            freeze_velocity: false,
            dealias: true,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("dt", format!("must be positive, got {dt}")));
            }
        }
        if self.picard_tol.is_nan() || self.picard_tol <= 0.0 {
            return Err(Error::config("picard_tol", "must be positive"));
        }
        if self.picard_max_iters == 0 {
            return Err(Error::config("picard_max_iters", "must be at least 1"));
        }
        if self.renormalize_every == 0 {
            return Err(Error::config("renormalize_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// Fields, time and system of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: usize,
    pub q: TensorField,
    pub v: VectorField,
    pub system: System,
    pub material: Material,
}

impl SimState {
    pub fn new(q: TensorField, v: VectorField, system: System, material: Material) -> Result<Self> {
        if q.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(SimState {
            t: 0.0,
            step: 0,
            q,
            v,
            system,
            material,
        })
    }

    pub fn grid(&self) -> &crate::grid::Grid {
        self.q.grid()
    }
}
