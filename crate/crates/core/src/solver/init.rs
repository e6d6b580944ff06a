use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{SimState, System};
use crate::energy::Material;
use crate::error::{Error, Result};
use crate::geometry::{project_pi, uniaxial_field};
use crate::grid::{Grid, TensorField, VectorField};
use crate::qtensor::{symmetrize_traceless, QTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPreset {
    /// `Q ≡ Q⁺`, `v ≡ 0`.
    Stationary,
    /// `Q ≡ Q⁺` with a Taylor-Green velocity.
    TaylorGreen,
    /// `u = (cos k x₁, sin k x₁, 0)` lifted to the manifold.
    DirectorWinding,
    /// Random smooth director field near `e₃`, lifted to the manifold.
    SmoothDirector,
    /// `Q⁺` plus a random smooth traceless perturbation kept inside `S_δ`.
    BiaxialPerturbation,
    /// A saved checkpoint.
    Checkpoint,
}

impl InitPreset {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitPreset::Stationary => "stationary",
            InitPreset::TaylorGreen => "taylor_green",
            InitPreset::DirectorWinding => "director_winding",
            InitPreset::SmoothDirector => "smooth_director",
            InitPreset::BiaxialPerturbation => "biaxial_perturbation",
            InitPreset::Checkpoint => "checkpoint",
        }
    }
}

impl fmt::Display for InitPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitPreset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "stationary" => InitPreset::Stationary,
            "taylor_green" => InitPreset::TaylorGreen,
            "director_winding" => InitPreset::DirectorWinding,
            "smooth_director" => InitPreset::SmoothDirector,
            "biaxial_perturbation" => InitPreset::BiaxialPerturbation,
            "checkpoint" => InitPreset::Checkpoint,
            other => {
                return Err(format!(
                    "unknown preset `{other}` (expected stationary, taylor_green, director_winding, \
                     smooth_director, biaxial_perturbation or checkpoint)"
                ))
            }
        })
    }
}

/// Initial-data recipe. `velocity` scales a Taylor-Green field added to
/// every preset except `stationary` and `checkpoint`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitSpec {
    pub preset: InitPreset,
    pub seed: u64,
    /// Perturbation size (director tilt or tensor perturbation).
    pub amplitude: f64,
    pub velocity: f64,
    /// Integer wavenumber of the winding and of the Taylor-Green cells.
    pub wavenumber: u32,
    /// Number of random Fourier modes in the random presets.
    pub modes: usize,
    pub path: Option<PathBuf>,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            preset: InitPreset::Stationary,
            seed: 0,
            amplitude: 0.1,
            velocity: 0.0,
            wavenumber: 1,
            modes: 4,
            path: None,
        }
    }
}

impl InitSpec {
    pub fn new(preset: InitPreset) -> Self {
        InitSpec {
            preset,
            ..Default::default()
        }
    }
}

/// Builds the initial state. Uniaxial runs need a preset on the manifold.
pub fn initial_state(grid: Grid, material: &Material, system: System, spec: &InitSpec) -> Result<SimState> {
    if spec.preset == InitPreset::Checkpoint {
        let path = spec
            .path
            .as_ref()
            .ok_or_else(|| Error::config("init.path", "the checkpoint preset needs a path"))?;
        let state = crate::io::read_checkpoint(path)?;
        if *state.grid() != grid {
            return Err(Error::GridMismatch);
        }
        return Ok(state);
    }
    if system == System::Uniaxial && spec.preset == InitPreset::BiaxialPerturbation {
        return Err(Error::config(
            "init.preset",
            "biaxial_perturbation is off the uniaxial manifold; use a director preset",
        ));
    }
    let s = material.s_plus();
    let k = spec.wavenumber as f64 * 2.0 * std::f64::consts::PI / grid.length();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let q = match spec.preset {
        InitPreset::Stationary | InitPreset::TaylorGreen => TensorField::constant(grid, material.bulk.q_plus()),
        InitPreset::DirectorWinding => uniaxial_field(grid, s, |x| Vector3::new((k * x[0]).cos(), (k * x[0]).sin(), 0.0)),
        InitPreset::SmoothDirector => {
            let modes = random_modes(&mut rng, &grid, spec.modes, 3);
            let amp = spec.amplitude;
            uniaxial_field(grid, s, |x| {
                let w = eval_modes(&modes, x, grid.length());
                Vector3::new(amp * w[0], amp * w[1], 1.0 + amp * w[2])
            })
        }
        InitPreset::BiaxialPerturbation => {
            let modes = random_modes(&mut rng, &grid, spec.modes, 9);
            let qp = material.bulk.q_plus();
            let amp = spec.amplitude;
            let dq = TensorField::from_fn(grid, |x| {
                let w = eval_modes(&modes, x, grid.length());
                symmetrize_traceless(&Matrix3::from_fn(|i, j| w[3 * i + j])) * amp
            });
            let scale = fit_in_s_delta(qp, &dq, material);
            // Rebuilt from five entries so the trace is exactly zero.
            dq.map(|d| QTensor::from_components((qp + *d * scale).components()))
        }
        InitPreset::Checkpoint => unreachable!("handled above"),
    };
    let v = if spec.preset == InitPreset::Stationary {
        VectorField::zeros(grid)
    } else {
        taylor_green(grid, spec.velocity, k)
    };
    SimState::new(q, v, system, *material)
}

/// `U (sin kx cos ky, -cos kx sin ky, 0)`; divergence-free.
pub fn taylor_green(grid: Grid, amplitude: f64, k: f64) -> VectorField {
    VectorField::from_fn(grid, |x| {
        Vector3::new(
            amplitude * (k * x[0]).sin() * (k * x[1]).cos(),
            -amplitude * (k * x[0]).cos() * (k * x[1]).sin(),
            0.0,
        )
    })
}

/// One global factor that puts `qp + scale * dq` inside `S_δ` everywhere.
/// A single factor keeps the field smooth; clipping pointwise would not.
fn fit_in_s_delta(qp: QTensor, dq: &TensorField, material: &Material) -> f64 {
    let delta = material.bulk.delta();
    let inside = |scale: f64| {
        dq.values().iter().all(|d| {
            let p = project_pi(&(qp + *d * scale), &material.bulk);
            p.in_s_delta && p.distance < 0.9 * delta
        })
    };
    let mut scale = 1.0;
    for _ in 0..200 {
        if inside(scale) {
            return scale;
        }
        scale *= 0.8;
    }
    0.0
}

struct Mode {
    wave: [f64; 3],
    phase: f64,
    amp: Vec<f64>,
}

/// Random low modes with integer wavevectors in `[-2, 2]`, decaying amplitudes.
fn random_modes(rng: &mut ChaCha8Rng, grid: &Grid, count: usize, width: usize) -> Vec<Mode> {
    (0..count)
        .map(|_| {
            let mut wave = [0.0; 3];
            loop {
                for w in wave.iter_mut().take(grid.dim()) {
                    *w = rng.gen_range(-2i32..=2) as f64;
                }
                if wave.iter().any(|&w| w != 0.0) {
                    break;
                }
            }
            let decay = 1.0 / (wave.iter().map(|w| w * w).sum::<f64>());
            Mode {
                wave,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                amp: (0..width).map(|_| decay * rng.gen_range(-1.0..1.0)).collect(),
            }
        })
        .collect()
}

fn eval_modes(modes: &[Mode], x: [f64; 3], length: f64) -> Vec<f64> {
    let width = modes.first().map_or(0, |m| m.amp.len());
    let mut out = vec![0.0; width];
    let scale = std::f64::consts::TAU / length;
    for m in modes {
        let arg = scale * (m.wave[0] * x[0] + m.wave[1] * x[1] + m.wave[2] * x[2]) + m.phase;
        let c = arg.cos();
        for (o, a) in out.iter_mut().zip(&m.amp) {
            *o += a * c;
        }
    }
    out
}
