//! Run configuration, read from a sectioned TOML file.
//!
//! ```toml
//! [material]            # a, b, c, L1, L2, L3, L4, L
//! [grid]                # dim, n, length, scheme = "spectral" | "central2"
//! [time]                # t_end, dt = "auto" | number, scheme, system, picard_tol,
//!                       # picard_max_iters, renormalize_every, freeze_velocity, dealias
//! [init]                # preset, seed, amplitude, velocity, wavenumber, modes, path
//! [output]              # directory, snapshot_every, format = "csv" | "binary", checkpoint
//! [sweep]               # L_values, workers, concentration_radius
//! ```
//!
//! Every section and key is optional; missing values take the defaults of
//! [`RunConfig::default`]. Unknown keys are rejected. All values are checked
//! before any computation starts, and errors name the offending key.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::energy::Material;
use crate::error::{Error, Result};
use crate::grid::{Grid, Scheme};
use crate::solver::{InitPreset, InitSpec, SchemeConfig, System, TimeScheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Binary,
}

impl SnapshotFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            SnapshotFormat::Csv => "csv",
            SnapshotFormat::Binary => "qtlc",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write a snapshot every this many steps (0: only the final state).
    pub snapshot_every: usize,
    pub format: SnapshotFormat,
    /// Also write a binary checkpoint of the final state.
    pub checkpoint: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub l_values: Vec<f64>,
    /// Parallel member runs (0: one per available core).
    pub workers: usize,
    /// Ball radius of the logged concentration diagnostic.
    pub concentration_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub material: Material,
    pub grid: Grid,
    pub t_end: f64,
    pub system: System,
    pub scheme: SchemeConfig,
    pub init: InitSpec,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            material: Material::default_material(),
            grid: Grid::square(32, Scheme::Spectral).expect("valid default grid"),
            t_end: 0.1,
            system: System::Biaxial,
            scheme: SchemeConfig::default(),
            init: InitSpec::default(),
            output: OutputConfig {
                directory: PathBuf::from("out"),
                snapshot_every: 0,
                format: SnapshotFormat::Csv,
                checkpoint: false,
            },
            sweep: SweepConfig {
                l_values: vec![1e-1, 1e-2, 1e-3],
                workers: 0,
                concentration_radius: 0.5,
            },
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    material: RawMaterial,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    init: RawInit,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    #[serde(rename = "L1")]
    l1: Option<f64>,
    #[serde(rename = "L2")]
    l2: Option<f64>,
    #[serde(rename = "L3")]
    l3: Option<f64>,
    #[serde(rename = "L4")]
    l4: Option<f64>,
    #[serde(rename = "L")]
    big_l: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: Option<i64>,
    n: Option<i64>,
    length: Option<f64>,
    scheme: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDt {
    Number(f64),
    Word(String),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_end: Option<f64>,
    dt: Option<RawDt>,
    scheme: Option<String>,
    system: Option<String>,
    picard_tol: Option<f64>,
    picard_max_iters: Option<i64>,
    renormalize_every: Option<i64>,
    freeze_velocity: Option<bool>,
    dealias: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInit {
    preset: Option<String>,
    seed: Option<i64>,
    amplitude: Option<f64>,
    velocity: Option<f64>,
    wavenumber: Option<i64>,
    modes: Option<i64>,
    path: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    snapshot_every: Option<i64>,
    format: Option<String>,
    checkpoint: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(rename = "L_values")]
    l_values: Option<Vec<f64>>,
    workers: Option<i64>,
    concentration_radius: Option<f64>,
}

fn non_negative(key: &str, v: i64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::config(key, format!("must be non-negative, got {v}")))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            // serde reports unknown keys as "unknown field `x`"
            let key = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<file>".to_string());
            Error::config(key, msg)
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_raw(raw: RawFile) -> Result<Self> {
        let d = RunConfig::default();

        let m = raw.material;
        let dm = &d.material;
        let material = Material::new(
            m.a.unwrap_or(dm.bulk.a()),
            m.b.unwrap_or(dm.bulk.b()),
            m.c.unwrap_or(dm.bulk.c()),
            m.l1.unwrap_or(dm.elastic.l1()),
            m.l2.unwrap_or(dm.elastic.l2()),
            m.l3.unwrap_or(dm.elastic.l3()),
            m.l4.unwrap_or(dm.elastic.l4()),
            m.big_l.unwrap_or(dm.big_l()),
        )?;

        let g = raw.grid;
        let dim = non_negative("dim", g.dim.unwrap_or(2))?;
        let n = non_negative("n", g.n.unwrap_or(d.grid.n() as i64))?;
        let length = positive("length", g.length.unwrap_or(d.grid.length()))?;
        let scheme: Scheme = match g.scheme {
            Some(s) => s.parse().map_err(|e| Error::config("grid.scheme", e))?,
            None => Scheme::Spectral,
        };
        let grid = Grid::new(dim, n, length, scheme).map_err(|e| Error::config("grid", e.to_string()))?;

        let t = raw.time;
        let t_end = positive("t_end", t.t_end.unwrap_or(d.t_end))?;
        let dt = match t.dt {
            None => None,
            Some(RawDt::Word(w)) if w == "auto" => None,
            Some(RawDt::Word(w)) => return Err(Error::config("dt", format!("expected a number or \"auto\", got `{w}`"))),
            Some(RawDt::Number(x)) => Some(positive("dt", x)?),
        };
        let time_scheme: TimeScheme = match t.scheme {
            Some(s) => s.parse().map_err(|e| Error::config("time.scheme", e))?,
            None => TimeScheme::Imex,
        };
        let system: System = match t.system {
            Some(s) => s.parse().map_err(|e| Error::config("system", e))?,
            None => System::Biaxial,
        };
        let ds = SchemeConfig::default();
        let scheme_cfg = SchemeConfig {
            dt,
            scheme: time_scheme,
            picard_tol: positive("picard_tol", t.picard_tol.unwrap_or(ds.picard_tol))?,
            picard_max_iters: non_negative("picard_max_iters", t.picard_max_iters.unwrap_or(ds.picard_max_iters as i64))?,
            renormalize_every: non_negative(
                "renormalize_every",
                t.renormalize_every.unwrap_or(ds.renormalize_every as i64),
            )?,
            freeze_velocity: t.freeze_velocity.unwrap_or(ds.freeze_velocity),
            dealias: t.dealias.unwrap_or(ds.dealias),
        };
        scheme_cfg.validate()?;
        if time_scheme == TimeScheme::Picard && system == System::Uniaxial {
            return Err(Error::config("time.scheme", "picard is only available for the biaxial system"));
        }

        let i = raw.init;
        let preset: InitPreset = match i.preset {
            Some(p) => p.parse().map_err(|e| Error::config("preset", e))?,
            None => InitPreset::Stationary,
        };
        let di = InitSpec::default();
        let init = InitSpec {
            preset,
            seed: non_negative("seed", i.seed.unwrap_or(0))? as u64,
            amplitude: {
                let a = i.amplitude.unwrap_or(di.amplitude);
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(Error::config("amplitude", format!("must be non-negative, got {a}")));
                }
                a
            },
            velocity: {
                let v = i.velocity.unwrap_or(di.velocity);
                if !v.is_finite() {
                    return Err(Error::config("velocity", "must be finite"));
                }
                v
            },
            wavenumber: {
                let k = non_negative("wavenumber", i.wavenumber.unwrap_or(di.wavenumber as i64))?;
                u32::try_from(k).map_err(|_| Error::config("wavenumber", "too large"))?
            },
            modes: non_negative("modes", i.modes.unwrap_or(di.modes as i64))?,
            path: i.path,
        };
        if preset == InitPreset::Checkpoint && init.path.is_none() {
            return Err(Error::config("path", "the checkpoint preset needs a path"));
        }
        if preset == InitPreset::BiaxialPerturbation && system == System::Uniaxial {
            return Err(Error::config("preset", "biaxial_perturbation is off the uniaxial manifold"));
        }

        let o = raw.output;
        let format = match o.format.as_deref() {
            None | Some("csv") => SnapshotFormat::Csv,
            Some("binary") => SnapshotFormat::Binary,
            Some(other) => return Err(Error::config("format", format!("expected csv or binary, got `{other}`"))),
        };
        let output = OutputConfig {
            directory: o.directory.unwrap_or(d.output.directory),
            snapshot_every: non_negative("snapshot_every", o.snapshot_every.unwrap_or(0))?,
            format,
            checkpoint: o.checkpoint.unwrap_or(false),
        };

        let s = raw.sweep;
        let l_values = s.l_values.unwrap_or(d.sweep.l_values);
        if l_values.is_empty() {
            return Err(Error::config("L_values", "must not be empty"));
        }
        for &l in &l_values {
            positive("L_values", l)?;
        }
        let sweep = SweepConfig {
            l_values,
            workers: non_negative("workers", s.workers.unwrap_or(0))?,
            concentration_radius: positive(
                "concentration_radius",
                s.concentration_radius.unwrap_or(d.sweep.concentration_radius),
            )?,
        };

        Ok(RunConfig {
            material,
            grid,
            t_end,
            system,
            scheme: scheme_cfg,
            init,
            output,
            sweep,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        self.output.directory = dir;
        self
    }
}
