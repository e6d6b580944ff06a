//! The verify, simulate, sweep and export workflows behind the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SnapshotFormat};
use crate::error::{Error, Result};
use crate::geometry::project_pi;
use crate::grid::GridOps;
use crate::io;
use crate::solver::{
    concentration_diagnostic, energy_report, initial_state, EnergyLedger, SchemeConfig, SimState, Solver, System,
};
use crate::verification::{matching_checks, run_check, CheckReport};

/// Runs the checks selected by `filter` against the configured material and
/// seed, writing one JSON line per check to `out` in registry order.
pub fn cmd_verify(cfg: &RunConfig, filter: Option<&str>, out: &mut impl Write) -> Result<Vec<CheckReport>> {
    let names = matching_checks(filter)?;
    if names.is_empty() {
        return Err(Error::NoMatch(filter.unwrap_or_default().to_string()));
    }
    let seed = cfg.init.seed;
    let reports = names
        .par_iter()
        .map(|name| run_check(name, &cfg.material, seed))
        .collect::<Result<Vec<_>>>()?;
    for r in &reports {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub steps: usize,
    pub t: f64,
    pub dt: f64,
    pub max_identity_residual: f64,
    pub ledger: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

fn snapshot_path(dir: &Path, step: usize, format: SnapshotFormat) -> PathBuf {
    dir.join(format!("snapshot_{step:06}.{}", format.extension()))
}

fn write_snapshot(path: &Path, state: &SimState, format: SnapshotFormat) -> Result<()> {
    match format {
        SnapshotFormat::Csv => fs::write(path, io::state_to_csv(state))?,
        SnapshotFormat::Binary => io::write_checkpoint(path, state)?,
    }
    Ok(())
}

fn solver_dt(ops: &GridOps, cfg: &RunConfig, state: &SimState) -> Result<f64> {
    Ok(Solver::new(ops.clone(), cfg.scheme, state)?.dt())
}

/// The scheme with the largest step not above `dt` that divides `t_end`.
fn fitted(scheme: &SchemeConfig, dt: f64, t_end: f64) -> SchemeConfig {
    let steps = (t_end / dt * (1.0 - 1e-12)).ceil().max(1.0);
    SchemeConfig {
        dt: Some(t_end / steps),
        ..*scheme
    }
}

/// Steps a state to `t_end`. The last step is not shortened; picard halvings
/// can change the step count.
fn advance(
    solver: &mut Solver,
    state: &mut SimState,
    t_end: f64,
    mut observe: impl FnMut(&SimState, &crate::solver::StepInfo) -> Result<()>,
) -> Result<()> {
    let stop = t_end - 1e-9 * t_end.max(1.0);
    while state.t < stop {
        let info = solver.step(state)?;
        observe(state, &info)?;
    }
    Ok(())
}

/// Runs the configured system to `t_end`, writing `ledger.csv`, snapshots and
/// an optional final checkpoint into the output directory. On a solver abort
/// the ledger up to the failing step is still written.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateSummary> {
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let ops = GridOps::new(cfg.grid);
    let mut state = initial_state(cfg.grid, &cfg.material, cfg.system, &cfg.init)?;
    let mut solver = Solver::new(ops.clone(), fitted(&cfg.scheme, solver_dt(&ops, cfg, &state)?, cfg.t_end), &state)?;
    let mut ledger = EnergyLedger::start(&ops, &state, &solver.rates(&state)?);
    let format = cfg.output.format;
    let every = cfg.output.snapshot_every;
    let radius = cfg.sweep.concentration_radius;

    let mut snapshots = Vec::new();
    if every > 0 {
        let p = snapshot_path(dir, 0, format);
        write_snapshot(&p, &state, format)?;
        snapshots.push(p);
    }
    let result = advance(&mut solver, &mut state, cfg.t_end, |s, step| {
        ledger.record(&ops, s, step);
        if every > 0 && s.step % every == 0 {
            let p = snapshot_path(dir, s.step, format);
            write_snapshot(&p, s, format)?;
            info!(
                "step {} t = {:.4e}: concentration {:.4e}",
                s.step,
                s.t,
                concentration_diagnostic(&ops, s, radius)
            );
            snapshots.push(p);
        }
        Ok(())
    });
    let ledger_path = dir.join("ledger.csv");
    io::write_ledger(&ledger_path, &ledger)?;
    result?;
    if every == 0 || state.step % every != 0 {
        let p = snapshot_path(dir, state.step, format);
        write_snapshot(&p, &state, format)?;
        snapshots.push(p);
    }
    if cfg.output.checkpoint {
        io::write_checkpoint(&dir.join("checkpoint.bin"), &state)?;
    }
    Ok(SimulateSummary {
        steps: state.step,
        t: state.t,
        dt: solver.dt(),
        max_identity_residual: ledger.max_residual(),
        ledger: ledger_path,
        snapshots,
    })
}

/// Per-L row of the singular-limit sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub big_l: f64,
    /// `sup_t |∇(Q_L - Q)|_{L²}` against the uniaxial reference.
    pub grad_q_diff: f64,
    /// `sup_t |v_L - v|_{L²}`.
    pub v_diff: f64,
    /// `sup_t |Q_L - π(Q_L)|²_{L²} / L`.
    pub dist_over_l: f64,
    /// `sup_t (1/L) ∫ f_B(Q_L)`.
    pub bulk_over_l: f64,
    /// `max_t` of the concentration diagnostic of the biaxial run.
    pub concentration: f64,
    /// `None` when the member run finished.
    pub failure: Option<String>,
}

pub const SWEEP_HEADER: &str = "L,sup_grad_q_diff,sup_v_diff,sup_dist2_over_L,sup_bulk_over_L,max_concentration,status";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let status = match &self.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
        };
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{status}",
            self.big_l, self.grad_q_diff, self.v_diff, self.dist_over_l, self.bulk_over_l, self.concentration
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// The reference trajectory sampled every `stride` steps.
struct Reference {
    stride: usize,
    samples: Vec<SimState>,
}

/// Largest stable step over the reference and every member, so all runs share
/// one time grid.
fn common_dt(cfg: &RunConfig, ops: &GridOps, start: &SimState) -> Result<f64> {
    if let Some(dt) = cfg.scheme.dt {
        return Ok(dt);
    }
    let mut dt = crate::solver::dt_auto(ops, start);
    for &l in &cfg.sweep.l_values {
        let mut member = start.clone();
        member.material = cfg.material.with_big_l(l)?;
        member.system = System::Biaxial;
        dt = dt.min(crate::solver::dt_auto(ops, &member));
    }
    Ok(dt)
}

/// Runs the uniaxial reference once, then every `L` in parallel from the same
/// initial data, and writes `sweep.csv`. A failing member marks its row.
pub fn cmd_sweep_l(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    if cfg.sweep.l_values.is_empty() {
        return Err(Error::config("L_values", "the sweep needs at least one value"));
    }
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let ops = GridOps::new(cfg.grid);
    let start = initial_state(cfg.grid, &cfg.material, System::Uniaxial, &cfg.init)?;
    let scheme = fitted(&cfg.scheme, common_dt(cfg, &ops, &start)?, cfg.t_end);
    let dt = scheme.dt.expect("fitted step");
    let steps = (cfg.t_end / dt).round() as usize;
    let stride = steps.div_ceil(200).max(1);
    info!("sweep: dt = {dt:.3e}, {steps} steps, sampling every {stride}");

    let mut reference = Reference {
        stride,
        samples: vec![start.clone()],
    };
    let mut state = start.clone();
    let mut solver = Solver::new(ops.clone(), scheme, &state)?;
    solver.run(&mut state, steps, |s, _| {
        if s.step % stride == 0 {
            reference.samples.push(s.clone());
        }
        Ok(())
    })?;

    let member = |l: f64| -> SweepRow {
        let mut row = SweepRow {
            big_l: l,
            grad_q_diff: 0.0,
            v_diff: 0.0,
            dist_over_l: 0.0,
            bulk_over_l: 0.0,
            concentration: 0.0,
            failure: None,
        };
        if let Err(e) = run_member(cfg, &ops, &scheme, &start, &reference, steps, &mut row) {
            warn!("sweep member L = {l:e} failed: {e}");
            row.failure = Some(e.to_string());
        }
        row
    };
    let rows: Vec<SweepRow> = if cfg.sweep.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.sweep.workers)
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?;
        pool.install(|| cfg.sweep.l_values.par_iter().map(|&l| member(l)).collect())
    } else {
        cfg.sweep.l_values.par_iter().map(|&l| member(l)).collect()
    };
    fs::write(dir.join("sweep.csv"), sweep_csv(&rows))?;
    Ok(rows)
}

fn run_member(
    cfg: &RunConfig,
    ops: &GridOps,
    scheme: &SchemeConfig,
    start: &SimState,
    reference: &Reference,
    steps: usize,
    row: &mut SweepRow,
) -> Result<()> {
    let l = row.big_l;
    let mut state = start.clone();
    state.material = cfg.material.with_big_l(l)?;
    state.system = System::Biaxial;
    let radius = cfg.sweep.concentration_radius;
    let compare = |s: &SimState, row: &mut SweepRow| {
        let r = &reference.samples[s.step / reference.stride];
        let dq = s.q.axpy(-1.0, &r.q);
        let dv = s.v.axpy(-1.0, &r.v);
        let dist2: Vec<f64> = s
            .q
            .values()
            .iter()
            .map(|q| project_pi(q, &s.material.bulk).distance.powi(2))
            .collect();
        row.grad_q_diff = row.grad_q_diff.max(ops.seminorm_h1(&dq));
        row.v_diff = row.v_diff.max(ops.norm_l2(&dv));
        row.dist_over_l = row.dist_over_l.max(ops.integrate(&dist2) / l);
        row.bulk_over_l = row.bulk_over_l.max(energy_report(ops, s).bulk_over_l);
        row.concentration = row.concentration.max(concentration_diagnostic(ops, s, radius));
    };
    compare(&state, row);
    let mut solver = Solver::new(ops.clone(), *scheme, &state)?;
    solver.run(&mut state, steps, |s, _| {
        if s.step % reference.stride == 0 {
            compare(s, row);
        }
        Ok(())
    })
}

/// Reads a snapshot in either format; binary files are recognized by their magic.
pub fn read_snapshot(path: &Path) -> Result<SimState> {
    let bytes = fs::read(path).map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(io::MAGIC) {
        io::decode_state(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Snapshot("neither binary nor UTF-8 text".into()))?;
        io::state_from_csv(&text)
    }
}

/// Converts a snapshot into `format` inside `out_dir`. The CSV export also
/// writes `<stem>_director.csv`. Returns the written paths.
pub fn cmd_export(snapshot: &Path, format: SnapshotFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let state = read_snapshot(snapshot)?;
    fs::create_dir_all(out_dir)?;
    let stem = snapshot
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snapshot".into());
    let main = out_dir.join(format!("{stem}.{}", format.extension()));
    if main == snapshot {
        return Err(Error::Snapshot(format!("refusing to overwrite {}", snapshot.display())));
    }
    write_snapshot(&main, &state, format)?;
    let mut written = vec![main];
    if format == SnapshotFormat::Csv {
        let p = out_dir.join(format!("{stem}_director.csv"));
        fs::write(&p, io::director_csv(&state))?;
        written.push(p);
    }
    Ok(written)
}
