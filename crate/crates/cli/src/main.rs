use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use nematic_core::config::{RunConfig, SnapshotFormat};
use nematic_core::experiments::{cmd_export, cmd_simulate, cmd_sweep_l, cmd_verify};
use nematic_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NO_MATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "nematic", version, about = "Q-tensor nematic flow toolkit")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding [output] directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, overriding [init] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the named identity and inequality checks, one JSON line each.
    Verify {
        /// Shell-style glob over check names.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Run to t_end and write the energy ledger and snapshots.
    Simulate,
    /// Compare biaxial runs at each L against one uniaxial reference.
    #[command(name = "sweep-L")]
    SweepL,
    /// Convert a snapshot; CSV output also gets a director file.
    Export {
        /// Snapshot to read (binary or CSV).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Material(_) | Error::Coercivity(_) | Error::Grid(_) => EXIT_CONFIG,
        Error::NoMatch(_) => EXIT_NO_MATCH,
        _ => EXIT_FAILURE,
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg = cfg.with_output_dir(out.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let cfg = load(cli)?;
    match &cli.command {
        Command::Verify { filter } => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            let reports = cmd_verify(&cfg, filter.as_deref(), &mut out)?;
            out.flush()?;
            let failed = reports.iter().filter(|r| !r.passed).count();
            info!("{} checks, {failed} failed", reports.len());
            Ok(if failed == 0 { 0 } else { EXIT_FAILURE })
        }
        Command::Simulate => {
            let s = cmd_simulate(&cfg)?;
            println!(
                "{} steps to t = {:.6e} (dt {:.3e}), max identity residual {:.3e}, ledger {}",
                s.steps,
                s.t,
                s.dt,
                s.max_identity_residual,
                s.ledger.display()
            );
            Ok(0)
        }
        Command::SweepL => {
            let rows = cmd_sweep_l(&cfg)?;
            for r in &rows {
                println!("{}", r.csv_line());
            }
            Ok(if rows.iter().all(|r| r.failure.is_none()) { 0 } else { EXIT_FAILURE })
        }
        Command::Export { input, format } => {
            let format = match format {
                Format::Csv => SnapshotFormat::Csv,
                Format::Binary => SnapshotFormat::Binary,
            };
            for p in cmd_export(input, format, &cfg.output.directory)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
