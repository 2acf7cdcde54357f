//! `tb`: segment tables, energy landscapes, force-deflection sweeps and
//! buckling modes for chains of dual-triangle tensegrity segments.

mod commands;
mod failure;
mod output;
mod spec;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn, LevelFilter};

use commands::{LandscapeArgs, SegmentArgs, SweepArgs};
use failure::{Failure, EXIT_PARTIAL};
use output::Format;
use spec::FieldOverrides;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "TB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tb", version, about = "Stiffness, equilibrium and buckling analysis of tensegrity manipulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Torque, stiffness and energy of one segment over a range of joint angles
    Segment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SegmentArgs,
    },
    /// Energy over a grid of two joint angles of a four-segment chain, with its critical points
    Landscape {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: LandscapeArgs,
    },
    /// Minimal-energy stable equilibrium and tip force along an axial deflection path
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Critical force and buckling modes of the straight chain
    Buckling {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Model description (JSON); `-` reads standard input
    #[arg(long)]
    model: Option<PathBuf>,
    /// Directory receiving `<command>.json` and the requested artifact
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact written to stdout or the output directory
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Number of segments
    #[arg(long)]
    n: Option<usize>,
    /// Half-height of the segment triangles
    #[arg(long)]
    a: Option<f64>,
    /// Half-length of a segment
    #[arg(long)]
    b: Option<f64>,
    /// Spring stiffness
    #[arg(long)]
    k: Option<f64>,
    /// Spring rest length
    #[arg(long = "l0")]
    l0: Option<f64>,
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Common {
    fn overrides(&self) -> FieldOverrides {
        FieldOverrides { n: self.n, a: self.a, b: self.b, k: self.k, l0: self.l0 }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::spec(format!("{THREADS_VAR}: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::spec(format!("{THREADS_VAR}: {e}")))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let common = match &cli.command {
        Command::Segment { common, .. }
        | Command::Landscape { common, .. }
        | Command::Sweep { common, .. }
        | Command::Buckling { common } => common,
    };
    let level = match common.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    configure_threads()?;

    let spec = spec::load(common.model.as_deref(), &common.overrides())?;
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Segment { args, .. } => commands::segment(&spec, args)?,
        Command::Landscape { args, .. } => commands::landscape(&spec, args)?,
        Command::Sweep { args, .. } => commands::sweep(&spec, args)?,
        Command::Buckling { .. } => commands::buckling(&spec)?,
    };
    let report = outcome.report(&spec, start.elapsed().as_secs_f64());
    for path in output::emit(&outcome, &report, common.format, common.out.as_deref())? {
        info!("wrote {}", path.display());
    }
    if outcome.failures > 0 {
        warn!("{} of the {} rows failed", outcome.failures, outcome.table.rows.len());
        return Ok(EXIT_PARTIAL);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("tb: {f}");
            ExitCode::from(f.code)
        }
    }
}
