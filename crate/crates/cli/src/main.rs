//! `darcylab`: permeability, micro flow, Darcy limit and epsilon sweeps.
//!
//! Every subcommand reads the same TOML configuration (`--config`; the
//! defaults are used without one) and writes its artifacts to `--out` when
//! given. Exit codes: 0 success, 1 invalid configuration or usage, 2 solver
//! failure or a failed property, 3 I/O failure.
//!
//! # Field snapshots
//!
//! A snapshot is a pair `<name>.bin` / `<name>.json`. The `.bin` file holds
//! little-endian `f64` values with no header. Every component block is
//! row-major with `y` as the slow index; a velocity stores its `u` block
//! (`ny` rows of `nx + 1` x-faces) followed by its `v` block (`ny + 1` rows
//! of `nx` y-faces). The sidecar holds `format_version`, `field`, `units`,
//! `dtype` (`f64le`), the `grid` (`nx`, `ny`, `lx`, `ly`, periodicity), the
//! list of `blocks` with `rows`, `cols`, `offset` (in values) and `location`,
//! and the name of the data file.
//!
//! Micro velocities are stored as computed, that is `u_eps` itself and not
//! `eps^-2 u_eps`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "darcylab", version, about = "Numerical homogenization lab for Carreau-Yasuda flow in perforated domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for report artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Permeability tensor of the configured hole.
    Cell {
        #[command(flatten)]
        common: Common,
        /// Doubling grid sizes for a refinement study, e.g. `32,64,128`.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
    },
    /// One micro run.
    Micro {
        #[command(flatten)]
        common: Common,
        /// Period; defaults to the smallest configured epsilon.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Darcy limit on the grid of the smallest configured epsilon.
    Darcy {
        #[command(flatten)]
        common: Common,
    },
    /// Cell problem, Darcy limit and all micro runs, with fits and checks.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Skip the field snapshots.
        #[arg(long)]
        no_fields: bool,
    },
    /// Property suite on small grids.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Cell { common, .. }
            | Command::Micro { common, .. }
            | Command::Darcy { common }
            | Command::Sweep { common, .. }
            | Command::Verify { common } => common,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let common = cli.command.common();
    let level = if common.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("darcylab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
