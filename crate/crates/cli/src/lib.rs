//! Command-line driver for the discovery experiments.

pub mod config;
pub mod heatmap;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use smc_core::clustering::ClusteringError;
use smc_core::experiments::ExperimentError;
use smc_core::transitions::TransitionError;

pub use config::{parse_config, ConfigError, Experiment, Overrides, RunConfig};
pub use run::RecomputeMismatch;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "smc-lab",
    version,
    about = "Sensorimotor contingency discovery experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover the hidden states of the wall world.
    Envdisc(RunArgs),
    /// Discover rigid objects in the grid world.
    Objects(RunArgs),
    /// Discover the correspondence between retina fields.
    Retina {
        #[command(flatten)]
        run: RunArgs,
        /// Render every pixel as an independent coin flip.
        #[arg(long)]
        noise: bool,
    },
    /// Partition a user-supplied square matrix.
    Cluster {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = config::DEFAULT_OUT)]
        out: PathBuf,
        #[arg(long, default_value_t = config::DEFAULT_MAX_CELLS)]
        max_cells: usize,
    },
    /// Inspect a run directory.
    Report {
        /// Recompute every metric from the saved matrices and compare.
        #[arg(long, value_name = "DIR")]
        recompute: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Also write files holding hidden labels.
    #[arg(long)]
    pub emit_truth: bool,
    /// Also write the exploration log.
    #[arg(long)]
    pub emit_log: bool,
    /// Crop heatmaps to this many rows and columns.
    #[arg(long, value_name = "INT")]
    pub max_cells: Option<usize>,
    /// Overrides the experiment's step count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Sets a key of the experiment table, e.g. `wall.p_env=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self, noise: bool) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            jobs: self.jobs,
            emit_truth: self.emit_truth,
            emit_log: self.emit_log,
            max_cells: self.max_cells,
            steps: self.steps,
            noise,
            set: self.set.clone(),
        }
    }

    /// Reads the config file, if any, and resolves it against the flags.
    pub fn resolve(&self, experiment: Experiment, noise: bool) -> anyhow::Result<RunConfig> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
            None => String::new(),
        };
        Ok(parse_config(experiment, &text, &self.overrides(noise))?)
    }
}

/// Exit code for an error: 2 for configuration problems, 3 for numerical or
/// data failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            };
        }
        if let Some(e) = cause.downcast_ref::<ClusteringError>() {
            return match e {
                ClusteringError::Validation(_) | ClusteringError::DimensionMismatch { .. } => {
                    EXIT_CONFIG
                }
                _ => EXIT_NUMERICAL,
            };
        }
        if cause.is::<TransitionError>() {
            return EXIT_CONFIG;
        }
    }
    EXIT_FAILURE
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let started = Instant::now();
    let (experiment, args, noise) = match &cli.command {
        Command::Envdisc(a) => (Experiment::Envdisc, a, false),
        Command::Objects(a) => (Experiment::Objects, a, false),
        Command::Retina { run, noise } => (Experiment::Retina, run, *noise),
        Command::Cluster {
            matrix,
            k,
            seed,
            out,
            max_cells,
        } => {
            let dir = run::cluster(matrix, *k, *seed, out, *max_cells)?;
            println!("wrote {}", dir.display());
            return Ok(());
        }
        Command::Report { recompute } => {
            run::recompute(recompute)?;
            println!("{}: all metrics reproduced", recompute.display());
            return Ok(());
        }
    };
    let cfg = args.resolve(experiment, noise)?;
    print!("{}", cfg.to_toml());
    let dir = run::run(&cfg)?;
    println!("wrote {}", dir.display());
    eprintln!("elapsed {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
