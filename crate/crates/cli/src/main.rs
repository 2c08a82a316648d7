//! `hjhom`: config-driven runner for effective Hamiltonian experiments.

mod artifacts;
mod config;
mod expr;
mod tasks;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::artifacts::Outputs;
use crate::config::{ConfigError, RawConfig, Settings};
use crate::tasks::{RunError, Task};

#[derive(Parser)]
#[command(name = "hjhom", version, about = "Effective Hamiltonians of random Hamilton-Jacobi equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for the estimators.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Added to every environment seed.
    #[arg(long, global = true, value_name = "K", default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample environments and rasterize their potentials.
    SampleEnv,
    /// Solve the discounted cell problem for one `p` on each environment.
    SolveDelta,
    /// Solve the metric problem for one `p` and level on each environment.
    SolveMetric,
    /// Tabulate the effective Hamiltonian by the chosen route.
    EstimateHbar,
    /// Slopes of the effective metric along the probe directions.
    ProfileMbar,
    /// Compare oscillating solutions with the Hopf-Lax solution of the
    /// effective problem.
    Closure,
    /// Monte Carlo viscous metric.
    FeynmanKac,
    /// Convexity, coercivity, Lipschitz and flat-spot checks of a table.
    PropertySuite,
    /// Exact effective Hamiltonian of a 1-d periodic potential.
    #[command(name = "oracle-1d")]
    Oracle1d,
}

impl From<Command> for Task {
    fn from(c: Command) -> Task {
        match c {
            Command::SampleEnv => Task::SampleEnv,
            Command::SolveDelta => Task::SolveDelta,
            Command::SolveMetric => Task::SolveMetric,
            Command::EstimateHbar => Task::EstimateHbar,
            Command::ProfileMbar => Task::ProfileMbar,
            Command::Closure => Task::Closure,
            Command::FeynmanKac => Task::FeynmanKac,
            Command::PropertySuite => Task::PropertySuite,
            Command::Oracle1d => Task::Oracle1d,
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf, RunError> {
    let task = Task::from(cli.command);
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ConfigError("--config PATH is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| hjhom::Error::io(path, e))?;
    let raw = RawConfig::parse(&text)?;
    let mut settings = Settings::resolve(&raw, &task.keys())?;
    if let Some(dir) = &cli.out {
        settings.set("output.dir", dir.display().to_string());
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("--threads: {e}")))?;
    }
    let dir = PathBuf::from(settings.str("output.dir")?);
    let mut out = Outputs::create(&dir)?;
    task.run(&settings, cli.seed_offset, &mut out)?;
    Ok(out.finish(task.name(), cli.seed_offset, &settings.echo())?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
