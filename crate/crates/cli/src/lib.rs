//! Command-line front end for the lbsplit solver: configuration files and
//! presets, runs with CSV output, refinement studies and kernel fitting.

pub mod config;
pub mod converge;
pub mod error;
pub mod fit;
pub mod presets;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;
use converge::StudyAxis;
use error::CliError;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "LBSPLIT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "lbsplit", version, about = "Deterministic proton pencil-beam transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Source {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario (see `lbsplit presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Worker threads; overrides the config and the LBSPLIT_WORKERS variable.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Depth,
    Energy,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write idd.csv, spot_<x>.csv, ld.csv, metrics.csv and manifest.json.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Refine depth and/or energy steps and report the observed orders.
    Converge {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "both")]
        axis: AxisArg,
        /// Number of meshes, each halving the previous step.
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit catastrophic kernel parameters from a trajectory CSV.
    FitKernels {
        /// Trajectory file with header group,e_before_mev,e_after_mev,theta_rad.
        trajectories: PathBuf,
        /// Supplies the energy grid.
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "kernels.csv")]
        out: PathBuf,
    },
    /// List the built-in scenarios, or print one as TOML.
    Presets {
        #[arg(long)]
        preset: Option<String>,
    },
}

impl Source {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        match (&self.config, &self.preset) {
            (Some(p), None) => RunConfig::load(p),
            (None, Some(name)) => presets::find(name)
                .map(|p| p.config())
                .ok_or_else(|| CliError::Usage(format!("unknown preset '{name}'"))),
            _ => Err(CliError::Usage("give exactly one of --config or --preset".into())),
        }
    }

    pub fn workers(&self, cfg: &RunConfig) -> Result<usize, CliError> {
        let n = match self.workers {
            Some(n) => n,
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{WORKERS_ENV}={v} is not a worker count")))?,
                Err(_) => cfg.output.workers,
            },
        };
        if n == 0 {
            return Err(CliError::Config("worker count must be at least 1".into()));
        }
        Ok(n)
    }
}

/// Executes a parsed command, printing results to stdout.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { source, out } => {
            let cfg = source.load()?;
            let workers = source.workers(&cfg)?;
            let r = run::execute(&cfg, &out, workers)?;
            let b = r.solution.budget;
            println!("slabs run: {} ({:.1} s)", r.solution.slabs_run, r.elapsed_s);
            match &r.metrics {
                Ok(m) => println!("BP {:.4} cm, P90 {:.4}, D90 {:.4}, D20 {:.4}", m.bp, m.p90, m.d90, m.d20),
                Err(e) => println!("metrics unavailable: {e}"),
            }
            for (x, sy, sz) in &r.spots {
                println!("spot at {x} cm: sigma_y {sy:.4}, sigma_z {sz:.4}");
            }
            println!("energy budget residual {:.3e}", b.relative_residual());
            for w in &r.solution.warnings {
                log::warn!("{w}");
            }
            if let Err(e) = r.metrics {
                return Err(CliError::Numerical(e));
            }
            Ok(())
        }
        Command::Converge { source, axis, levels, out } => {
            let cfg = source.load()?;
            let workers = source.workers(&cfg)?;
            let axes = match axis {
                AxisArg::Depth => vec![StudyAxis::Depth],
                AxisArg::Energy => vec![StudyAxis::Energy],
                AxisArg::Both => vec![StudyAxis::Depth, StudyAxis::Energy],
            };
            if levels < 3 {
                return Err(CliError::Usage(format!("a convergence study needs at least 3 levels, got {levels}")));
            }
            for a in axes {
                let s = converge::study(&cfg, a, levels, workers)?;
                print!("{}", s.report());
                s.write(&out)?;
            }
            Ok(())
        }
        Command::FitKernels { trajectories, source, out } => {
            let cfg = source.load()?;
            cfg.validate()?;
            let r = fit::fit_file(&trajectories, cfg.grid.groups, &out)?;
            for w in &r.warnings {
                log::warn!("{w}");
            }
            println!("{} samples, {} groups, {} warnings; wrote {}", r.samples, cfg.grid.groups, r.warnings.len(), out.display());
            Ok(())
        }
        Command::Presets { preset } => {
            match preset {
                Some(name) => {
                    let p = presets::find(&name).ok_or_else(|| CliError::Usage(format!("unknown preset '{name}'")))?;
                    print!("{}", p.config().to_toml());
                }
                None => {
                    for p in presets::PRESETS {
                        println!("{:<24} {}", p.name, p.summary);
                    }
                }
            }
            Ok(())
        }
    }
}
