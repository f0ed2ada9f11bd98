//! The `run` subcommand: solve, then write the tallies and a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lbsplit::tally::{depth_metrics, write_idd, write_longitudinal, write_metrics, write_spot, DepthMetrics};
use lbsplit::{solve_with_workers, Solution};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct RunReport {
    pub solution: Solution,
    pub metrics: Result<DepthMetrics, String>,
    /// (depth, σ_y, σ_z) for each configured spot depth.
    pub spots: Vec<(f64, f64, f64)>,
    pub files: Vec<PathBuf>,
    pub elapsed_s: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_sha256: String,
    config: &'a str,
    versions: Versions,
    workers: usize,
    elapsed_s: f64,
    slabs_run: usize,
    terminated_early: bool,
    budget: Budget,
    metrics: Option<MetricsOut>,
    metrics_error: Option<&'a str>,
    spots: Vec<SpotOut>,
    warnings: &'a [String],
    files: Vec<String>,
}

#[derive(Serialize)]
struct Versions {
    lbsplit: &'static str,
    lbsplit_cli: &'static str,
}

#[derive(Serialize)]
struct Budget {
    injected_mev: f64,
    deposited_mev: f64,
    lateral_escape_mev: f64,
    angular_escape_mev: f64,
    in_flight_mev: f64,
    relative_residual: f64,
}

#[derive(Serialize)]
struct MetricsOut {
    bp_cm: f64,
    p90_cm: f64,
    d90_cm: f64,
    d20_cm: f64,
}

#[derive(Serialize)]
struct SpotOut {
    depth_cm: f64,
    sigma_y_cm: f64,
    sigma_z_cm: f64,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Solves `cfg` on `workers` threads without writing anything.
pub fn solve_config(cfg: &RunConfig, workers: usize) -> Result<Solution, CliError> {
    let problem = cfg.problem()?;
    Ok(solve_with_workers(&problem, &cfg.solver_config(), workers, None)?)
}

/// File name of the spot slice at depth `x`.
pub fn spot_file_name(x: f64) -> String {
    format!("spot_{x}.csv")
}

pub fn execute(cfg: &RunConfig, out: &Path, workers: usize) -> Result<RunReport, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let start = Instant::now();
    let solution = solve_config(cfg, workers)?;
    let elapsed_s = start.elapsed().as_secs_f64();
    let residual = solution.budget.relative_residual();
    if !residual.is_finite() {
        return Err(CliError::Numerical(format!("energy budget residual is {residual}")));
    }

    let tally = &solution.tally;
    let mut files = Vec::new();
    let depths = tally.depths();
    let idd = tally.idd();
    let path = out.join("idd.csv");
    write_idd(&path, &depths, &idd)?;
    files.push(path);
    let mut spots = Vec::new();
    for &x in &cfg.output.spot_depths_cm {
        let s = tally.slab_at(x)?;
        let path = out.join(spot_file_name(x));
        write_spot(&path, tally, s)?;
        files.push(path);
        let (sy, sz) = tally.spot_sigma(s);
        spots.push((x, sy, sz));
    }
    let path = out.join("ld.csv");
    write_longitudinal(&path, tally)?;
    files.push(path);
    let metrics = depth_metrics(&depths, &idd).map_err(|e| e.to_string());
    if let Ok(m) = &metrics {
        let path = out.join("metrics.csv");
        write_metrics(&path, m, &spots)?;
        files.push(path);
    }

    let config_text = cfg.to_toml();
    let b = solution.budget;
    let manifest = Manifest {
        config_sha256: config_hash(cfg),
        config: &config_text,
        versions: Versions { lbsplit: lbsplit::VERSION, lbsplit_cli: env!("CARGO_PKG_VERSION") },
        workers,
        elapsed_s,
        slabs_run: solution.slabs_run,
        terminated_early: solution.terminated_early,
        budget: Budget {
            injected_mev: b.injected,
            deposited_mev: b.deposited,
            lateral_escape_mev: b.lateral_escape,
            angular_escape_mev: b.angular_escape,
            in_flight_mev: b.in_flight,
            relative_residual: residual,
        },
        metrics: metrics.as_ref().ok().map(|m| MetricsOut { bp_cm: m.bp, p90_cm: m.p90, d90_cm: m.d90, d20_cm: m.d20 }),
        metrics_error: metrics.as_ref().err().map(|s| s.as_str()),
        spots: spots.iter().map(|&(x, sy, sz)| SpotOut { depth_cm: x, sigma_y_cm: sy, sigma_z_cm: sz }).collect(),
        warnings: &solution.warnings,
        files: files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    files.push(path);

    Ok(RunReport { solution, metrics, spots, files, elapsed_s })
}
