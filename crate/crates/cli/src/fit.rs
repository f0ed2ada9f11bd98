//! The `fit-kernels` subcommand.

use std::path::Path;

use lbsplit::catastrophic::{
    bucket_by_group, fit_kernels, read_trajectories, write_kernel_params, KernelParams, MIN_SAMPLES,
};

use crate::error::CliError;

pub struct FitReport {
    pub params: KernelParams,
    pub samples: usize,
    pub warnings: Vec<String>,
}

/// Fits per-group kernels from a trajectory file and writes them to `out`.
/// Groups with too few samples take the global fit, or the synthetic
/// defaults when the whole file is too small, and produce a warning.
pub fn fit_file(trajectories: &Path, groups: usize, out: &Path) -> Result<FitReport, CliError> {
    let records = read_trajectories(trajectories).map_err(CliError::from_catastrophic)?;
    let mut warnings = Vec::new();
    let outside = records.iter().filter(|r| r.group == 0 || r.group > groups).count();
    if outside > 0 {
        warnings.push(format!("{outside} records name groups outside 1..={groups} and were ignored"));
    }
    let fallback = KernelParams::synthetic(groups);
    let (params, _) = fit_kernels(&records, groups, &fallback).map_err(CliError::from_catastrophic)?;
    let source = if records.len() >= MIN_SAMPLES { "global fit" } else { "synthetic defaults" };
    for (g, b) in bucket_by_group(&records, groups).iter().enumerate() {
        if b.len() < MIN_SAMPLES {
            warnings.push(format!("group {}: {} samples, skipped ({source})", g + 1, b.len()));
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_kernel_params(out, &params).map_err(CliError::from_catastrophic)?;
    Ok(FitReport { params, samples: records.len(), warnings })
}
