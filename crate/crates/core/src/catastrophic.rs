//! Catastrophic (nuclear) scattering: factorized transition kernels, the
//! source feeding scatter order k from order k-1, kernel fitting from
//! trajectory samples and the CSV formats that carry them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::grid::{AngularAxis, EnergyGrid, Grids, PhaseField};

#[derive(Debug, Error)]
pub enum CatastrophicError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("sample {index}: {reason}")]
    BadSample { index: usize, reason: String },
    #[error("angular samples have zero variance")]
    ZeroVariance,
    #[error("{path}: line {line}: {reason}")]
    Parse { path: String, line: u64, reason: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("kernel parameters: {0}")]
    Params(String),
}

/// Minimum number of samples accepted by the fitting routines.
pub const MIN_SAMPLES: usize = 30;

/// Kernel parameters per energy group: λ for the source group of the energy
/// transition, (α, β) for the angular kernel of the destination group.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl KernelParams {
    pub fn uniform(groups: usize, lambda: f64, alpha: f64, beta: f64) -> Self {
        Self { lambda: vec![lambda; groups], alpha: vec![alpha; groups], beta: vec![beta; groups] }
    }

    /// Non-clinical placeholder: mean energy loss 20 MeV, mean deflection 1/15 rad.
    pub fn synthetic(groups: usize) -> Self {
        Self::uniform(groups, 0.05, 2.0, 30.0)
    }

    pub fn groups(&self) -> usize {
        self.lambda.len()
    }

    pub fn validate(&self) -> Result<(), CatastrophicError> {
        let n = self.lambda.len();
        if self.alpha.len() != n || self.beta.len() != n {
            return Err(CatastrophicError::Params("parameter arrays differ in length".into()));
        }
        for g in 0..n {
            if !(self.lambda[g] > 0.0 && self.alpha[g] > 0.0 && self.beta[g] > 0.0) {
                return Err(CatastrophicError::Params(format!("non-positive parameter in group {}", g + 1)));
            }
        }
        Ok(())
    }
}

/// Non-clinical removal cross section (1/cm) for a material of density ρ:
/// 0.0115 ρ above 20 MeV, ramping linearly to zero at 10 MeV.
pub fn synthetic_removal(grid: &EnergyGrid, density: f64) -> Vec<f64> {
    grid.centers()
        .iter()
        .map(|&e| 0.0115 * density * ((e - 10.0) / 10.0).clamp(0.0, 1.0))
        .collect()
}

/// P¹(g′ → g) for g ≤ g′, proportional to e^{-λ(E_g′ - E_g)} and summing to one.
pub fn energy_kernel(lambda: f64, g_src: usize, grid: &EnergyGrid) -> Vec<f64> {
    let es = grid.center(g_src);
    let mut p: Vec<f64> = (0..=g_src).map(|g| (-lambda * (es - grid.center(g))).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Cosine of the angle between the directions with tangents (u′, v′) and (u, v).
pub fn scattering_cosine(up: f64, vp: f64, u: f64, v: f64) -> f64 {
    let c = (1.0 + u * up + v * vp) / ((1.0 + u * u + v * v).sqrt() * (1.0 + up * up + vp * vp).sqrt());
    c.clamp(-1.0, 1.0)
}

pub fn gamma_density(alpha: f64, beta: f64, theta: f64) -> f64 {
    if theta <= 0.0 {
        return if alpha > 1.0 {
            0.0
        } else if alpha == 1.0 {
            beta
        } else {
            f64::INFINITY
        };
    }
    (alpha * beta.ln() - ln_gamma(alpha) + (alpha - 1.0) * theta.ln() - beta * theta).exp()
}

/// Angular kernel density from source node (iu, iv) onto every interior node,
/// indexed [i * nv + j] and normalized so that Σ ΔuΔv P² = 1.
pub fn angle_kernel(alpha: f64, beta: f64, src: (usize, usize), u: &AngularAxis, v: &AngularAxis) -> Vec<f64> {
    let (nu, nv) = (u.nodes(), v.nodes());
    let (up, vp) = (u.node(src.0), v.node(src.1));
    let mut d = vec![0.0; nu * nv];
    for i in 0..nu {
        for j in 0..nv {
            let theta = scattering_cosine(up, vp, u.node(i), v.node(j)).acos();
            d[i * nv + j] = if i == src.0 && j == src.1 && alpha < 1.0 {
                let eff = 0.5
                    * (scattering_cosine(up, vp, up + u.spacing(), vp).acos()
                        + scattering_cosine(up, vp, up, vp + v.spacing()).acos());
                gamma_density(alpha, beta, 0.5 * eff)
            } else {
                gamma_density(alpha, beta, theta)
            };
        }
    }
    let cell = u.spacing() * v.spacing();
    let k: f64 = d.iter().sum::<f64>() * cell;
    if k > 0.0 && k.is_finite() {
        d.iter_mut().for_each(|x| *x /= k);
    } else {
        // everything underflowed: keep the direction
        d.iter_mut().for_each(|x| *x = 0.0);
        d[src.0 * nv + src.1] = 1.0 / cell;
    }
    d
}

enum EnergyTransfer {
    /// Common λ: the sum over source groups collapses to a downward recursion.
    Uniform { decay: Vec<f64>, norm: Vec<f64> },
    /// Per-source-group λ: rows P¹(g′ → ·), indexed [g′][g].
    Dense(Vec<Vec<f64>>),
}

/// Precomputed kernels producing the order-k source from the order-(k-1) field.
pub struct SourceOperator {
    groups: usize,
    n_ang: usize,
    widths: Vec<f64>,
    energy: EnergyTransfer,
    /// Stochastic matrices W[src * n_ang + dst] = ΔuΔv P²(src → dst), one per distinct (α, β).
    angle: Vec<Vec<f64>>,
    angle_of_group: Vec<usize>,
}

impl SourceOperator {
    pub fn new(params: &KernelParams, grids: &Grids) -> Result<Self, CatastrophicError> {
        params.validate()?;
        let eg = &grids.energy;
        let n = eg.groups();
        if params.groups() != n {
            return Err(CatastrophicError::Params(format!(
                "{} parameter groups for a {n}-group grid",
                params.groups()
            )));
        }
        let energy = if params.lambda.iter().all(|&l| l == params.lambda[0]) {
            let lam = params.lambda[0];
            let decay: Vec<f64> = (0..n)
                .map(|g| if g + 1 < n { (-lam * (eg.center(g + 1) - eg.center(g))).exp() } else { 0.0 })
                .collect();
            // Z_g′ = Σ_{g ≤ g′} e^{-λ(E_g′ - E_g)}
            let mut norm = vec![1.0; n];
            for g in 1..n {
                norm[g] = 1.0 + decay[g - 1] * norm[g - 1];
            }
            EnergyTransfer::Uniform { decay, norm }
        } else {
            EnergyTransfer::Dense((0..n).map(|gs| energy_kernel(params.lambda[gs], gs, eg)).collect())
        };

        let (u, v) = (&grids.u, &grids.v);
        let n_ang = u.nodes() * v.nodes();
        let cell = u.spacing() * v.spacing();
        let mut keys: Vec<(u64, u64)> = Vec::new();
        let mut angle = Vec::new();
        let mut angle_of_group = Vec::with_capacity(n);
        for g in 0..n {
            let key = (params.alpha[g].to_bits(), params.beta[g].to_bits());
            let idx = match keys.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    let mut w = vec![0.0; n_ang * n_ang];
                    for si in 0..u.nodes() {
                        for sj in 0..v.nodes() {
                            let s = si * v.nodes() + sj;
                            let row = angle_kernel(params.alpha[g], params.beta[g], (si, sj), u, v);
                            for d in 0..n_ang {
                                w[s * n_ang + d] = row[d] * cell;
                            }
                        }
                    }
                    keys.push(key);
                    angle.push(w);
                    angle.len() - 1
                }
            };
            angle_of_group.push(idx);
        }
        Ok(Self { groups: n, n_ang, widths: eg.widths(), energy, angle, angle_of_group })
    }

    /// Group-average source of the next scatter order (the slope source is
    /// zero), written into `out` laid out [g][i][j][p][q]. `removal[m][g]` is
    /// the removal cross section of medium m, `medium[k]` the medium of lateral cell k.
    pub fn build(&self, prev: &PhaseField, removal: &[&[f64]], medium: &[u16], out: &mut [f64]) {
        let shape = prev.shape();
        let n_lat = shape.n_lat();
        let block = shape.block();
        assert_eq!(out.len(), self.groups * block);
        assert_eq!(medium.len(), n_lat);
        // removal rate R_g′ = σ_g′ ψ¹_g′ ΔE_g′ per phase point
        let mut rate = vec![0.0; self.groups * block];
        for g in 0..self.groups {
            let src = prev.block(0, g);
            let dst = &mut rate[g * block..(g + 1) * block];
            let w = self.widths[g];
            for a in 0..self.n_ang {
                for k in 0..n_lat {
                    dst[a * n_lat + k] = removal[medium[k] as usize][g] * w * src[a * n_lat + k];
                }
            }
        }
        // energy transfer into A_g = Σ_{g′ ≥ g} P¹(g′→g) R_g′ / ΔE_g
        let mut acc = vec![0.0; self.groups * block];
        match &self.energy {
            EnergyTransfer::Uniform { decay, norm } => {
                let mut run = vec![0.0; block];
                for g in (0..self.groups).rev() {
                    let r = &rate[g * block..(g + 1) * block];
                    let d = decay[g];
                    let z = norm[g];
                    for k in 0..block {
                        run[k] = r[k] / z + d * run[k];
                    }
                    let w = self.widths[g];
                    for (a, x) in acc[g * block..(g + 1) * block].iter_mut().zip(&run) {
                        *a = x / w;
                    }
                }
            }
            EnergyTransfer::Dense(rows) => {
                for gs in 0..self.groups {
                    let r = &rate[gs * block..(gs + 1) * block];
                    if r.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    for (g, &p) in rows[gs].iter().enumerate() {
                        let c = p / self.widths[g];
                        for (a, x) in acc[g * block..(g + 1) * block].iter_mut().zip(r) {
                            *a += c * x;
                        }
                    }
                }
            }
        }
        // angular redistribution per group
        for g in 0..self.groups {
            let w = &self.angle[self.angle_of_group[g]];
            let a_g = &acc[g * block..(g + 1) * block];
            let o = &mut out[g * block..(g + 1) * block];
            o.iter_mut().for_each(|x| *x = 0.0);
            for s in 0..self.n_ang {
                let row = &a_g[s * n_lat..(s + 1) * n_lat];
                if row.iter().all(|&x| x == 0.0) {
                    continue;
                }
                for d in 0..self.n_ang {
                    let c = w[s * self.n_ang + d];
                    if c == 0.0 {
                        continue;
                    }
                    for (x, r) in o[d * n_lat..(d + 1) * n_lat].iter_mut().zip(row) {
                        *x += c * r;
                    }
                }
            }
        }
    }
}

/// Maximum-likelihood exponential rate from (E_before, E_after) pairs.
pub fn fit_energy(samples: &[(f64, f64)]) -> Result<f64, CatastrophicError> {
    if samples.len() < MIN_SAMPLES {
        return Err(CatastrophicError::TooFewSamples { min: MIN_SAMPLES, got: samples.len() });
    }
    let mut total = 0.0;
    for (index, &(before, after)) in samples.iter().enumerate() {
        let loss = before - after;
        if !(loss > 0.0) {
            return Err(CatastrophicError::BadSample { index, reason: format!("non-positive energy loss {loss}") });
        }
        total += loss;
    }
    Ok(samples.len() as f64 / total)
}

/// Trigamma ψ′(x) for x > 0 by upward recurrence and the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    acc + r + 0.5 * r2 + r * r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 / 30.0)))
}

/// Gamma (shape α, rate β) fit of deflection angles: method of moments refined
/// by Newton iterations on the likelihood equation for α.
pub fn fit_angle(samples: &[f64]) -> Result<(f64, f64), CatastrophicError> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(CatastrophicError::TooFewSamples { min: MIN_SAMPLES, got: n });
    }
    for (index, &t) in samples.iter().enumerate() {
        if !(t > 0.0 && t < std::f64::consts::PI) {
            return Err(CatastrophicError::BadSample { index, reason: format!("angle {t} outside (0, π)") });
        }
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / nf;
    if !(var > 0.0) || samples.iter().all(|&t| t == samples[0]) {
        return Err(CatastrophicError::ZeroVariance);
    }
    let moment = (mean * mean / var, mean / var);
    let s = mean.ln() - samples.iter().map(|t| t.ln()).sum::<f64>() / nf;
    let mut alpha = moment.0;
    for _ in 0..20 {
        let f = alpha.ln() - digamma(alpha) - s;
        let df = 1.0 / alpha - trigamma(alpha);
        let next = alpha - f / df;
        if !(next.is_finite() && next > 0.0) {
            return Ok(moment);
        }
        let done = (next - alpha).abs() <= 1e-12 * alpha;
        alpha = next;
        if done {
            return Ok((alpha, alpha / mean));
        }
    }
    Ok(moment)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// 1-based energy group of the incoming proton.
    pub group: usize,
    pub e_before_mev: f64,
    pub e_after_mev: f64,
    pub theta_rad: f64,
}

fn io_err(path: &Path, source: std::io::Error) -> CatastrophicError {
    CatastrophicError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> CatastrophicError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        kind => CatastrophicError::Parse { path: path.display().to_string(), line, reason: format!("{kind:?}") },
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CatastrophicError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row.map_err(|e| csv_err(path, e))?);
    }
    Ok(out)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CatastrophicError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a trajectory file with header `group,e_before_mev,e_after_mev,theta_rad`.
pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>, CatastrophicError> {
    if std::fs::metadata(path).map_err(|e| io_err(path, e))?.len() == 0 {
        return Ok(Vec::new());
    }
    read_rows(path)
}

pub fn write_trajectories(path: &Path, records: &[TrajectoryRecord]) -> Result<(), CatastrophicError> {
    write_rows(path, records)
}

/// Records bucketed by 0-based group; records outside 1..=groups are dropped.
pub fn bucket_by_group(records: &[TrajectoryRecord], groups: usize) -> Vec<Vec<TrajectoryRecord>> {
    let mut out = vec![Vec::new(); groups];
    for r in records {
        if r.group >= 1 && r.group <= groups {
            out[r.group - 1].push(*r);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RemovalRow {
    group: usize,
    sigma_ct_per_cm: f64,
}

/// Reads a removal table with header `group,sigma_ct_per_cm`; unlisted groups are zero.
pub fn read_removal_table(path: &Path, groups: usize) -> Result<Vec<f64>, CatastrophicError> {
    let rows: Vec<RemovalRow> = read_rows(path)?;
    let mut out = vec![0.0; groups];
    for (k, r) in rows.iter().enumerate() {
        if r.group == 0 || r.group > groups {
            return Err(CatastrophicError::Parse {
                path: path.display().to_string(),
                line: k as u64 + 2,
                reason: format!("group {} outside 1..={groups}", r.group),
            });
        }
        if !(r.sigma_ct_per_cm >= 0.0) {
            return Err(CatastrophicError::Parse {
                path: path.display().to_string(),
                line: k as u64 + 2,
                reason: "negative cross section".into(),
            });
        }
        out[r.group - 1] = r.sigma_ct_per_cm;
    }
    Ok(out)
}

pub fn write_removal_table(path: &Path, sigma: &[f64]) -> Result<(), CatastrophicError> {
    let rows: Vec<RemovalRow> =
        sigma.iter().enumerate().map(|(g, &s)| RemovalRow { group: g + 1, sigma_ct_per_cm: s }).collect();
    write_rows(path, &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct KernelRow {
    group: usize,
    lambda_per_mev: f64,
    alpha: f64,
    beta_per_rad: f64,
}

/// Reads kernel parameters with header `group,lambda_per_mev,alpha,beta_per_rad`.
/// Every group must be listed.
pub fn read_kernel_params(path: &Path, groups: usize) -> Result<KernelParams, CatastrophicError> {
    let rows: Vec<KernelRow> = read_rows(path)?;
    let mut p = KernelParams::uniform(groups, f64::NAN, f64::NAN, f64::NAN);
    for (k, r) in rows.iter().enumerate() {
        if r.group == 0 || r.group > groups {
            return Err(CatastrophicError::Parse {
                path: path.display().to_string(),
                line: k as u64 + 2,
                reason: format!("group {} outside 1..={groups}", r.group),
            });
        }
        p.lambda[r.group - 1] = r.lambda_per_mev;
        p.alpha[r.group - 1] = r.alpha;
        p.beta[r.group - 1] = r.beta_per_rad;
    }
    if let Some(g) = (0..groups).find(|&g| p.lambda[g].is_nan()) {
        return Err(CatastrophicError::Params(format!("{}: group {} missing", path.display(), g + 1)));
    }
    p.validate()?;
    Ok(p)
}

pub fn write_kernel_params(path: &Path, p: &KernelParams) -> Result<(), CatastrophicError> {
    let rows: Vec<KernelRow> = (0..p.groups())
        .map(|g| KernelRow { group: g + 1, lambda_per_mev: p.lambda[g], alpha: p.alpha[g], beta_per_rad: p.beta[g] })
        .collect();
    write_rows(path, &rows)
}

/// Per-group fits with a global fallback for groups holding fewer than
/// `MIN_SAMPLES` records. Returns the parameters and a note per fallback.
pub fn fit_kernels(
    records: &[TrajectoryRecord],
    groups: usize,
    fallback: &KernelParams,
) -> Result<(KernelParams, Vec<String>), CatastrophicError> {
    let energy_pairs = |rs: &[TrajectoryRecord]| rs.iter().map(|r| (r.e_before_mev, r.e_after_mev)).collect::<Vec<_>>();
    let angles = |rs: &[TrajectoryRecord]| rs.iter().map(|r| r.theta_rad).collect::<Vec<_>>();
    let global_lambda = if records.len() >= MIN_SAMPLES { Some(fit_energy(&energy_pairs(records))?) } else { None };
    let global_angle = if records.len() >= MIN_SAMPLES { Some(fit_angle(&angles(records))?) } else { None };
    let buckets = bucket_by_group(records, groups);
    let mut p = fallback.clone();
    let mut notes = Vec::new();
    for (g, b) in buckets.iter().enumerate() {
        if b.len() >= MIN_SAMPLES {
            p.lambda[g] = fit_energy(&energy_pairs(b))?;
            let (a, be) = fit_angle(&angles(b))?;
            p.alpha[g] = a;
            p.beta[g] = be;
        } else {
            if let (Some(l), Some((a, be))) = (global_lambda, global_angle) {
                p.lambda[g] = l;
                p.alpha[g] = a;
                p.beta[g] = be;
            }
            if !b.is_empty() {
                notes.push(format!("group {}: {} samples, using fallback parameters", g + 1, b.len()));
            }
        }
    }
    Ok((p, notes))
}
