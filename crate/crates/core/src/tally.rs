//! Energy deposition tallies, dose, depth metrics, the energy budget and CSV
//! output of the derived distributions.
//!
//! Deposited energy is stored per voxel in MeV per injected proton. Dose is
//! energy per unit mass (MeV/g); the integrated depth dose is
//! IDD(x) = Σ D ΔyΔz in MeV cm²/g, so that Σ IDD ρ Δx recovers the deposited
//! energy in a laterally homogeneous medium.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::grid::{DensityField, Grids};

#[derive(Debug, Error)]
pub enum TallyError {
    #[error("depth-dose maximum lies at the domain edge (slab {0}); extend the depth domain")]
    PeakAtEdge(usize),
    #[error("depth-dose curve is empty or zero")]
    Empty,
    #[error("the {0} level is never crossed")]
    NoCrossing(&'static str),
    #[error("depth {0} cm lies outside the domain")]
    DepthOutside(f64),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoseTally {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub y_lo: f64,
    pub z_lo: f64,
    /// Deposited energy per voxel (MeV), indexed (s * ny + p) * nz + q.
    pub energy: Vec<f64>,
    /// Density per voxel (g/cm³).
    pub density: Vec<f64>,
}

impl DoseTally {
    pub fn new(grids: &Grids, density: &DensityField) -> Self {
        let (nx, ny, nz) = (grids.depth.slabs, grids.y.cells, grids.z.cells);
        let mut rho = Vec::with_capacity(nx * ny * nz);
        for s in 0..nx {
            for k in density.slab(s) {
                rho.push(density.media[*k as usize].density);
            }
        }
        Self {
            nx,
            ny,
            nz,
            dx: grids.depth.step(),
            dy: grids.y.width(),
            dz: grids.z.width(),
            y_lo: grids.y.lo,
            z_lo: grids.z.lo,
            energy: vec![0.0; nx * ny * nz],
            density: rho,
        }
    }

    fn voxel(&self, s: usize, p: usize, q: usize) -> usize {
        (s * self.ny + p) * self.nz + q
    }

    /// Adds column energies (MeV, indexed p * nz + q) to slab `s`.
    pub fn add_slab(&mut self, s: usize, column: &[f64]) {
        let n = self.ny * self.nz;
        for (e, c) in self.energy[s * n..(s + 1) * n].iter_mut().zip(column) {
            *e += c;
        }
    }

    pub fn total(&self) -> f64 {
        self.energy.iter().sum()
    }

    pub fn voxel_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Dose in MeV/g per injected proton.
    pub fn dose(&self, s: usize, p: usize, q: usize) -> f64 {
        let k = self.voxel(s, p, q);
        self.energy[k] / (self.density[k] * self.voxel_volume())
    }

    pub fn depths(&self) -> Vec<f64> {
        (0..self.nx).map(|s| (s as f64 + 0.5) * self.dx).collect()
    }

    pub fn y_centers(&self) -> Vec<f64> {
        (0..self.ny).map(|p| self.y_lo + (p as f64 + 0.5) * self.dy).collect()
    }

    pub fn z_centers(&self) -> Vec<f64> {
        (0..self.nz).map(|q| self.z_lo + (q as f64 + 0.5) * self.dz).collect()
    }

    /// Integrated depth dose Σ_yz D ΔyΔz per slab.
    pub fn idd(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|s| {
                let mut acc = 0.0;
                for p in 0..self.ny {
                    for q in 0..self.nz {
                        acc += self.dose(s, p, q);
                    }
                }
                acc * self.dy * self.dz
            })
            .collect()
    }

    pub fn slab_at(&self, depth: f64) -> Result<usize, TallyError> {
        if !(depth >= 0.0 && depth <= self.nx as f64 * self.dx) {
            return Err(TallyError::DepthOutside(depth));
        }
        Ok(((depth / self.dx) as usize).min(self.nx - 1))
    }

    /// Dose on the (y, z) plane of slab `s`, indexed p * nz + q.
    pub fn spot(&self, s: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ny * self.nz);
        for p in 0..self.ny {
            for q in 0..self.nz {
                out.push(self.dose(s, p, q));
            }
        }
        out
    }

    /// Dose-weighted standard deviations (σ_y, σ_z) of the spot at slab `s`.
    pub fn spot_sigma(&self, s: usize) -> (f64, f64) {
        let plane = self.spot(s);
        let (ys, zs) = (self.y_centers(), self.z_centers());
        let total: f64 = plane.iter().sum();
        if !(total > 0.0) {
            return (0.0, 0.0);
        }
        let (mut my, mut mz) = (0.0, 0.0);
        for p in 0..self.ny {
            for q in 0..self.nz {
                let d = plane[p * self.nz + q];
                my += d * ys[p];
                mz += d * zs[q];
            }
        }
        my /= total;
        mz /= total;
        let (mut vy, mut vz) = (0.0, 0.0);
        for p in 0..self.ny {
            for q in 0..self.nz {
                let d = plane[p * self.nz + q];
                vy += d * (ys[p] - my).powi(2);
                vz += d * (zs[q] - mz).powi(2);
            }
        }
        ((vy / total).sqrt(), (vz / total).sqrt())
    }

    /// Longitudinal dose Σ_z D Δz, indexed s * ny + p.
    pub fn longitudinal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.ny];
        for s in 0..self.nx {
            for p in 0..self.ny {
                out[s * self.ny + p] = (0..self.nz).map(|q| self.dose(s, p, q)).sum::<f64>() * self.dz;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    /// Bragg peak depth (cm).
    pub bp: f64,
    /// Proximal 90% depth.
    pub p90: f64,
    /// Distal 90% depth.
    pub d90: f64,
    /// Distal 20% depth.
    pub d20: f64,
}

fn crossing(x: &[f64], y: &[f64], k0: usize, k1: usize, level: f64) -> f64 {
    let t = (level - y[k0]) / (y[k1] - y[k0]);
    x[k0] + t * (x[k1] - x[k0])
}

/// Bragg peak by parabolic refinement of the maximum; P90/D90/D20 by linear
/// interpolation on the proximal and distal sides.
pub fn depth_metrics(depths: &[f64], idd: &[f64]) -> Result<DepthMetrics, TallyError> {
    let n = idd.len();
    if n == 0 {
        return Err(TallyError::Empty);
    }
    let k = (0..n).fold(0, |b, i| if idd[i] > idd[b] { i } else { b });
    let peak = idd[k];
    if !(peak > 0.0) {
        return Err(TallyError::Empty);
    }
    if k == 0 || k + 1 >= n {
        return Err(TallyError::PeakAtEdge(k));
    }
    let (y0, y1, y2) = (idd[k - 1], idd[k], idd[k + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom != 0.0 { (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    let h = depths[k + 1] - depths[k];
    let bp = depths[k] + shift * h;
    let ymax = if denom != 0.0 { y1 - 0.25 * (y0 - y2) * shift } else { y1 };

    let proximal = |level: f64, name: &'static str| -> Result<f64, TallyError> {
        let target = level * ymax;
        (1..=k)
            .rev()
            .find(|&i| idd[i - 1] < target && idd[i] >= target)
            .map(|i| crossing(depths, idd, i - 1, i, target))
            .ok_or(TallyError::NoCrossing(name))
    };
    let distal = |level: f64, name: &'static str| -> Result<f64, TallyError> {
        let target = level * ymax;
        (k..n - 1)
            .find(|&i| idd[i] >= target && idd[i + 1] < target)
            .map(|i| crossing(depths, idd, i, i + 1, target))
            .ok_or(TallyError::NoCrossing(name))
    };
    Ok(DepthMetrics { bp, p90: proximal(0.9, "P90")?, d90: distal(0.9, "D90")?, d20: distal(0.2, "D20")? })
}

/// Energy accounting per injected proton (MeV).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBudget {
    pub injected: f64,
    pub deposited: f64,
    pub lateral_escape: f64,
    pub angular_escape: f64,
    pub in_flight: f64,
}

impl EnergyBudget {
    /// injected − (deposited + escapes + in flight), relative to injected.
    pub fn relative_residual(&self) -> f64 {
        (self.injected - self.deposited - self.lateral_escape - self.angular_escape - self.in_flight) / self.injected
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, TallyError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| TallyError::Io { path: path.display().to_string(), source })
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> TallyError + '_ {
    move |source| TallyError::Io { path: path.display().to_string(), source }
}

/// `x_cm,idd`
pub fn write_idd(path: &Path, depths: &[f64], idd: &[f64]) -> Result<(), TallyError> {
    let mut w = create(path)?;
    writeln!(w, "x_cm,idd").map_err(io(path))?;
    for (x, d) in depths.iter().zip(idd) {
        writeln!(w, "{x},{d}").map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

/// `y_cm,z_cm,dose` on the plane of slab `s`.
pub fn write_spot(path: &Path, tally: &DoseTally, s: usize) -> Result<(), TallyError> {
    let mut w = create(path)?;
    writeln!(w, "y_cm,z_cm,dose").map_err(io(path))?;
    let plane = tally.spot(s);
    let (ys, zs) = (tally.y_centers(), tally.z_centers());
    for p in 0..tally.ny {
        for q in 0..tally.nz {
            writeln!(w, "{},{},{}", ys[p], zs[q], plane[p * tally.nz + q]).map_err(io(path))?;
        }
    }
    w.flush().map_err(io(path))
}

/// `x_cm,y_cm,dose` of the z-integrated dose.
pub fn write_longitudinal(path: &Path, tally: &DoseTally) -> Result<(), TallyError> {
    let mut w = create(path)?;
    writeln!(w, "x_cm,y_cm,dose").map_err(io(path))?;
    let ld = tally.longitudinal();
    let (xs, ys) = (tally.depths(), tally.y_centers());
    for s in 0..tally.nx {
        for p in 0..tally.ny {
            writeln!(w, "{},{},{}", xs[s], ys[p], ld[s * tally.ny + p]).map_err(io(path))?;
        }
    }
    w.flush().map_err(io(path))
}

/// Single-row metrics file: `bp_cm,p90_cm,d90_cm,d20_cm` followed by
/// `sigma_y_<x>,sigma_z_<x>` for each requested spot depth.
pub fn write_metrics(path: &Path, m: &DepthMetrics, spots: &[(f64, f64, f64)]) -> Result<(), TallyError> {
    let mut w = create(path)?;
    let mut header = String::from("bp_cm,p90_cm,d90_cm,d20_cm");
    let mut row = format!("{},{},{},{}", m.bp, m.p90, m.d90, m.d20);
    for (x, sy, sz) in spots {
        header.push_str(&format!(",sigma_y_{x},sigma_z_{x}"));
        row.push_str(&format!(",{sy},{sz}"));
    }
    writeln!(w, "{header}\n{row}").map_err(io(path))?;
    w.flush().map_err(io(path))
}
