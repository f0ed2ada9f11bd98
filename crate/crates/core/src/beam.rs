//! Gaussian pencil-beam inlet condition at depth zero.

use thiserror::Error;

use crate::grid::{EnergyGrid, Grids, PhaseField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    /// Mean kinetic energy (MeV).
    pub energy: f64,
    pub sigma_e: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self { energy: 100.0, sigma_e: 1.0, sigma_y: 0.3, sigma_z: 0.3, sigma_u: 1e-6, sigma_v: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamError {
    #[error("beam energy {energy} MeV lies outside the energy grid [{min}, {max}]")]
    EnergyOutsideGrid { energy: f64, min: f64, max: f64 },
    #[error("beam {0} must be positive and finite, got {1}")]
    BadSigma(&'static str, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BeamWarning {
    /// Energy spread far below the group width; the beam was placed in a single group.
    NarrowEnergySpread { sigma_e: f64, group_width: f64 },
}

// 8-point Gauss-Legendre rule on [-1, 1].
pub(crate) const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
pub(crate) const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Midpoint-sampled Gaussian weights on equally spaced cells, normalized so
/// that Σ w · spacing = 1. A profile too narrow to register on any cell
/// collapses onto the cell(s) nearest the axis.
pub fn cell_weights(centers: &[f64], sigma: f64, spacing: f64) -> Vec<f64> {
    let mut w: Vec<f64> = centers.iter().map(|c| (-0.5 * (c / sigma).powi(2)).exp()).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        w.iter_mut().for_each(|x| *x /= total * spacing);
        return w;
    }
    let nearest = centers.iter().fold(f64::INFINITY, |m, c| m.min(c.abs()));
    let hits: Vec<usize> = (0..centers.len())
        .filter(|&k| centers[k].abs() <= nearest + 1e-12 * spacing)
        .collect();
    w.iter_mut().for_each(|x| *x = 0.0);
    for &k in &hits {
        w[k] = 1.0 / (hits.len() as f64 * spacing);
    }
    w
}

/// Group averages and slope moments of a unit-area Gaussian energy spectrum.
/// Returns `(avg, slope, narrow)` where Σ avg_g ΔE_g = 1.
pub fn energy_moments(grid: &EnergyGrid, e0: f64, sigma_e: f64) -> (Vec<f64>, Vec<f64>, bool) {
    let n = grid.groups();
    let mut avg = vec![0.0; n];
    let mut slope = vec![0.0; n];
    let g0 = grid.group_of(e0).expect("beam energy inside grid");
    if sigma_e < 1e-3 * grid.width(g0) {
        avg[g0] = 1.0 / grid.width(g0);
        return (avg, slope, true);
    }
    let mut total = 0.0;
    for g in 0..n {
        let (lo, hi, w) = (grid.lower(g), grid.upper(g), grid.width(g));
        if hi < e0 - 40.0 * sigma_e || lo > e0 + 40.0 * sigma_e {
            continue;
        }
        let panels = (w / sigma_e).ceil().max(1.0) as usize;
        let pw = w / panels as f64;
        let (mut m0, mut m1) = (0.0, 0.0);
        for k in 0..panels {
            let mid = lo + (k as f64 + 0.5) * pw;
            for (x, wt) in GL8_X.iter().zip(GL8_W.iter()) {
                let e = mid + 0.5 * pw * x;
                let f = (-0.5 * ((e - e0) / sigma_e).powi(2)).exp() * 0.5 * pw * wt;
                m0 += f;
                m1 += f * 2.0 * (e - grid.center(g)) / w;
            }
        }
        avg[g] = m0 / w;
        slope[g] = 3.0 * m1 / w;
        total += m0;
    }
    avg.iter_mut().for_each(|x| *x /= total);
    slope.iter_mut().for_each(|x| *x /= total);
    (avg, slope, false)
}

/// Separable Gaussian inlet field normalized to unit particle mass.
pub fn inlet_field(spec: &BeamSpec, grids: &Grids) -> Result<(PhaseField, Vec<BeamWarning>), BeamError> {
    for (name, s) in [
        ("sigma_e", spec.sigma_e),
        ("sigma_y", spec.sigma_y),
        ("sigma_z", spec.sigma_z),
        ("sigma_u", spec.sigma_u),
        ("sigma_v", spec.sigma_v),
    ] {
        if !(s > 0.0 && s.is_finite()) {
            return Err(BeamError::BadSigma(name, s));
        }
    }
    let eg = &grids.energy;
    if !(spec.energy >= eg.min() && spec.energy <= eg.max()) {
        return Err(BeamError::EnergyOutsideGrid { energy: spec.energy, min: eg.min(), max: eg.max() });
    }
    let wy = cell_weights(&grids.y.centers(), spec.sigma_y, grids.y.width());
    let wz = cell_weights(&grids.z.centers(), spec.sigma_z, grids.z.width());
    let wu = cell_weights(&grids.u.node_values(), spec.sigma_u, grids.u.spacing());
    let wv = cell_weights(&grids.v.node_values(), spec.sigma_v, grids.v.spacing());
    let (avg, slope, narrow) = energy_moments(eg, spec.energy, spec.sigma_e);
    let mut warnings = Vec::new();
    if narrow {
        let g0 = eg.group_of(spec.energy).unwrap();
        let w = BeamWarning::NarrowEnergySpread { sigma_e: spec.sigma_e, group_width: eg.width(g0) };
        log::warn!("{w:?}");
        warnings.push(w);
    }

    let shape = grids.shape();
    let mut field = PhaseField::zeros(shape);
    let mut transverse = Vec::with_capacity(shape.block());
    for &a in &wu {
        for &b in &wv {
            for &c in &wy {
                for &d in &wz {
                    transverse.push(a * b * c * d);
                }
            }
        }
    }
    for g in 0..shape.groups {
        for (l, moment) in [(0, &avg), (1, &slope)] {
            let m = moment[g];
            if m == 0.0 {
                continue;
            }
            for (x, t) in field.block_mut(l, g).iter_mut().zip(&transverse) {
                *x = m * t;
            }
        }
    }
    Ok((field, warnings))
}
