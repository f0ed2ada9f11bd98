//! Fokker-Planck angular diffusion in the tangent variables (u, v) with
//! homogeneous Dirichlet ends, advanced by Crank-Nicolson in the discrete sine
//! basis where the five-point Laplacian is diagonal.

use crate::grid::AngularAxis;

/// Sine transform pair and Laplacian eigenvalues for an (nu x nv) interior node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDiffusion {
    nu: usize,
    nv: usize,
    intervals_u: usize,
    intervals_v: usize,
    /// sin(π (i+1)(m+1) / I), indexed [m * nu + i].
    sin_u: Vec<f64>,
    sin_v: Vec<f64>,
    /// Eigenvalues (2cos(πm/I) - 2)/Δu² of the 1-D second difference.
    lam_u: Vec<f64>,
    lam_v: Vec<f64>,
}

fn sine_table(intervals: usize) -> Vec<f64> {
    let n = intervals - 1;
    let mut s = vec![0.0; n * n];
    for m in 0..n {
        for i in 0..n {
            s[m * n + i] = (std::f64::consts::PI * ((i + 1) * (m + 1)) as f64 / intervals as f64).sin();
        }
    }
    s
}

fn eigenvalues(axis: &AngularAxis) -> Vec<f64> {
    let du = axis.spacing();
    (1..axis.intervals)
        .map(|m| (2.0 * (std::f64::consts::PI * m as f64 / axis.intervals as f64).cos() - 2.0) / (du * du))
        .collect()
}

impl AngularDiffusion {
    pub fn new(u: &AngularAxis, v: &AngularAxis) -> Self {
        Self {
            nu: u.nodes(),
            nv: v.nodes(),
            intervals_u: u.intervals,
            intervals_v: v.intervals,
            sin_u: sine_table(u.intervals),
            sin_v: sine_table(v.intervals),
            lam_u: eigenvalues(u),
            lam_v: eigenvalues(v),
        }
    }

    pub fn n_ang(&self) -> usize {
        self.nu * self.nv
    }

    /// Mode eigenvalues of the 2-D five-point Laplacian, indexed [m * nv + n].
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_ang());
        for &a in &self.lam_u {
            for &b in &self.lam_v {
                out.push(a + b);
            }
        }
        out
    }

    /// Crank-Nicolson amplification per mode for ∂ψ/∂x = D Δψ over a step h.
    pub fn cn_factors(&self, diffusivity: f64, h: f64) -> Vec<f64> {
        self.laplacian_eigenvalues()
            .into_iter()
            .map(|lam| {
                let a = diffusivity * lam;
                (1.0 + 0.5 * h * a) / (1.0 - 0.5 * h * a)
            })
            .collect()
    }

    /// Forward transform ψ̂_mn = Σ_ij ψ_ij sin(πim/I) sin(πjn/J) of a block laid
    /// out [i][j][k] with `n_lat` trailing values per node.
    pub fn forward(&self, block: &[f64], out: &mut [f64], scratch: &mut Vec<f64>, n_lat: usize) {
        scratch.resize(block.len(), 0.0);
        transform_first(&self.sin_u, self.nu, self.nv, n_lat, block, scratch, false);
        transform_second(&self.sin_v, self.nu, self.nv, n_lat, scratch, out, false);
    }

    /// Inverse transform ψ_ij = 4/(IJ) Σ_mn ψ̂_mn sin(πim/I) sin(πjn/J).
    pub fn inverse(&self, modes: &[f64], out: &mut [f64], scratch: &mut Vec<f64>, n_lat: usize) {
        scratch.resize(modes.len(), 0.0);
        transform_second(&self.sin_v, self.nu, self.nv, n_lat, modes, scratch, true);
        transform_first(&self.sin_u, self.nu, self.nv, n_lat, scratch, out, true);
        let norm = 4.0 / (self.intervals_u * self.intervals_v) as f64;
        out.iter_mut().for_each(|x| *x *= norm);
    }

    /// One Crank-Nicolson step on a block [i][j][k]. Lateral cell k uses the
    /// mode factors `factors[medium[k]]`.
    pub fn step_block(
        &self,
        block: &mut [f64],
        factors: &[&[f64]],
        medium: &[u16],
        buf: &mut Vec<f64>,
        scratch: &mut Vec<f64>,
    ) {
        let n_lat = medium.len();
        buf.resize(block.len(), 0.0);
        self.forward(block, buf, scratch, n_lat);
        let n_ang = self.n_ang();
        if factors.len() == 1 {
            let f = factors[0];
            for a in 0..n_ang {
                let fa = f[a];
                buf[a * n_lat..(a + 1) * n_lat].iter_mut().for_each(|x| *x *= fa);
            }
        } else {
            for a in 0..n_ang {
                let row = &mut buf[a * n_lat..(a + 1) * n_lat];
                for (k, x) in row.iter_mut().enumerate() {
                    *x *= factors[medium[k] as usize][a];
                }
            }
        }
        self.inverse(buf, block, scratch, n_lat);
    }
}

/// Transform along the first angular index: out[m][j][k] = Σ_i S[m][i] x[i][j][k]
/// (or with S transposed when `transpose`).
fn transform_first(sin: &[f64], nu: usize, nv: usize, n_lat: usize, x: &[f64], out: &mut [f64], transpose: bool) {
    let stride = nv * n_lat;
    for m in 0..nu {
        let dst = &mut out[m * stride..(m + 1) * stride];
        dst.iter_mut().for_each(|d| *d = 0.0);
        for i in 0..nu {
            let s = if transpose { sin[i * nu + m] } else { sin[m * nu + i] };
            let src = &x[i * stride..(i + 1) * stride];
            for (d, v) in dst.iter_mut().zip(src) {
                *d += s * v;
            }
        }
    }
}

/// Transform along the second angular index: out[i][n][k] = Σ_j S[n][j] x[i][j][k].
fn transform_second(sin: &[f64], nu: usize, nv: usize, n_lat: usize, x: &[f64], out: &mut [f64], transpose: bool) {
    let stride = nv * n_lat;
    for i in 0..nu {
        let xs = &x[i * stride..(i + 1) * stride];
        let os = &mut out[i * stride..(i + 1) * stride];
        for n in 0..nv {
            let dst = &mut os[n * n_lat..(n + 1) * n_lat];
            dst.iter_mut().for_each(|d| *d = 0.0);
            for j in 0..nv {
                let s = if transpose { sin[j * nv + n] } else { sin[n * nv + j] };
                let src = &xs[j * n_lat..(j + 1) * n_lat];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += s * v;
                }
            }
        }
    }
}
