//! Piecewise-linear discontinuous Galerkin discretization of the energy-loss
//! operator: upwind stopping-power drift, the straggling drift from ∂T/∂E,
//! symmetric interior-penalty straggling diffusion and catastrophic removal.
//!
//! Per group g the unknowns are a = ψ¹ (group average) and b = ψ² (slope
//! moment), with ψ(E) = a + b·2(E − E_g)/ΔE_g. Energy decreases with depth, so
//! upwind is the upper neighbour.

use thiserror::Error;

use crate::grid::EnergyGrid;
use crate::physics::PhysicsTables;

/// 2x2 block stored row-major: [aa, ab, ba, bb].
pub type Block = [f64; 4];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("singular block in energy solve at group {group}")]
    Singular { group: usize },
    #[error("coefficient arrays do not match {groups} groups")]
    Shape { groups: usize },
}

/// Material coefficients entering the energy operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCoefficients {
    /// S at the group edges (MeV cm²/g), length G+1.
    pub stopping_edges: Vec<f64>,
    /// T at group centres (MeV² cm²/g), length G.
    pub straggling: Vec<f64>,
    /// Removal cross section (1/cm), length G.
    pub removal: Vec<f64>,
    /// Mass density (g/cm³).
    pub density: f64,
}

impl EnergyCoefficients {
    /// Coefficients for a material at `density`; removal scales with density
    /// relative to the nominal density the table was given for.
    pub fn from_tables(tables: &PhysicsTables, density: f64, nominal_density: f64) -> Self {
        let scale = density / nominal_density;
        Self {
            stopping_edges: tables.stopping_edges.clone(),
            straggling: tables.straggling.clone(),
            removal: tables.removal_xs.iter().map(|s| s * scale).collect(),
            density,
        }
    }
}

/// Default interior-penalty constant for linear elements.
pub const DEFAULT_PENALTY: f64 = 2.0;

/// Block-tridiagonal operator: (Lψ)_g = lower_g ψ_{g-1} + diag_g ψ_g + upper_g ψ_{g+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyOperator {
    pub lower: Vec<Block>,
    pub diag: Vec<Block>,
    pub upper: Vec<Block>,
}

impl EnergyOperator {
    pub fn zero(groups: usize) -> Self {
        Self { lower: vec![[0.0; 4]; groups], diag: vec![[0.0; 4]; groups], upper: vec![[0.0; 4]; groups] }
    }

    pub fn groups(&self) -> usize {
        self.diag.len()
    }

    pub fn assemble(grid: &EnergyGrid, c: &EnergyCoefficients, penalty: f64) -> Result<Self, EnergyError> {
        let n = grid.groups();
        if c.stopping_edges.len() != n + 1 || c.straggling.len() != n || c.removal.len() != n {
            return Err(EnergyError::Shape { groups: n });
        }
        let rho = c.density;
        let w = grid.widths();
        let t = &c.straggling;
        let mut op = Self::zero(n);

        // dT/dE on each edge from centred differences; copied outward at the domain ends.
        let mut dt = vec![0.0; n + 1];
        for e in 1..n {
            dt[e] = (t[e] - t[e - 1]) / (grid.center(e) - grid.center(e - 1));
        }
        if n > 1 {
            dt[0] = dt[1];
            dt[n] = dt[n - 1];
        }

        for g in 0..n {
            let wg = w[g];
            let (sd, su) = (c.stopping_edges[g], c.stopping_edges[g + 1]);
            let (td, tu) = (0.5 * dt[g], 0.5 * dt[g + 1]);
            let (vd, vu) = (sd + td, su + tu);
            let d = &mut op.diag[g];
            // average row: (V_u ψ⁻_u - V_d ψ⁻_d)/ΔE with upwind traces a - b
            d[0] += -rho * vd / wg;
            d[1] += rho * vd / wg;
            // slope row
            d[2] += rho * (3.0 * vd - 3.0 * (su + sd) - 3.0 * (tu + td)) / wg;
            d[3] += rho * (-3.0 * vd - (su - sd)) / wg;
            d[0] -= c.removal[g];
            d[3] -= c.removal[g];
            if g + 1 < n {
                let u = &mut op.upper[g];
                u[0] += rho * vu / wg;
                u[1] -= rho * vu / wg;
                u[2] += 3.0 * rho * vu / wg;
                u[3] -= 3.0 * rho * vu / wg;
            }
            // interior diffusion integral
            op.diag[g][3] -= 0.5 * rho * 12.0 * t[g] / (wg * wg);
        }

        // interior-penalty edge terms, scaled by ρ/2
        let half = 0.5 * rho;
        for e in 1..n {
            let (gl, gr) = (e - 1, e);
            let te = 0.5 * (t[gl] + t[gr]);
            let he = 0.5 * (w[gl] + w[gr]);
            let kap = penalty * te / he;
            // {T ∂ψ} = te (b_l / w_l + b_r / w_r); jump = a_l + b_l - a_r + b_r
            let flux_l = [0.0, te / w[gl]];
            let flux_r = [0.0, te / w[gr]];
            let jump_l = [1.0, 1.0];
            let jump_r = [-1.0, 1.0];
            for k in 0..2 {
                // row gl: this is its upper edge
                let wl = w[gl];
                op.diag[gl][k] += half * (flux_l[k] - kap * jump_l[k]) / wl;
                op.upper[gl][k] += half * (flux_r[k] - kap * jump_r[k]) / wl;
                op.diag[gl][2 + k] += half * 3.0 * (flux_l[k] + jump_l[k] * te / wl - kap * jump_l[k]) / wl;
                op.upper[gl][2 + k] += half * 3.0 * (flux_r[k] + jump_r[k] * te / wl - kap * jump_r[k]) / wl;
                // row gr: this is its lower edge
                let wr = w[gr];
                op.lower[gr][k] += half * (-flux_l[k] + kap * jump_l[k]) / wr;
                op.diag[gr][k] += half * (-flux_r[k] + kap * jump_r[k]) / wr;
                op.lower[gr][2 + k] += half * 3.0 * (flux_l[k] + jump_l[k] * te / wr - kap * jump_l[k]) / wr;
                op.diag[gr][2 + k] += half * 3.0 * (flux_r[k] + jump_r[k] * te / wr - kap * jump_r[k]) / wr;
            }
        }
        Ok(op)
    }

    /// y = Lx for one phase point, with x and y interleaved as (a_0, b_0, a_1, b_1, ...).
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.groups();
        for g in 0..n {
            let mut r = mul(&self.diag[g], [x[2 * g], x[2 * g + 1]]);
            if g > 0 {
                let l = mul(&self.lower[g], [x[2 * g - 2], x[2 * g - 1]]);
                r = [r[0] + l[0], r[1] + l[1]];
            }
            if g + 1 < n {
                let u = mul(&self.upper[g], [x[2 * g + 2], x[2 * g + 3]]);
                r = [r[0] + u[0], r[1] + u[1]];
            }
            y[2 * g] = r[0];
            y[2 * g + 1] = r[1];
        }
    }

    /// Dense 2G x 2G matrix in interleaved ordering.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.groups();
        let mut m = vec![vec![0.0; 2 * n]; 2 * n];
        for g in 0..n {
            for r in 0..2 {
                for c in 0..2 {
                    m[2 * g + r][2 * g + c] = self.diag[g][2 * r + c];
                    if g > 0 {
                        m[2 * g + r][2 * g - 2 + c] = self.lower[g][2 * r + c];
                    }
                    if g + 1 < n {
                        m[2 * g + r][2 * g + 2 + c] = self.upper[g][2 * r + c];
                    }
                }
            }
        }
        m
    }
}

#[inline]
fn mul(b: &Block, x: [f64; 2]) -> [f64; 2] {
    [b[0] * x[0] + b[1] * x[1], b[2] * x[0] + b[3] * x[1]]
}

#[inline]
fn matmul(a: &Block, b: &Block) -> Block {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn inverse(b: &Block) -> Option<Block> {
    let det = b[0] * b[3] - b[1] * b[2];
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(det.abs() > 1e-300 && det.abs() > 1e-14 * scale * scale) {
        return None;
    }
    Some([b[3] / det, -b[1] / det, -b[2] / det, b[0] / det])
}

/// Pre-factored Crank-Nicolson step (I - h/2 L) ψ' = (I + h/2 L) ψ + h s.
#[derive(Debug, Clone, PartialEq)]
pub struct CnFactor {
    pub h: f64,
    // explicit half: h/2 L
    el: Vec<Block>,
    ed: Vec<Block>,
    eu: Vec<Block>,
    // forward elimination multipliers A_lower[g] D'^{-1}_{g-1}
    m: Vec<Block>,
    // D'^{-1}_g and D'^{-1}_g A_upper[g]
    p: Vec<Block>,
    q: Vec<Block>,
}

impl CnFactor {
    pub fn new(op: &EnergyOperator, h: f64) -> Result<Self, EnergyError> {
        let n = op.groups();
        let k = 0.5 * h;
        let scale = |b: &Block, s: f64| -> Block { [b[0] * s, b[1] * s, b[2] * s, b[3] * s] };
        let el: Vec<Block> = op.lower.iter().map(|b| scale(b, k)).collect();
        let ed: Vec<Block> = op.diag.iter().map(|b| scale(b, k)).collect();
        let eu: Vec<Block> = op.upper.iter().map(|b| scale(b, k)).collect();
        let mut m = vec![[0.0; 4]; n];
        let mut p = vec![[0.0; 4]; n];
        let mut q = vec![[0.0; 4]; n];
        let mut prev_q: Block = [0.0; 4];
        for g in 0..n {
            let a_diag = [1.0 - ed[g][0], -ed[g][1], -ed[g][2], 1.0 - ed[g][3]];
            let a_lower = scale(&el[g], -1.0);
            let a_upper = scale(&eu[g], -1.0);
            let mut dp = a_diag;
            if g > 0 {
                // D'_g = D_g - A_lower[g] D'^{-1}_{g-1} A_upper[g-1]
                m[g] = matmul(&a_lower, &p[g - 1]);
                let corr = matmul(&a_lower, &prev_q);
                for t in 0..4 {
                    dp[t] -= corr[t];
                }
            }
            p[g] = inverse(&dp).ok_or(EnergyError::Singular { group: g })?;
            q[g] = matmul(&p[g], &a_upper);
            prev_q = q[g];
        }
        Ok(Self { h, el, ed, eu, m, p, q })
    }

    pub fn groups(&self) -> usize {
        self.p.len()
    }

    /// Advances one phase point in place; `x` is interleaved (a_0, b_0, ...),
    /// `src` holds group-average source values (slope source is zero).
    pub fn step_point(&self, x: &mut [f64], src: Option<&[f64]>) {
        let n = self.groups();
        let old = x.to_vec();
        let mut r_prev = [0.0; 2];
        for g in 0..n {
            let xg = [old[2 * g], old[2 * g + 1]];
            let d = mul(&self.ed[g], xg);
            let mut r = [xg[0] + d[0], xg[1] + d[1]];
            if g > 0 {
                let l = mul(&self.el[g], [old[2 * g - 2], old[2 * g - 1]]);
                r = [r[0] + l[0], r[1] + l[1]];
                let e = mul(&self.m[g], r_prev);
                r = [r[0] - e[0], r[1] - e[1]];
            }
            if g + 1 < n {
                let u = mul(&self.eu[g], [old[2 * g + 2], old[2 * g + 3]]);
                r = [r[0] + u[0], r[1] + u[1]];
            }
            if let Some(s) = src {
                r[0] += self.h * s[g];
            }
            x[2 * g] = r[0];
            x[2 * g + 1] = r[1];
            r_prev = r;
        }
        let mut next = [0.0; 2];
        for g in (0..n).rev() {
            let pr = mul(&self.p[g], [x[2 * g], x[2 * g + 1]]);
            let qx = mul(&self.q[g], next);
            next = [pr[0] - qx[0], pr[1] - qx[1]];
            x[2 * g] = next[0];
            x[2 * g + 1] = next[1];
        }
    }
}

/// Advances many phase points at once. `avg[g]` and `slope[g]` are the rows of
/// the two moments for group g, all of equal length n; point k uses
/// `factors[medium[k % medium.len()]]`. `src[g]`, if given, is the
/// group-average source row. `scratch` must hold 4n values.
pub fn step_rows(
    factors: &[&CnFactor],
    medium: &[u16],
    avg: &mut [&mut [f64]],
    slope: &mut [&mut [f64]],
    src: Option<&[&[f64]]>,
    scratch: &mut Vec<f64>,
) {
    let n_groups = avg.len();
    if n_groups == 0 {
        return;
    }
    let n = avg[0].len();
    let period = medium.len();
    scratch.resize(4 * n, 0.0);
    // old values of group g-1, and the eliminated rhs of group g-1 lives in the rows
    let (old_prev, rest) = scratch.split_at_mut(2 * n);
    let old_cur = &mut rest[..2 * n];
    let single = factors.len() == 1;

    for g in 0..n_groups {
        let (lo_a, hi_a) = avg.split_at_mut(g + 1);
        let (lo_b, hi_b) = slope.split_at_mut(g + 1);
        let (done_a, cur_a) = lo_a.split_at_mut(g);
        let (done_b, cur_b) = lo_b.split_at_mut(g);
        let (ca, cb) = (&mut *cur_a[0], &mut *cur_b[0]);
        // stash old values of group g before overwriting
        old_cur[..n].copy_from_slice(ca);
        old_cur[n..].copy_from_slice(cb);
        let above = hi_a.first().map(|a| (&**a, &*hi_b[0]));
        let below = done_a.last().map(|a| (&**a, &*done_b[g - 1]));
        for k in 0..n {
            let f = if single { factors[0] } else { factors[medium[k % period] as usize] };
            let xa = old_cur[k];
            let xb = old_cur[n + k];
            let ed = &f.ed[g];
            let mut r0 = xa + ed[0] * xa + ed[1] * xb;
            let mut r1 = xb + ed[2] * xa + ed[3] * xb;
            if let Some((ua, ub)) = above {
                let eu = &f.eu[g];
                r0 += eu[0] * ua[k] + eu[1] * ub[k];
                r1 += eu[2] * ua[k] + eu[3] * ub[k];
            }
            if let Some((qa, qb)) = below {
                let el = &f.el[g];
                let (pa, pb) = (old_prev[k], old_prev[n + k]);
                r0 += el[0] * pa + el[1] * pb;
                r1 += el[2] * pa + el[3] * pb;
                let m = &f.m[g];
                r0 -= m[0] * qa[k] + m[1] * qb[k];
                r1 -= m[2] * qa[k] + m[3] * qb[k];
            }
            if let Some(s) = src {
                r0 += f.h * s[g][k];
            }
            ca[k] = r0;
            cb[k] = r1;
        }
        old_prev.copy_from_slice(old_cur);
    }
    // back substitution from the top group
    for g in (0..n_groups).rev() {
        let (lo_a, hi_a) = avg.split_at_mut(g + 1);
        let (lo_b, hi_b) = slope.split_at_mut(g + 1);
        let (ra, rb) = (&mut *lo_a[g], &mut *lo_b[g]);
        let next = if g + 1 < n_groups { Some((&*hi_a[0], &*hi_b[0])) } else { None };
        for k in 0..n {
            let f = if single { factors[0] } else { factors[medium[k % period] as usize] };
            let p = &f.p[g];
            let (xa, xb) = (ra[k], rb[k]);
            let mut y0 = p[0] * xa + p[1] * xb;
            let mut y1 = p[2] * xa + p[3] * xb;
            if let Some((na, nb)) = next {
                let q = &f.q[g];
                y0 -= q[0] * na[k] + q[1] * nb[k];
                y1 -= q[2] * na[k] + q[3] * nb[k];
            }
            ra[k] = y0;
            rb[k] = y1;
        }
    }
}
