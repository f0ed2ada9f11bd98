//! Lateral advection ∂ψ/∂x + u ∂ψ/∂y + v ∂ψ/∂z = 0 on the (y, z) plane by a
//! MUSCL finite-volume scheme with the superbee limiter and zero-gradient
//! outflow boundaries.

/// Superbee limiter η(θ) = max(0, min(2θ, 1), min(θ, 2)).
pub fn superbee(theta: f64) -> f64 {
    0.0f64.max((2.0 * theta).min(1.0)).max(theta.min(2.0))
}

/// Limited slope at a cell from its upstream, own and downstream values:
/// δ = (right − center) η(θ) with θ = (center − left)/(right − center).
pub fn limited_slope(left: f64, center: f64, right: f64) -> f64 {
    let d = right - center;
    if d == 0.0 {
        return 0.0;
    }
    d * superbee((center - left) / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LateralScheme {
    /// Second-order SSP Runge-Kutta on the limited scheme.
    Explicit,
    /// Crank-Nicolson on the first-order upwind part, solved by directional
    /// sweeps, with the limiter correction taken from the old state.
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralTransport {
    pub ny: usize,
    pub nz: usize,
    pub dy: f64,
    pub dz: f64,
    /// Largest Courant number h(|u|/Δy + |v|/Δz) for which the explicit scheme is used.
    pub explicit_limit: f64,
}

impl LateralTransport {
    pub fn new(ny: usize, nz: usize, dy: f64, dz: f64) -> Self {
        Self { ny, nz, dy, dz, explicit_limit: 0.5 }
    }

    pub fn courant(&self, u: f64, v: f64, h: f64) -> f64 {
        h * (u.abs() / self.dy + v.abs() / self.dz)
    }

    pub fn scheme_for(&self, u: f64, v: f64, h: f64) -> LateralScheme {
        if self.courant(u, v, h) <= self.explicit_limit {
            LateralScheme::Explicit
        } else {
            LateralScheme::Implicit
        }
    }

    /// Semi-discrete right-hand side −∇·(velocity ψ) of a plane laid out [p][q].
    pub fn residual(&self, psi: &[f64], u: f64, v: f64, out: &mut [f64], limited: bool) {
        self.residual_with(psi, u, v, out, limited, &mut Vec::new());
    }

    fn residual_with(&self, psi: &[f64], u: f64, v: f64, out: &mut [f64], limited: bool, buf: &mut Vec<f64>) {
        out.iter_mut().for_each(|x| *x = 0.0);
        if u != 0.0 {
            for q in 0..self.nz {
                line_divergence(psi, out, self.ny, self.nz, q, u / self.dy, limited, buf);
            }
        }
        if v != 0.0 {
            for p in 0..self.ny {
                line_divergence(psi, out, self.nz, 1, p * self.nz, v / self.dz, limited, buf);
            }
        }
    }

    /// Advances one plane by depth step `h`; `scratch` is resized as needed.
    pub fn step(&self, psi: &mut [f64], u: f64, v: f64, h: f64, scratch: &mut Vec<f64>) {
        if u == 0.0 && v == 0.0 {
            return;
        }
        match self.scheme_for(u, v, h) {
            LateralScheme::Explicit => self.step_explicit(psi, u, v, h, scratch),
            LateralScheme::Implicit => self.step_implicit(psi, u, v, h, scratch),
        }
    }

    pub fn step_explicit(&self, psi: &mut [f64], u: f64, v: f64, h: f64, scratch: &mut Vec<f64>) {
        let n = psi.len();
        scratch.resize(2 * n, 0.0);
        let mut buf = Vec::with_capacity(2 * self.ny.max(self.nz));
        let (stage, rate) = scratch.split_at_mut(n);
        self.residual_with(psi, u, v, rate, true, &mut buf);
        for k in 0..n {
            stage[k] = psi[k] + h * rate[k];
        }
        self.residual_with(stage, u, v, rate, true, &mut buf);
        for k in 0..n {
            psi[k] = 0.5 * psi[k] + 0.5 * (stage[k] + h * rate[k]);
        }
    }

    pub fn step_implicit(&self, psi: &mut [f64], u: f64, v: f64, h: f64, scratch: &mut Vec<f64>) {
        let n = psi.len();
        scratch.resize(2 * n, 0.0);
        let mut buf = Vec::with_capacity(2 * self.ny.max(self.nz));
        let (rhs, tmp) = scratch.split_at_mut(n);
        // rhs = ψ + h/2 A_up ψ + h (R(ψ) − A_up ψ) = ψ + h R(ψ) − h/2 A_up ψ
        self.residual_with(psi, u, v, rhs, true, &mut buf);
        self.residual_with(psi, u, v, tmp, false, &mut buf);
        for k in 0..n {
            rhs[k] = psi[k] + h * rhs[k] - 0.5 * h * tmp[k];
        }
        let cy = 0.5 * h * u.abs() / self.dy;
        let cz = 0.5 * h * v.abs() / self.dz;
        let (ny, nz) = (self.ny, self.nz);
        for pi in 0..ny {
            let p = if u >= 0.0 { pi } else { ny - 1 - pi };
            let up_p = if u > 0.0 && p > 0 {
                Some(p - 1)
            } else if u < 0.0 && p + 1 < ny {
                Some(p + 1)
            } else {
                None
            };
            for qi in 0..nz {
                let q = if v >= 0.0 { qi } else { nz - 1 - qi };
                let up_q = if v > 0.0 && q > 0 {
                    Some(q - 1)
                } else if v < 0.0 && q + 1 < nz {
                    Some(q + 1)
                } else {
                    None
                };
                let mut diag = 1.0;
                let mut r = rhs[p * nz + q];
                if let Some(pp) = up_p {
                    diag += cy;
                    r += cy * psi[pp * nz + q];
                }
                if let Some(qq) = up_q {
                    diag += cz;
                    r += cz * psi[p * nz + qq];
                }
                psi[p * nz + q] = r / diag;
            }
        }
    }
}

/// Superbee-limited slope from the two one-sided differences; equal to
/// `limited_slope(x - a, x, x + b)`.
#[inline]
pub fn slope_from_differences(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        return 0.0;
    }
    let (aa, ab) = (a.abs(), b.abs());
    (2.0 * aa).min(ab).max(aa.min(2.0 * ab)).copysign(b)
}

/// Adds −c (F_{k+½} − F_{k−½}) along one line of `n` cells starting at
/// `offset` with the given stride; c = velocity / cell width. Ghost cells
/// copy the edge values.
fn line_divergence(
    psi: &[f64],
    out: &mut [f64],
    n: usize,
    stride: usize,
    offset: usize,
    c: f64,
    limited: bool,
    buf: &mut Vec<f64>,
) {
    buf.clear();
    buf.extend((0..n).map(|k| psi[offset + k * stride]));
    // slopes[k], stored after the line values
    buf.resize(2 * n, 0.0);
    let (x, slopes) = buf.split_at_mut(n);
    if limited {
        for k in 1..n.saturating_sub(1) {
            slopes[k] = slope_from_differences(x[k] - x[k - 1], x[k + 1] - x[k]);
        }
    }
    if c > 0.0 {
        let mut left = c * x[0];
        for k in 0..n {
            let right = c * (x[k] + 0.5 * slopes[k]);
            out[offset + k * stride] -= right - left;
            left = right;
        }
    } else {
        let mut right = c * x[n - 1];
        for k in (0..n).rev() {
            let left = c * (x[k] - 0.5 * slopes[k]);
            out[offset + k * stride] -= right - left;
            right = left;
        }
    }
}
