//! Refinement studies in depth or energy.
//!
//! For each level the solver records ψ_g^{l,s}, the integral of moment l over
//! (y, z, u, v) at every slab boundary s, summed over scatter orders. Two
//! successive levels are compared through
//!
//!   error_l = Σ_g Σ_{s≥1} |ψ_{g,coarse}^{l,s} − ψ_{g,fine}^{l,s}| Δx ΔE_g
//!
//! on the coarse mesh. In depth the fine boundary 2s matches coarse boundary
//! s. In energy the fine solution on the two halves of a coarse group is
//! projected onto the coarse linear basis.

use std::fmt;
use std::io::Write;
use std::path::Path;

use lbsplit::driver::SlabTrace;
use lbsplit::solve_with_workers;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyAxis {
    Depth,
    Energy,
}

impl StudyAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Depth => "depth",
            Self::Energy => "energy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    /// Every error vanished to round-off.
    Exact,
    Observed(f64),
    /// Some errors vanished and others did not.
    Undefined,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => write!(f, "exact"),
            Self::Observed(p) => write!(f, "{p:.4}"),
            Self::Undefined => write!(f, "undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    /// Coarse step of the compared pair (cm for depth, MeV for energy).
    pub step: f64,
    pub error1: f64,
    pub error2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub axis: StudyAxis,
    pub errors: Vec<LevelError>,
    pub order1: Order,
    pub order2: Order,
}

/// ψ_g^{l,s} for one level, indexed [s][l][g].
type Trajectory = Vec<[Vec<f64>; 2]>;

fn trajectory(cfg: &RunConfig, workers: usize) -> Result<Trajectory, CliError> {
    let problem = cfg.problem()?;
    let mut solver = cfg.solver_config();
    solver.termination = None;
    let n_groups = problem.grids.energy.groups();
    let mut traj: Trajectory = vec![[vec![0.0; n_groups], vec![0.0; n_groups]]; problem.grids.depth.slabs + 1];
    let mut obs = |t: &SlabTrace| {
        for l in 0..2 {
            for (acc, x) in traj[t.boundary][l].iter_mut().zip(t.field.integrated(l, t.grids)) {
                *acc += x;
            }
        }
    };
    solve_with_workers(&problem, &solver, workers, Some(&mut obs))?;
    Ok(traj)
}

/// Projection of a fine linear pair (a, b), lower and upper half of a coarse
/// group, onto the coarse (average, slope) basis.
fn restrict(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.75 * (b[0] - a[0]) + 0.25 * (a[1] + b[1])]
}

/// Least-squares slope of ln(error) against ln(step).
fn fitted_order(steps: &[f64], errors: &[f64], scale: f64) -> Order {
    let tiny = 1e-13 * scale;
    if errors.iter().all(|&e| e <= tiny) {
        return Order::Exact;
    }
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Order::Undefined;
    }
    let n = steps.len() as f64;
    let xs: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Order::Observed(sxy / sxx)
}

/// Runs `levels` successive refinements of `axis`, starting from `base`.
pub fn study(base: &RunConfig, axis: StudyAxis, levels: usize, workers: usize) -> Result<Study, CliError> {
    if levels < 3 {
        return Err(CliError::Usage(format!("a convergence study needs at least 3 levels, got {levels}")));
    }
    base.validate()?;
    let mut configs = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut c = base.clone();
        let f = 1usize << k;
        match axis {
            StudyAxis::Depth => c.grid.slabs *= f,
            StudyAxis::Energy => c.grid.groups *= f,
        }
        configs.push(c);
    }
    let mut trajs = Vec::with_capacity(levels);
    for (k, c) in configs.iter().enumerate() {
        log::info!("{} level {}/{}: {} slabs, {} groups", axis.name(), k + 1, levels, c.grid.slabs, c.grid.groups);
        trajs.push(trajectory(c, workers)?);
    }

    let mut errors = Vec::new();
    let mut scale: f64 = 0.0;
    for k in 0..levels - 1 {
        let (coarse, fine) = (&trajs[k], &trajs[k + 1]);
        let c = &configs[k];
        let dx = c.grid.depth_cm / c.grid.slabs as f64;
        let de = (c.grid.energy_max_mev - c.grid.energy_min_mev) / c.grid.groups as f64;
        let mut e = [0.0; 2];
        let mut norm = 0.0;
        for s in 1..coarse.len() {
            for g in 0..c.grid.groups {
                let want = match axis {
                    StudyAxis::Depth => [fine[2 * s][0][g], fine[2 * s][1][g]],
                    StudyAxis::Energy => restrict(
                        [fine[s][0][2 * g], fine[s][1][2 * g]],
                        [fine[s][0][2 * g + 1], fine[s][1][2 * g + 1]],
                    ),
                };
                for l in 0..2 {
                    e[l] += (coarse[s][l][g] - want[l]).abs() * dx * de;
                }
                norm += coarse[s][0][g].abs() * dx * de;
            }
        }
        scale = scale.max(norm);
        let step = match axis {
            StudyAxis::Depth => dx,
            StudyAxis::Energy => de,
        };
        errors.push(LevelError { step, error1: e[0], error2: e[1] });
    }
    let steps: Vec<f64> = errors.iter().map(|e| e.step).collect();
    let e1: Vec<f64> = errors.iter().map(|e| e.error1).collect();
    let e2: Vec<f64> = errors.iter().map(|e| e.error2).collect();
    Ok(Study {
        axis,
        order1: fitted_order(&steps, &e1, scale),
        order2: fitted_order(&steps, &e2, scale),
        errors,
    })
}

impl Study {
    pub fn report(&self) -> String {
        let mut s = format!("{} refinement\n{:>12} {:>14} {:>14}\n", self.axis.name(), "step", "error1", "error2");
        for e in &self.errors {
            s.push_str(&format!("{:>12.6} {:>14.6e} {:>14.6e}\n", e.step, e.error1, e.error2));
        }
        s.push_str(&format!("observed order: error1 {}, error2 {}\n", self.order1, self.order2));
        s
    }

    /// Writes `convergence_<axis>.csv` (`step,error1,error2`) and
    /// `convergence_<axis>_order.csv` (`functional,order`).
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(format!("convergence_{}.csv", self.axis.name()));
        let mut text = String::from("step,error1,error2\n");
        for e in &self.errors {
            text.push_str(&format!("{},{},{}\n", e.step, e.error1, e.error2));
        }
        write_file(&path, &text)?;
        let path = dir.join(format!("convergence_{}_order.csv", self.axis.name()));
        write_file(&path, &format!("functional,order\nerror1,{}\nerror2,{}\n", self.order1, self.order2))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}
