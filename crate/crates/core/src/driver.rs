//! Slab-by-slab depth marching of the scatter-order hierarchy.
//!
//! All scatter orders advance together through each slab: order k is stepped
//! after order k-1, so the source it needs at the end of the step is already
//! available. Energy removed from the last order is deposited locally.

use rayon::prelude::*;
use thiserror::Error;

use crate::angular_diffusion::AngularDiffusion;
use crate::beam::{inlet_field, BeamError, BeamSpec};
use crate::catastrophic::{CatastrophicError, KernelParams, SourceOperator};
use crate::energy_dg::{step_rows, CnFactor, EnergyCoefficients, EnergyError, EnergyOperator, DEFAULT_PENALTY};
use crate::grid::{DensityField, Geometry, GridError, Grids, PhaseField};
use crate::lateral_transport::LateralTransport;
use crate::physics::{build_tables, PhysicsError, PhysicsTables};
use crate::splitting::{split_step, SourceAt, SplitOrder, Stage};
use crate::tally::{DoseTally, EnergyBudget};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Catastrophic(#[from] CatastrophicError),
    #[error("energy operator for medium {medium}: {source}")]
    Energy { medium: usize, source: EnergyError },
    #[error("non-finite values in scatter order {order} after slab {slab}")]
    NonFinite { slab: usize, order: usize },
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Physical and discretization description of one run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grids: Grids,
    pub geometry: Geometry,
    pub beam: BeamSpec,
    /// Removal cross section per material and group (1/cm at the material's
    /// nominal density); `None` means no catastrophic interactions.
    pub removal: Vec<Option<Vec<f64>>>,
    /// Transition kernels for the scatter source.
    pub kernels: KernelParams,
}

impl Problem {
    /// Homogeneous-material problem without catastrophic interactions.
    pub fn primary_only(grids: Grids, geometry: Geometry, beam: BeamSpec) -> Self {
        let n = geometry.materials.len();
        let g = grids.energy.groups();
        Self { grids, geometry, beam, removal: vec![None; n], kernels: KernelParams::synthetic(g) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub split: SplitOrder,
    /// Highest scatter order tracked (0 = primaries only).
    pub max_order: usize,
    pub energy: bool,
    pub lateral: bool,
    pub angular: bool,
    pub penalty: f64,
    /// Stop once the in-flight energy of all orders falls below this fraction
    /// of the injected energy.
    pub termination: Option<f64>,
    /// Courant limit for the explicit lateral scheme.
    pub explicit_limit: f64,
    pub record_stages: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            split: SplitOrder::Strang,
            max_order: 1,
            energy: true,
            lateral: true,
            angular: true,
            penalty: DEFAULT_PENALTY,
            termination: Some(1e-10),
            explicit_limit: 0.5,
            record_stages: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub slab: usize,
    pub order: usize,
    pub stage: Stage,
    pub step: f64,
}

/// Field of one scatter order at slab boundary `boundary` (depth = boundary · Δx).
pub struct SlabTrace<'a> {
    pub order: usize,
    pub boundary: usize,
    pub field: &'a PhaseField,
    pub grids: &'a Grids,
}

pub type Observer<'o> = &'o mut (dyn FnMut(&SlabTrace) + Send);

#[derive(Debug, Clone)]
pub struct Solution {
    pub tally: DoseTally,
    pub budget: EnergyBudget,
    pub stages: Vec<StageRecord>,
    /// Number of slabs marched before stopping.
    pub slabs_run: usize,
    pub terminated_early: bool,
    pub warnings: Vec<String>,
    /// Any stopping-power evaluation was clamped at the low-energy end.
    pub clamped_stopping: bool,
}

/// Operators of one medium.
struct MediumOps {
    /// One factor per energy-stage step fraction.
    energy: Vec<CnFactor>,
    /// Angular CN mode factors per step fraction, laid out [g][mode].
    angular: Vec<Vec<f64>>,
    /// Removal cross section at the medium's density (1/cm).
    removal: Vec<f64>,
}

/// Runs the solver on a dedicated pool of `workers` threads.
pub fn solve_with_workers(
    problem: &Problem,
    config: &SolverConfig,
    workers: usize,
    observer: Option<Observer>,
) -> Result<Solution, SolveError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SolveError::Pool(e.to_string()))?;
    pool.install(|| solve(problem, config, observer))
}

pub fn solve(problem: &Problem, config: &SolverConfig, mut observer: Option<Observer>) -> Result<Solution, SolveError> {
    let grids = &problem.grids;
    let shape = grids.shape();
    let (n_groups, n_ang, block) = (shape.groups, shape.n_ang(), shape.block());
    let h = grids.depth.step();
    if problem.removal.len() != problem.geometry.materials.len() {
        return Err(SolveError::Problem("one removal entry per material required".into()));
    }

    let density = DensityField::build(&problem.geometry, grids)?;
    let mut clamped_stopping = false;
    let mut tables: Vec<PhysicsTables> = Vec::new();
    for (m, mat) in problem.geometry.materials.iter().enumerate() {
        let mut t = build_tables(mat, &grids.energy)?;
        clamped_stopping |= t.clamped;
        if let Some(r) = &problem.removal[m] {
            if r.len() != n_groups || r.iter().any(|x| !(*x >= 0.0)) {
                return Err(SolveError::Problem(format!("removal table of '{}' is malformed", mat.name)));
            }
            t = t.with_removal(r.clone());
        }
        tables.push(t);
    }

    let energy_fracs = config.split.fractions(Stage::Energy);
    let angular_fracs = config.split.fractions(Stage::Angular);
    let angular = AngularDiffusion::new(&grids.u, &grids.v);
    let mut ops: Vec<MediumOps> = Vec::new();
    for (mi, med) in density.media.iter().enumerate() {
        let mat = &problem.geometry.materials[med.material];
        let t = &tables[med.material];
        let coeffs = EnergyCoefficients::from_tables(t, med.density, mat.density);
        let op = EnergyOperator::assemble(&grids.energy, &coeffs, config.penalty)
            .map_err(|source| SolveError::Energy { medium: mi, source })?;
        let energy = energy_fracs
            .iter()
            .map(|f| CnFactor::new(&op, f * h))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| SolveError::Energy { medium: mi, source })?;
        let angular = angular_fracs
            .iter()
            .map(|f| {
                (0..n_groups)
                    .flat_map(|g| angular.cn_factors(0.5 * t.transport_xs[g] * med.density, f * h))
                    .collect()
            })
            .collect();
        ops.push(MediumOps { energy, angular, removal: coeffs.removal });
    }

    let (inlet, beam_warnings) = inlet_field(&problem.beam, grids)?;
    let mut warnings: Vec<String> = beam_warnings.iter().map(|w| format!("{w:?}")).collect();
    if clamped_stopping {
        warnings.push("stopping power clamped to zero for some energies".into());
    }
    let injected = inlet.moments(grids).energy;
    let orders = config.max_order + 1;
    let mut fields: Vec<PhaseField> = (0..orders)
        .map(|k| if k == 0 { inlet.clone() } else { PhaseField::zeros(shape) })
        .collect();
    drop(inlet);

    let any_removal = problem.removal.iter().any(|r| r.as_ref().is_some_and(|v| v.iter().any(|&x| x > 0.0)));
    let source_op = if orders > 1 && any_removal && config.energy {
        Some(SourceOperator::new(&problem.kernels, grids)?)
    } else {
        None
    };
    let mut src_start: Vec<Vec<f64>> = Vec::new();
    let mut src_end: Vec<Vec<f64>> = Vec::new();
    if source_op.is_some() {
        src_start = vec![vec![0.0; n_groups * block]; orders];
        src_end = vec![vec![0.0; n_groups * block]; orders];
    }
    let mut src_mean = if source_op.is_some() && config.split == SplitOrder::StrangEnergyInner {
        vec![0.0; n_groups * block]
    } else {
        Vec::new()
    };

    let lateral = {
        let mut l = LateralTransport::new(grids.y.cells, grids.z.cells, grids.y.width(), grids.z.width());
        l.explicit_limit = config.explicit_limit;
        l
    };
    let u_nodes = grids.u.node_values();
    let v_nodes = grids.v.node_values();

    let mut tally = DoseTally::new(grids, &density);
    let mut budget = EnergyBudget { injected, ..Default::default() };
    let mut stages = Vec::new();

    if let Some(obs) = observer.as_mut() {
        for (k, f) in fields.iter().enumerate() {
            obs(&SlabTrace { order: k, boundary: 0, field: f, grids });
        }
    }

    let mut slabs_run = 0;
    let mut terminated_early = false;
    for s in 0..grids.depth.slabs {
        let slab_media = density.slab(s);
        let mut local: Vec<usize> = Vec::new();
        let local_idx: Vec<u16> = slab_media
            .iter()
            .map(|&m| match local.iter().position(|&x| x == m as usize) {
                Some(i) => i as u16,
                None => {
                    local.push(m as usize);
                    (local.len() - 1) as u16
                }
            })
            .collect();
        let removal_local: Vec<&[f64]> = local.iter().map(|&m| ops[m].removal.as_slice()).collect();

        for k in 0..orders {
            if let Some(sop) = &source_op {
                if k > 0 {
                    sop.build(&fields[k - 1], &removal_local, &local_idx, &mut src_end[k]);
                }
            }
            let has_source = source_op.is_some() && k > 0;
            if has_source && config.split == SplitOrder::StrangEnergyInner {
                for ((m, a), b) in src_mean.iter_mut().zip(&src_start[k]).zip(&src_end[k]) {
                    *m = 0.5 * (a + b);
                }
            }
            let field = &mut fields[k];
            let mut result: Result<(), SolveError> = Ok(());
            split_step(config.split, field, h, |stage, sub_h, at, field| {
                if config.record_stages {
                    stages.push(StageRecord { slab: s, order: k, stage, step: sub_h });
                }
                match stage {
                    Stage::Energy if config.energy => {
                        let fi = energy_fracs.iter().position(|f| f * h == sub_h).unwrap();
                        let factors: Vec<&CnFactor> = local.iter().map(|&m| &ops[m].energy[fi]).collect();
                        let src: Option<&[f64]> = if has_source {
                            Some(match at {
                                SourceAt::Start => &src_start[k],
                                SourceAt::End => &src_end[k],
                                SourceAt::Mean => &src_mean,
                            })
                        } else {
                            None
                        };
                        let before = field.column_energy(grids);
                        energy_stage(field, &factors, &local_idx, src, n_ang);
                        let after = field.column_energy(grids);
                        let dep: Vec<f64> = before.iter().zip(&after).map(|(b, a)| b - a).collect();
                        tally.add_slab(s, &dep);
                    }
                    Stage::Lateral if config.lateral => {
                        let before = field.moments(grids).energy;
                        lateral_stage(field, &lateral, &u_nodes, &v_nodes, sub_h);
                        budget.lateral_escape += before - field.moments(grids).energy;
                    }
                    Stage::Angular if config.angular => {
                        let fi = angular_fracs.iter().position(|f| f * h == sub_h).unwrap();
                        let factors: Vec<&[f64]> = local.iter().map(|&m| ops[m].angular[fi].as_slice()).collect();
                        let before = field.moments(grids).energy;
                        angular_stage(field, &angular, &factors, &local_idx, n_ang);
                        budget.angular_escape += before - field.moments(grids).energy;
                    }
                    _ => {}
                }
                if result.is_ok() && !flush_tiny(field) {
                    result = Err(SolveError::NonFinite { slab: s, order: k });
                }
            });
            result?;
        }
        if source_op.is_some() {
            std::mem::swap(&mut src_start, &mut src_end);
        }
        slabs_run = s + 1;
        if let Some(obs) = observer.as_mut() {
            for (k, f) in fields.iter().enumerate() {
                obs(&SlabTrace { order: k, boundary: s + 1, field: f, grids });
            }
        }
        if let Some(threshold) = config.termination {
            let in_flight: f64 = fields.iter().map(|f| f.moments(grids).energy).sum();
            if in_flight.abs() <= threshold * injected && s + 1 < grids.depth.slabs {
                terminated_early = true;
                break;
            }
        }
    }

    budget.deposited = tally.total();
    budget.in_flight = fields.iter().map(|f| f.moments(grids).energy).sum();
    Ok(Solution { tally, budget, stages, slabs_run, terminated_early, warnings, clamped_stopping })
}

/// Values below this magnitude (per injected proton) are set to zero after each
/// stage, so empty rows can be skipped and subnormals never arise.
const FLUSH: f64 = 1e-30;

/// Flushes tiny values to zero; returns false if any value is not finite.
fn flush_tiny(field: &mut PhaseField) -> bool {
    field
        .data_mut()
        .par_chunks_mut(4096)
        .map(|c| {
            let mut ok = true;
            for x in c {
                ok &= x.is_finite();
                if x.abs() < FLUSH {
                    *x = 0.0;
                }
            }
            ok
        })
        .reduce(|| true, |a, b| a && b)
}

/// Energy stage: one CN step of the block-tridiagonal energy system at every
/// (angular, lateral) point, parallel over angular nodes.
fn energy_stage(field: &mut PhaseField, factors: &[&CnFactor], medium: &[u16], src: Option<&[f64]>, n_ang: usize) {
    let shape = field.shape();
    let (n_groups, n_lat) = (shape.groups, shape.n_lat());
    let mut per_node: Vec<(Vec<&mut [f64]>, Vec<&mut [f64]>)> =
        (0..n_ang).map(|_| (Vec::with_capacity(n_groups), Vec::with_capacity(n_groups))).collect();
    for (idx, row) in field.data_mut().chunks_mut(n_lat).enumerate() {
        let l = idx / (n_groups * n_ang);
        let a = idx % n_ang;
        if l == 0 {
            per_node[a].0.push(row);
        } else {
            per_node[a].1.push(row);
        }
    }
    per_node.into_par_iter().enumerate().for_each_init(Vec::new, |scratch, (a, (mut avg, mut slope))| {
        let rows: Option<Vec<&[f64]>> =
            src.map(|s| (0..n_groups).map(|g| &s[(g * n_ang + a) * n_lat..(g * n_ang + a + 1) * n_lat]).collect());
        step_rows(factors, medium, &mut avg, &mut slope, rows.as_deref(), scratch);
    });
}

fn lateral_stage(field: &mut PhaseField, lateral: &LateralTransport, u: &[f64], v: &[f64], h: f64) {
    let shape = field.shape();
    let (n_lat, n_ang, nv) = (shape.n_lat(), shape.n_ang(), shape.nv);
    field.data_mut().par_chunks_mut(n_lat).enumerate().for_each_init(Vec::new, |scratch, (idx, row)| {
        let a = idx % n_ang;
        if row.iter().all(|&x| x == 0.0) {
            return;
        }
        lateral.step(row, u[a / nv], v[a % nv], h, scratch);
    });
}

fn angular_stage(
    field: &mut PhaseField,
    angular: &AngularDiffusion,
    factors: &[&[f64]],
    medium: &[u16],
    n_ang: usize,
) {
    let shape = field.shape();
    let n_groups = shape.groups;
    field
        .data_mut()
        .par_chunks_mut(shape.block())
        .enumerate()
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(buf, scratch), (idx, block)| {
                if block.iter().all(|&x| x == 0.0) {
                    return;
                }
                let g = idx % n_groups;
                let f: Vec<&[f64]> = factors.iter().map(|m| &m[g * n_ang..(g + 1) * n_ang]).collect();
                angular.step_block(block, &f, medium, buf, scratch);
            },
        );
}
