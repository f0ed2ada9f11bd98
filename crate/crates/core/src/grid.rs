//! Discretization grids, the phase-space field container and the voxelized
//! material map.
//!
//! Field layout is moment-major, then energy group, then angular node (i, j),
//! then lateral cell (p, q), so each (moment, group) block is contiguous and
//! the lateral index runs fastest.

use thiserror::Error;

use crate::physics::Material;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid '{axis}': {reason}")]
    Invalid { axis: &'static str, reason: String },
    #[error("point ({x}, {y}, {z}) lies outside the computational domain")]
    OutOfDomain { x: f64, y: f64, z: f64 },
    #[error("field blob is malformed: {0}")]
    BadBlob(String),
    #[error("geometry: {0}")]
    Geometry(String),
}

fn invalid(axis: &'static str, reason: impl Into<String>) -> GridError {
    GridError::Invalid { axis, reason: reason.into() }
}

/// Energy groups, lowest first.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    edges: Vec<f64>,
}

impl EnergyGrid {
    pub fn uniform(e_min: f64, e_max: f64, groups: usize) -> Result<Self, GridError> {
        if groups == 0 {
            return Err(invalid("energy", "need at least one group"));
        }
        if !(e_min > 0.0 && e_max > e_min) {
            return Err(invalid("energy", format!("bad range [{e_min}, {e_max}]")));
        }
        let w = (e_max - e_min) / groups as f64;
        let mut edges: Vec<f64> = (0..=groups).map(|k| e_min + w * k as f64).collect();
        edges[groups] = e_max;
        Ok(Self { edges })
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self, GridError> {
        if edges.len() < 2 {
            return Err(invalid("energy", "need at least two edges"));
        }
        if !(edges[0] > 0.0) || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("energy", "edges must be positive and strictly increasing"));
        }
        Ok(Self { edges })
    }

    pub fn groups(&self) -> usize {
        self.edges.len() - 1
    }
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }
    pub fn lower(&self, g: usize) -> f64 {
        self.edges[g]
    }
    pub fn upper(&self, g: usize) -> f64 {
        self.edges[g + 1]
    }
    pub fn center(&self, g: usize) -> f64 {
        0.5 * (self.edges[g] + self.edges[g + 1])
    }
    pub fn width(&self, g: usize) -> f64 {
        self.edges[g + 1] - self.edges[g]
    }
    pub fn centers(&self) -> Vec<f64> {
        (0..self.groups()).map(|g| self.center(g)).collect()
    }
    pub fn widths(&self) -> Vec<f64> {
        (0..self.groups()).map(|g| self.width(g)).collect()
    }
    pub fn min(&self) -> f64 {
        self.edges[0]
    }
    pub fn max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Group containing `e`; the top edge belongs to the last group.
    pub fn group_of(&self, e: f64) -> Option<usize> {
        if e < self.min() || e > self.max() {
            return None;
        }
        let k = self.edges.partition_point(|&x| x <= e);
        Some(k.saturating_sub(1).min(self.groups() - 1))
    }
}

/// Uniform cell-centred axis on [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub cells: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Axis {
    pub fn new(cells: usize, lo: f64, hi: f64) -> Result<Self, GridError> {
        if cells == 0 || !(hi > lo) {
            return Err(invalid("lateral", format!("{cells} cells on [{lo}, {hi}]")));
        }
        Ok(Self { cells, lo, hi })
    }
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }
    pub fn center(&self, p: usize) -> f64 {
        self.lo + (p as f64 + 0.5) * self.width()
    }
    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|p| self.center(p)).collect()
    }
    /// Cell containing `t`; the upper boundary belongs to the last cell.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !(t >= self.lo && t <= self.hi) {
            return None;
        }
        Some((((t - self.lo) / self.width()) as usize).min(self.cells - 1))
    }
}

/// Angular tangent axis on (-1, 1) split into `intervals` pieces; only the
/// interior nodes carry unknowns (the end nodes are homogeneous Dirichlet).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularAxis {
    pub intervals: usize,
}

impl AngularAxis {
    pub fn new(intervals: usize) -> Result<Self, GridError> {
        if intervals < 2 {
            return Err(invalid("angular", "need at least 2 intervals (one interior node)"));
        }
        Ok(Self { intervals })
    }
    pub fn spacing(&self) -> f64 {
        2.0 / self.intervals as f64
    }
    pub fn nodes(&self) -> usize {
        self.intervals - 1
    }
    /// Tangent value of interior node `i` (0-based; node 0 sits at -1 + Δu).
    pub fn node(&self, i: usize) -> f64 {
        -1.0 + (i + 1) as f64 * self.spacing()
    }
    pub fn node_values(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.node(i)).collect()
    }
}

/// Depth axis [0, length] split into uniform slabs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthAxis {
    pub slabs: usize,
    pub length: f64,
}

impl DepthAxis {
    pub fn new(slabs: usize, length: f64) -> Result<Self, GridError> {
        if slabs == 0 || !(length > 0.0) {
            return Err(invalid("depth", format!("{slabs} slabs over {length} cm")));
        }
        Ok(Self { slabs, length })
    }
    pub fn step(&self) -> f64 {
        self.length / self.slabs as f64
    }
    pub fn midpoint(&self, s: usize) -> f64 {
        (s as f64 + 0.5) * self.step()
    }
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0 && x <= self.length) {
            return None;
        }
        Some(((x / self.step()) as usize).min(self.slabs - 1))
    }
}

/// All discretization grids of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub energy: EnergyGrid,
    pub depth: DepthAxis,
    pub y: Axis,
    pub z: Axis,
    pub u: AngularAxis,
    pub v: AngularAxis,
}

impl Grids {
    pub fn shape(&self) -> FieldShape {
        FieldShape {
            groups: self.energy.groups(),
            nu: self.u.nodes(),
            nv: self.v.nodes(),
            ny: self.y.cells,
            nz: self.z.cells,
        }
    }
    /// Δu Δv Δy Δz.
    pub fn cell_measure(&self) -> f64 {
        self.u.spacing() * self.v.spacing() * self.y.width() * self.z.width()
    }
    pub fn voxel_volume(&self) -> f64 {
        self.depth.step() * self.y.width() * self.z.width()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldShape {
    pub groups: usize,
    pub nu: usize,
    pub nv: usize,
    pub ny: usize,
    pub nz: usize,
}

impl FieldShape {
    pub fn n_ang(&self) -> usize {
        self.nu * self.nv
    }
    pub fn n_lat(&self) -> usize {
        self.ny * self.nz
    }
    /// Length of one (moment, group) block.
    pub fn block(&self) -> usize {
        self.n_ang() * self.n_lat()
    }
    /// Length of one moment.
    pub fn moment_len(&self) -> usize {
        self.groups * self.block()
    }
    pub fn len(&self) -> usize {
        2 * self.moment_len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Flat index for moment `l` ∈ {0, 1}, group `g`, angular node (i, j), lateral cell (p, q).
    #[inline]
    pub fn index(&self, l: usize, g: usize, i: usize, j: usize, p: usize, q: usize) -> usize {
        (((l * self.groups + g) * self.nu + i) * self.nv + j) * self.n_lat() + p * self.nz + q
    }
}

/// Legendre moments (group average and slope) of the phase-space density.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    shape: FieldShape,
    data: Vec<f64>,
}

/// Zeroth and first energy moments of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// Σ ψ¹ ΔE ΔyΔzΔuΔv (particles).
    pub mass: f64,
    /// Σ ΔE (E_g ψ¹ + ΔE ψ²/6) ΔyΔzΔuΔv (MeV).
    pub energy: f64,
}

const BLOB_MAGIC: &[u8; 4] = b"LBPF";

impl PhaseField {
    pub fn zeros(shape: FieldShape) -> Self {
        Self { shape, data: vec![0.0; shape.len()] }
    }
    pub fn from_vec(shape: FieldShape, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != shape.len() {
            return Err(GridError::BadBlob(format!("expected {} values, got {}", shape.len(), data.len())));
        }
        Ok(Self { shape, data })
    }
    pub fn shape(&self) -> FieldShape {
        self.shape
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn get(&self, l: usize, g: usize, i: usize, j: usize, p: usize, q: usize) -> f64 {
        self.data[self.shape.index(l, g, i, j, p, q)]
    }
    pub fn set(&mut self, l: usize, g: usize, i: usize, j: usize, p: usize, q: usize, value: f64) {
        let k = self.shape.index(l, g, i, j, p, q);
        self.data[k] = value;
    }
    pub fn block(&self, l: usize, g: usize) -> &[f64] {
        let b = self.shape.block();
        let start = (l * self.shape.groups + g) * b;
        &self.data[start..start + b]
    }
    pub fn block_mut(&mut self, l: usize, g: usize) -> &mut [f64] {
        let b = self.shape.block();
        let start = (l * self.shape.groups + g) * b;
        &mut self.data[start..start + b]
    }
    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }
    pub fn copy_from(&mut self, other: &PhaseField) {
        assert_eq!(self.shape, other.shape);
        self.data.copy_from_slice(&other.data);
    }
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn moments(&self, grids: &Grids) -> Moments {
        let b = self.shape.block();
        let mut mass = 0.0;
        let mut energy = 0.0;
        for g in 0..self.shape.groups {
            let w = grids.energy.width(g);
            let eg = grids.energy.center(g);
            let s1: f64 = self.data[g * b..(g + 1) * b].iter().sum();
            let off = self.shape.moment_len();
            let s2: f64 = self.data[off + g * b..off + (g + 1) * b].iter().sum();
            mass += w * s1;
            energy += w * (eg * s1 + w * s2 / 6.0);
        }
        let m = grids.cell_measure();
        Moments { mass: mass * m, energy: energy * m }
    }

    /// Energy carried per lateral column (MeV), indexed p * nz + q.
    pub fn column_energy(&self, grids: &Grids) -> Vec<f64> {
        let s = self.shape;
        let n_lat = s.n_lat();
        let mut out = vec![0.0; n_lat];
        for g in 0..s.groups {
            let w = grids.energy.width(g);
            let c1 = w * grids.energy.center(g);
            let c2 = w * w / 6.0;
            let b1 = self.block(0, g);
            let b2 = self.block(1, g);
            for a in 0..s.n_ang() {
                let r1 = &b1[a * n_lat..(a + 1) * n_lat];
                let r2 = &b2[a * n_lat..(a + 1) * n_lat];
                for k in 0..n_lat {
                    out[k] += c1 * r1[k] + c2 * r2[k];
                }
            }
        }
        let m = grids.cell_measure();
        out.iter_mut().for_each(|x| *x *= m);
        out
    }

    /// Per-group integral of moment `l` over y, z, u, v.
    pub fn integrated(&self, l: usize, grids: &Grids) -> Vec<f64> {
        let m = grids.cell_measure();
        (0..self.shape.groups).map(|g| self.block(l, g).iter().sum::<f64>() * m).collect()
    }

    /// Little-endian binary encoding; exact round trip through `from_bytes`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 5 * 8 + self.data.len() * 8);
        out.extend_from_slice(BLOB_MAGIC);
        let s = self.shape;
        for d in [s.groups, s.nu, s.nv, s.ny, s.nz] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GridError> {
        if bytes.len() < 44 || &bytes[..4] != BLOB_MAGIC {
            return Err(GridError::BadBlob("missing header".into()));
        }
        let dim = |k: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[4 + 8 * k..12 + 8 * k]);
            u64::from_le_bytes(b) as usize
        };
        let shape = FieldShape { groups: dim(0), nu: dim(1), nv: dim(2), ny: dim(3), nz: dim(4) };
        let body = &bytes[44..];
        if body.len() != shape.len() * 8 {
            return Err(GridError::BadBlob(format!("payload of {} bytes for {} values", body.len(), shape.len())));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { shape, data })
    }
}

/// A material at a particular density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    pub material: usize,
    pub density: f64,
}

/// Axis-aligned box [lo, hi] in (x, y, z) filled with one material.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub material: usize,
    /// Overrides the material's nominal density when set.
    pub density: Option<f64>,
}

impl Region {
    fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        let p = [x, y, z];
        (0..3).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }
}

/// Background material with boxes painted on top; later boxes win.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub materials: Vec<Material>,
    pub background: usize,
    pub regions: Vec<Region>,
}

impl Geometry {
    pub fn homogeneous(material: Material) -> Self {
        Self { materials: vec![material], background: 0, regions: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.background >= self.materials.len() {
            return Err(GridError::Geometry("background material index out of range".into()));
        }
        for (k, r) in self.regions.iter().enumerate() {
            if r.material >= self.materials.len() {
                return Err(GridError::Geometry(format!("region {k} references unknown material")));
            }
            if (0..3).any(|a| !(r.hi[a] > r.lo[a])) {
                return Err(GridError::Geometry(format!("region {k} has an empty extent")));
            }
            if let Some(d) = r.density {
                if !(d > 0.0) {
                    return Err(GridError::Geometry(format!("region {k} density must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn medium_at(&self, x: f64, y: f64, z: f64) -> Medium {
        let mut out = Medium { material: self.background, density: self.materials[self.background].density };
        for r in &self.regions {
            if r.contains(x, y, z) {
                out = Medium {
                    material: r.material,
                    density: r.density.unwrap_or(self.materials[r.material].density),
                };
            }
        }
        out
    }
}

/// Medium index per voxel, sampled at voxel centres so that properties are
/// frozen across each depth slab.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub media: Vec<Medium>,
    voxels: Vec<u16>,
    depth: DepthAxis,
    y: Axis,
    z: Axis,
}

impl DensityField {
    pub fn build(geometry: &Geometry, grids: &Grids) -> Result<Self, GridError> {
        geometry.validate()?;
        let (nx, ny, nz) = (grids.depth.slabs, grids.y.cells, grids.z.cells);
        let mut media: Vec<Medium> = Vec::new();
        let mut voxels = Vec::with_capacity(nx * ny * nz);
        for s in 0..nx {
            let x = grids.depth.midpoint(s);
            for p in 0..ny {
                let y = grids.y.center(p);
                for q in 0..nz {
                    let m = geometry.medium_at(x, y, grids.z.center(q));
                    let k = match media
                        .iter()
                        .position(|o| o.material == m.material && o.density.to_bits() == m.density.to_bits())
                    {
                        Some(k) => k,
                        None => {
                            media.push(m);
                            media.len() - 1
                        }
                    };
                    if k > u16::MAX as usize {
                        return Err(GridError::Geometry("too many distinct media".into()));
                    }
                    voxels.push(k as u16);
                }
            }
        }
        Ok(Self { media, voxels, depth: grids.depth, y: grids.y, z: grids.z })
    }

    /// Medium indices of slab `s`, indexed p * nz + q.
    pub fn slab(&self, s: usize) -> &[u16] {
        let n = self.y.cells * self.z.cells;
        &self.voxels[s * n..(s + 1) * n]
    }

    pub fn medium(&self, s: usize, p: usize, q: usize) -> Medium {
        self.media[self.slab(s)[p * self.z.cells + q] as usize]
    }

    /// Medium at a point of the domain.
    pub fn material_at(&self, x: f64, y: f64, z: f64) -> Result<Medium, GridError> {
        match (self.depth.locate(x), self.y.locate(y), self.z.locate(z)) {
            (Some(s), Some(p), Some(q)) => Ok(self.medium(s, p, q)),
            _ => Err(GridError::OutOfDomain { x, y, z }),
        }
    }
}
