//! Built-in scenarios.

use crate::config::*;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> RunConfig,
}

impl Preset {
    pub fn config(&self) -> RunConfig {
        (self.build)()
    }
}

fn water(removal: Removal) -> MaterialConfig {
    MaterialConfig { name: "water".into(), density: None, components: Vec::new(), removal }
}

fn grid(e_max: f64, groups: usize, depth: f64, slabs: usize, half: f64, cells: usize, intervals: usize) -> GridConfig {
    GridConfig {
        energy_min_mev: 1.0,
        energy_max_mev: e_max,
        groups,
        depth_cm: depth,
        slabs,
        lateral_half_width_cm: half,
        lateral_cells: cells,
        angular_intervals: intervals,
    }
}

fn beam(energy: f64) -> BeamConfig {
    BeamConfig { energy_mev: energy, sigma_e_mev: 1.0, sigma_y_cm: 0.3, sigma_z_cm: 0.3, sigma_u: 1e-6, sigma_v: 1e-6 }
}

fn desk(energy: f64, grid: GridConfig, spots: Vec<f64>) -> RunConfig {
    RunConfig {
        beam: beam(energy),
        grid,
        materials: vec![water(Removal::Synthetic)],
        geometry: GeometryConfig::default(),
        catastrophic: CatastrophicConfig { max_order: 1, kernels: None },
        solver: SolverOptions::default(),
        output: OutputConfig { spot_depths_cm: spots, workers: 1 },
    }
}

fn water_50() -> RunConfig {
    desk(50.0, grid(70.0, 138, 3.0, 150, 4.0, 16, 6), vec![0.0, 1.0, 2.0])
}

fn water_100() -> RunConfig {
    desk(100.0, grid(121.0, 240, 9.0, 180, 4.0, 16, 6), vec![0.0, 4.0, 7.0])
}

fn water_230() -> RunConfig {
    desk(230.0, grid(260.0, 259, 36.0, 360, 4.0, 16, 6), vec![0.0, 8.0, 16.0, 24.0, 32.0])
}

fn converge_50() -> RunConfig {
    let mut c = desk(50.0, grid(70.0, 138, 2.4, 120, 4.0, 4, 4), vec![0.0]);
    c.materials = vec![water(Removal::None)];
    c.catastrophic.max_order = 0;
    c.solver.termination = 0.0;
    c
}

fn bone_slab_100() -> RunConfig {
    let mut c = water_100();
    c.materials.push(MaterialConfig {
        name: "bone".into(),
        density: None,
        components: Vec::new(),
        removal: Removal::Synthetic,
    });
    c.geometry.regions.push(RegionConfig {
        material: "bone".into(),
        lo_cm: [2.0, -10.0, -10.0],
        hi_cm: [3.0, 10.0, 10.0],
        density: None,
    });
    c.output.spot_depths_cm = vec![0.0, 2.5, 5.0];
    c
}

fn full_100() -> RunConfig {
    let mut c = desk(100.0, grid(260.0, 500, 40.0, 4000, 4.0, 80, 20), vec![0.0, 4.0, 7.0]);
    c.output.workers = 8;
    c
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "water_50mev_desk", summary: "water, 50 MeV, 0.5 MeV groups, 0.02 cm slabs", build: water_50 },
    Preset { name: "water_100mev_desk", summary: "water, 100 MeV, 0.5 MeV groups, 0.05 cm slabs", build: water_100 },
    Preset { name: "water_230mev_desk", summary: "water, 230 MeV, 1 MeV groups, 0.1 cm slabs", build: water_230 },
    Preset {
        name: "water_50mev_converge",
        summary: "water, 50 MeV, coarse transverse mesh for refinement studies",
        build: converge_50,
    },
    Preset {
        name: "water_bone_100mev_desk",
        summary: "water with a 1 cm bone slab at 2 cm, 100 MeV",
        build: bone_slab_100,
    },
    Preset {
        name: "water_100mev_full",
        summary: "water, 100 MeV, 4000 x 80 x 80 mesh, 500 groups, 20 x 20 angles (hours)",
        build: full_100,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
