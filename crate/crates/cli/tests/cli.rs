use std::path::Path;
use std::process::{Command, Output};

use lbsplit::catastrophic::{read_kernel_params, write_removal_table, write_trajectories, TrajectoryRecord};
use lbsplit_cli::config::{Removal, RunConfig};
use lbsplit_cli::converge::{study, Order, StudyAxis};
use lbsplit_cli::error::CliError;
use lbsplit_cli::presets::{find, PRESETS};
use lbsplit_cli::run::{config_hash, execute};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};

const SMALL: &str = r#"
[beam]
energy_mev = 25.0

[grid]
energy_min_mev = 1.0
energy_max_mev = 31.0
groups = 30
depth_cm = 1.2
slabs = 24
lateral_half_width_cm = 2.0
lateral_cells = 8
angular_intervals = 4

[[materials]]
name = "water"
removal = "synthetic"

[output]
spot_depths_cm = [0.0, 0.5]
"#;

fn lbsplit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbsplit"))
        .args(args)
        .current_dir(dir)
        .env_remove("LBSPLIT_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_small(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

#[test]
fn presets_are_listed_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbsplit(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for p in PRESETS {
        assert!(text.contains(p.name));
        p.config().validate().unwrap();
        p.config().problem().unwrap();
    }
}

#[test]
fn preset_toml_round_trips() {
    for p in PRESETS {
        let cfg = p.config();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
    let dir = tempfile::tempdir().unwrap();
    let out = lbsplit(&["presets", "--preset", "water_bone_100mev_desk"], dir.path());
    assert!(out.status.success());
    let cfg = RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, find("water_bone_100mev_desk").unwrap().config());
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    assert!(matches!(RunConfig::from_toml(&format!("{SMALL}\n[extra]\nx = 1\n")), Err(CliError::Config(_))));
    let mut cfg = RunConfig::from_toml(SMALL).unwrap();
    cfg.materials[0].density = Some(-1.0);
    assert!(matches!(cfg.validate(), Err(CliError::Config(_))));

    let dir = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("name = \"water\"", "name = \"water\"\ndensity = -1.0");
    std::fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let out = lbsplit(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("density"));
}

#[test]
fn missing_files_exit_with_io_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = lbsplit(&["run", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));

    let with_table = SMALL.replace("removal = \"synthetic\"", "removal = { file = \"missing.csv\" }");
    std::fs::write(dir.path().join("t.toml"), with_table).unwrap();
    let out = lbsplit(&["run", "--config", "t.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_outputs_and_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    write_small(dir.path());
    for out in ["a", "b"] {
        let o = lbsplit(&["run", "--config", "small.toml", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["idd.csv", "spot_0.csv", "spot_0.5.csv", "ld.csv", "metrics.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
    let idd = std::fs::read_to_string(dir.path().join("a/idd.csv")).unwrap();
    assert!(idd.starts_with("x_cm,idd\n"));
    assert_eq!(idd.lines().count(), 25);
    let spot = std::fs::read_to_string(dir.path().join("a/spot_0.5.csv")).unwrap();
    assert!(spot.starts_with("y_cm,z_cm,dose\n"));
    assert_eq!(spot.lines().count(), 65);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    let cfg = RunConfig::load(&dir.path().join("small.toml")).unwrap();
    assert_eq!(manifest["config_sha256"], config_hash(&cfg));
    assert!(manifest["budget"]["relative_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(manifest["workers"], 1);
}

#[test]
fn worker_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    write_small(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_lbsplit"))
        .args(["run", "--config", "small.toml", "--out", "w", "--workers", "2"])
        .current_dir(dir.path())
        .env("LBSPLIT_WORKERS", "not-a-number")
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(dir.path().join("w/manifest.json")).unwrap();
    assert!(manifest.contains("\"workers\": 2"));

    let out = Command::new(env!("CARGO_BIN_EXE_lbsplit"))
        .args(["run", "--config", "small.toml", "--out", "w"])
        .current_dir(dir.path())
        .env("LBSPLIT_WORKERS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn workers_give_identical_tallies() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = execute(&cfg, &dir.path().join("1"), 1).unwrap();
    let b = execute(&cfg, &dir.path().join("3"), 3).unwrap();
    assert_eq!(a.solution.tally.energy, b.solution.tally.energy);
    assert_eq!(a.spots, b.spots);
}

#[test]
fn too_few_levels_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_small(dir.path());
    let out = lbsplit(&["converge", "--config", "small.toml", "--levels", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    assert!(matches!(study(&cfg, StudyAxis::Depth, 2, 1), Err(CliError::Usage(_))));
}

#[test]
fn zero_physics_converges_exactly() {
    let mut cfg = RunConfig::from_toml(SMALL).unwrap();
    cfg.solver.energy = false;
    cfg.solver.lateral = false;
    cfg.solver.angular = false;
    cfg.catastrophic.max_order = 0;
    for axis in [StudyAxis::Depth, StudyAxis::Energy] {
        let s = study(&cfg, axis, 3, 1).unwrap();
        assert_eq!(s.order1, Order::Exact);
        assert_eq!(s.order2, Order::Exact);
    }
}

#[test]
fn converge_writes_error_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_small(dir.path());
    let out = lbsplit(&["converge", "--config", "small.toml", "--axis", "depth", "--levels", "3", "--out", "c"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let errors = std::fs::read_to_string(dir.path().join("c/convergence_depth.csv")).unwrap();
    assert!(errors.starts_with("step,error1,error2\n"));
    assert_eq!(errors.lines().count(), 3);
    let order = std::fs::read_to_string(dir.path().join("c/convergence_depth_order.csv")).unwrap();
    assert!(order.starts_with("functional,order\nerror1,"));
    assert!(!dir.path().join("c/convergence_energy.csv").exists());
}

#[test]
fn fit_kernels_on_empty_file_warns_and_writes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write_small(dir.path());
    std::fs::write(dir.path().join("empty.csv"), "group,e_before_mev,e_after_mev,theta_rad\n").unwrap();
    let out = lbsplit(&["fit-kernels", "empty.csv", "--config", "small.toml", "--out", "k.csv"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("synthetic defaults"));
    let p = read_kernel_params(&dir.path().join("k.csv"), 30).unwrap();
    assert_eq!(p, lbsplit::catastrophic::KernelParams::synthetic(30));
}

#[test]
fn fitted_kernels_feed_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (loss, angle) = (Exp::new(0.2).unwrap(), Gamma::new(2.5, 1.0 / 25.0).unwrap());
    let mut records = Vec::new();
    for g in [10, 20] {
        for _ in 0..500 {
            let e = 10.0 + g as f64;
            records.push(TrajectoryRecord {
                group: g,
                e_before_mev: e,
                e_after_mev: e - loss.sample(&mut rng),
                theta_rad: f64::min(angle.sample(&mut rng), 3.0),
            });
        }
    }
    records.push(TrajectoryRecord { group: 99, e_before_mev: 5.0, e_after_mev: 4.0, theta_rad: 0.1 });
    write_trajectories(&dir.path().join("traj.csv"), &records).unwrap();
    write_small(dir.path());
    let out = lbsplit(&["fit-kernels", "traj.csv", "--config", "small.toml", "--out", "tables/k.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("outside 1..=30"));
    assert!(stderr.contains("group 1: 0 samples, skipped (global fit)"));

    let p = read_kernel_params(&dir.path().join("tables/k.csv"), 30).unwrap();
    assert!((p.lambda[9] - 0.2).abs() < 0.04);
    assert_eq!(p.lambda[0], p.lambda[29]);

    write_removal_table(&dir.path().join("tables/removal.csv"), &[0.01; 30]).unwrap();
    let cfg_text = SMALL.replace("removal = \"synthetic\"", "removal = { file = \"tables/removal.csv\" }")
        + "\n[catastrophic]\nmax_order = 1\nkernels = \"tables/k.csv\"\n";
    std::fs::write(dir.path().join("fitted.toml"), cfg_text).unwrap();
    let cfg = RunConfig::load(&dir.path().join("fitted.toml")).unwrap();
    assert_eq!(cfg.materials[0].removal, Removal::File(dir.path().join("tables/removal.csv")));
    let out = lbsplit(&["run", "--config", "fitted.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn readme_config_example_is_valid() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + "```toml\n".len();
    let len = readme[start..].find("```").unwrap();
    let cfg = RunConfig::from_toml(&readme[start..start + len]).unwrap();
    cfg.validate().unwrap();
    cfg.problem().unwrap();
    assert_eq!(cfg.materials.len(), 2);
    assert_eq!(cfg.geometry.regions[0].material, "phantom");
}
