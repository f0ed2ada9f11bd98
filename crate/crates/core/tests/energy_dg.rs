use approx::assert_relative_eq;
use lbsplit::energy_dg::*;
use lbsplit::grid::EnergyGrid;
use lbsplit::physics::{build_tables, Material};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Weak-form oracle: the operator applied to interleaved moments `x`, assembled
/// from basis evaluations, Gauss quadrature of the volume terms, upwind drift
/// fluxes and symmetric interior-penalty edge terms.
fn oracle_apply(grid: &EnergyGrid, c: &EnergyCoefficients, penalty: f64, x: &[f64]) -> Vec<f64> {
    let n = grid.groups();
    let rho = c.density;
    let (s, t) = (&c.stopping_edges, &c.straggling);
    let w = |g: usize| grid.width(g);
    let phi = |g: usize, k: usize, e: f64| if k == 0 { 1.0 } else { 2.0 * (e - grid.center(g)) / w(g) };
    let dphi = |g: usize, k: usize| if k == 0 { 0.0 } else { 2.0 / w(g) };
    let psi = |g: usize, e: f64| x[2 * g] + x[2 * g + 1] * phi(g, 1, e);
    let dpsi = |g: usize| x[2 * g + 1] * dphi(g, 1);

    let mut dt = vec![0.0; n + 1];
    for e in 1..n {
        dt[e] = (t[e] - t[e - 1]) / (grid.center(e) - grid.center(e - 1));
    }
    if n > 1 {
        dt[0] = dt[1];
        dt[n] = dt[n - 1];
    }
    let drift = |e: usize| s[e] + 0.5 * dt[e];

    let mut y = vec![0.0; 2 * n];
    for g in 0..n {
        let (lo, hi) = (grid.lower(g), grid.upper(g));
        for k in 0..2 {
            let mut acc = 0.0;
            for (xi, wt) in GL4 {
                let e = grid.center(g) + 0.5 * w(g) * xi;
                let frac = (e - lo) / w(g);
                let s_lin = s[g] + frac * (s[g + 1] - s[g]);
                let wbar = 0.25 * (dt[g] + dt[g + 1]);
                let f = -rho * (s_lin + wbar) * psi(g, e) * dphi(g, k)
                    - 0.5 * rho * t[g] * dpsi(g) * dphi(g, k)
                    - c.removal[g] * psi(g, e) * phi(g, k, e);
                acc += 0.5 * w(g) * wt * f;
            }
            let f_up = if g + 1 < n { rho * drift(g + 1) * psi(g + 1, hi) } else { 0.0 };
            let f_down = rho * drift(g) * psi(g, lo);
            acc += f_up * phi(g, k, hi) - f_down * phi(g, k, lo);
            y[2 * g + k] += acc;
        }
    }
    for e in 1..n {
        let (gl, gr) = (e - 1, e);
        let edge = grid.lower(gr);
        let te = 0.5 * (t[gl] + t[gr]);
        let sigma = penalty * te / (0.5 * (w(gl) + w(gr)));
        let mean_flux = 0.5 * te * (dpsi(gl) + dpsi(gr));
        let jump = psi(gl, edge) - psi(gr, edge);
        for k in 0..2 {
            let (jl, ml) = (phi(gl, k, edge), 0.5 * te * dphi(gl, k));
            y[2 * gl + k] += 0.5 * rho * (mean_flux * jl + ml * jump - sigma * jump * jl);
            let (jr, mr) = (-phi(gr, k, edge), 0.5 * te * dphi(gr, k));
            y[2 * gr + k] += 0.5 * rho * (mean_flux * jr + mr * jump - sigma * jump * jr);
        }
    }
    for g in 0..n {
        y[2 * g] /= w(g);
        y[2 * g + 1] /= w(g) / 3.0;
    }
    y
}

fn random_coefficients(rng: &mut ChaCha8Rng, n: usize) -> EnergyCoefficients {
    EnergyCoefficients {
        stopping_edges: (0..=n).map(|_| rng.gen_range(1.0..30.0)).collect(),
        straggling: (0..n).map(|_| rng.gen_range(0.05..0.2)).collect(),
        removal: (0..n).map(|_| rng.gen_range(0.0..0.05)).collect(),
        density: rng.gen_range(0.5..2.0),
    }
}

fn random_grid(rng: &mut ChaCha8Rng, n: usize) -> EnergyGrid {
    let mut edges = vec![1.0];
    for _ in 0..n {
        edges.push(edges.last().unwrap() + rng.gen_range(0.3..2.0));
    }
    EnergyGrid::from_edges(edges).unwrap()
}

fn apply(op: &EnergyOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    op.apply(x, &mut y);
    y
}

#[test]
fn zero_physics_gives_zero_operator() {
    let grid = EnergyGrid::uniform(1.0, 5.0, 4).unwrap();
    let c = EnergyCoefficients { stopping_edges: vec![0.0; 5], straggling: vec![0.0; 4], removal: vec![0.0; 4], density: 1.0 };
    let op = EnergyOperator::assemble(&grid, &c, DEFAULT_PENALTY).unwrap();
    assert_eq!(op, EnergyOperator::zero(4));
}

#[test]
fn constant_state_under_constant_stopping_power() {
    let grid = EnergyGrid::uniform(1.0, 4.0, 3).unwrap();
    let c = EnergyCoefficients { stopping_edges: vec![12.0; 4], straggling: vec![0.0; 3], removal: vec![0.0; 3], density: 1.0 };
    let op = EnergyOperator::assemble(&grid, &c, DEFAULT_PENALTY).unwrap();
    let x = [2.0, 0.0, 2.0, 0.0, 2.0, 0.0];
    let y = apply(&op, &x);
    let want = oracle_apply(&grid, &c, DEFAULT_PENALTY, &x);
    for (a, b) in y.iter().zip(&want) {
        assert!((a - b).abs() < 1e-14 * 50.0, "{a} vs {b}");
    }
    // inflow balances outflow everywhere except the top group, which has no inflow
    for k in 0..4 {
        assert!(y[k].abs() < 1e-12);
    }
    assert_relative_eq!(y[4], -12.0 * 2.0, epsilon = 1e-12);
}

#[test]
fn lower_edge_slope_flux_sign() {
    // With the lower-edge slope flux entering as −3ρV_d/ΔE instead, a constant
    // state picks up a spurious slope rate of −6ρSc/ΔE in every interior group.
    let grid = EnergyGrid::uniform(1.0, 5.0, 4).unwrap();
    let (s, c0, w) = (10.0, 1.5, 1.0);
    let c = EnergyCoefficients { stopping_edges: vec![s; 5], straggling: vec![0.0; 4], removal: vec![0.0; 4], density: 1.0 };
    let op = EnergyOperator::assemble(&grid, &c, DEFAULT_PENALTY).unwrap();
    let x = [c0, 0.0, c0, 0.0, c0, 0.0, c0, 0.0];
    let y = apply(&op, &x);
    let mut flipped = op.clone();
    for g in 0..4 {
        flipped.diag[g][2] -= 6.0 * s / w;
        flipped.diag[g][3] += 6.0 * s / w;
    }
    let yf = apply(&flipped, &x);
    for g in 1..3 {
        assert!(y[2 * g + 1].abs() < 1e-12);
        assert_relative_eq!(yf[2 * g + 1], -6.0 * s * c0 / w, epsilon = 1e-12);
    }
}

#[test]
fn random_operator_matches_weak_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for _ in 0..20 {
            let grid = random_grid(&mut rng, n);
            let c = random_coefficients(&mut rng, n);
            let op = EnergyOperator::assemble(&grid, &c, DEFAULT_PENALTY).unwrap();
            let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = apply(&op, &x);
            let want = oracle_apply(&grid, &c, DEFAULT_PENALTY, &x);
            let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-13 * scale, "n={n}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn dense_form_agrees_with_apply() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = random_grid(&mut rng, 4);
    let op = EnergyOperator::assemble(&grid, &random_coefficients(&mut rng, 4), 2.0).unwrap();
    let d = op.to_dense();
    let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = apply(&op, &x);
    for r in 0..8 {
        let v: f64 = (0..8).map(|c| d[r][c] * x[c]).sum();
        assert_relative_eq!(v, y[r], max_relative = 1e-14, epsilon = 1e-14);
    }
}

fn dense_cn(op: &EnergyOperator, h: f64, x: &[f64], src: Option<&[f64]>) -> Vec<f64> {
    let n = x.len();
    let l = DMatrix::from_fn(n, n, |r, c| op.to_dense()[r][c]);
    let id = DMatrix::<f64>::identity(n, n);
    let lhs = &id - &l * (0.5 * h);
    let mut rhs = (&id + &l * (0.5 * h)) * DVector::from_column_slice(x);
    if let Some(s) = src {
        for g in 0..n / 2 {
            rhs[2 * g] += h * s[g];
        }
    }
    lhs.lu().solve(&rhs).unwrap().iter().copied().collect()
}

#[test]
fn crank_nicolson_matches_dense_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=4 {
        for _ in 0..10 {
            let grid = random_grid(&mut rng, n);
            let op = EnergyOperator::assemble(&grid, &random_coefficients(&mut rng, n), 2.0).unwrap();
            let h = rng.gen_range(0.005..0.2);
            let f = CnFactor::new(&op, h).unwrap();
            let x0: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let src: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            for s in [None, Some(src.as_slice())] {
                let mut x = x0.clone();
                f.step_point(&mut x, s);
                let want = dense_cn(&op, h, &x0, s);
                for (a, b) in x.iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn zero_operator_step_is_identity() {
    let f = CnFactor::new(&EnergyOperator::zero(3), 0.1).unwrap();
    let mut x = vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0];
    let x0 = x.clone();
    f.step_point(&mut x, None);
    assert_eq!(x, x0);
}

#[test]
fn pure_removal_amplification() {
    let grid = EnergyGrid::uniform(1.0, 2.0, 1).unwrap();
    let sigma = 0.37;
    let c = EnergyCoefficients { stopping_edges: vec![0.0; 2], straggling: vec![0.0], removal: vec![sigma], density: 1.0 };
    let op = EnergyOperator::assemble(&grid, &c, 2.0).unwrap();
    let h = 0.25;
    let f = CnFactor::new(&op, h).unwrap();
    let mut x = vec![1.0, 1.0];
    f.step_point(&mut x, None);
    let factor = (1.0 - 0.5 * sigma * h) / (1.0 + 0.5 * sigma * h);
    assert_relative_eq!(x[0], factor, epsilon = 1e-14);
    assert_relative_eq!(x[1], factor, epsilon = 1e-14);
}

#[test]
fn drift_only_moves_downward() {
    let grid = EnergyGrid::uniform(1.0, 9.0, 8).unwrap();
    let c = EnergyCoefficients { stopping_edges: vec![5.0; 9], straggling: vec![0.0; 8], removal: vec![0.0; 8], density: 1.0 };
    let op = EnergyOperator::assemble(&grid, &c, 2.0).unwrap();
    let mut x = vec![0.0; 16];
    x[14] = 1.0;
    let y = apply(&op, &x);
    assert!(y[..12].iter().all(|&v| v == 0.0));
    let f = CnFactor::new(&op, 0.05).unwrap();
    let mut centroid_prev = grid.center(7);
    for _ in 0..20 {
        f.step_point(&mut x, None);
        let mass: f64 = (0..8).map(|g| x[2 * g]).sum();
        let centroid: f64 = (0..8).map(|g| x[2 * g] * grid.center(g) + x[2 * g + 1] / 6.0).sum::<f64>() / mass;
        assert!(centroid < centroid_prev);
        centroid_prev = centroid;
    }
}

#[test]
fn straggling_alone_conserves_interior_mass_and_energy() {
    // constant T: the SIPG term moves particles in energy without changing
    // the mass or mean energy of a state far from the domain ends
    let grid = EnergyGrid::uniform(1.0, 41.0, 40).unwrap();
    let c = EnergyCoefficients { stopping_edges: vec![0.0; 41], straggling: vec![0.1; 40], removal: vec![0.0; 40], density: 1.0 };
    let op = EnergyOperator::assemble(&grid, &c, 2.0).unwrap();
    let f = CnFactor::new(&op, 0.5).unwrap();
    let mut x = vec![0.0; 80];
    x[40] = 1.0;
    x[41] = 0.2;
    let moments = |x: &[f64]| {
        let m: f64 = (0..40).map(|g| x[2 * g]).sum();
        let e: f64 = (0..40).map(|g| x[2 * g] * grid.center(g) + x[2 * g + 1] / 6.0).sum();
        (m, e)
    };
    let (m0, e0) = moments(&x);
    for _ in 0..10 {
        f.step_point(&mut x, None);
    }
    let (m1, e1) = moments(&x);
    assert_relative_eq!(m1, m0, max_relative = 1e-12);
    assert_relative_eq!(e1, e0, max_relative = 1e-12);
    assert!(x[38].abs() > 1e-6, "neighbour group received particles");
}

#[test]
fn water_operator_is_stable() {
    let grid = EnergyGrid::uniform(1.0, 51.0, 50).unwrap();
    let t = build_tables(&Material::water(), &grid).unwrap();
    let c = EnergyCoefficients::from_tables(&t, 1.0, 1.0);
    let op = EnergyOperator::assemble(&grid, &c, DEFAULT_PENALTY).unwrap();
    let n = 100;
    let d = op.to_dense();
    let m = DMatrix::from_fn(n, n, |r, c| d[r][c]);
    let max_re = m.complex_eigenvalues().iter().fold(f64::NEG_INFINITY, |a, z| a.max(z.re));
    assert!(max_re < 0.0, "largest real part {max_re}");
}

#[test]
fn row_stepping_matches_point_stepping() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 5;
    let grid = random_grid(&mut rng, n);
    let ops: Vec<CnFactor> = (0..2)
        .map(|_| CnFactor::new(&EnergyOperator::assemble(&grid, &random_coefficients(&mut rng, n), 2.0).unwrap(), 0.07).unwrap())
        .collect();
    let points = 6;
    let medium: Vec<u16> = vec![0, 1, 1];
    let mut avg: Vec<Vec<f64>> = (0..n).map(|_| (0..points).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut slope: Vec<Vec<f64>> = (0..n).map(|_| (0..points).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let src: Vec<Vec<f64>> = (0..n).map(|_| (0..points).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let mut want = Vec::new();
    for k in 0..points {
        let mut x: Vec<f64> = (0..n).flat_map(|g| [avg[g][k], slope[g][k]]).collect();
        let s: Vec<f64> = (0..n).map(|g| src[g][k]).collect();
        ops[medium[k % 3] as usize].step_point(&mut x, Some(&s));
        want.push(x);
    }
    let factors: Vec<&CnFactor> = ops.iter().collect();
    let mut a: Vec<&mut [f64]> = avg.iter_mut().map(|v| v.as_mut_slice()).collect();
    let mut b: Vec<&mut [f64]> = slope.iter_mut().map(|v| v.as_mut_slice()).collect();
    let s: Vec<&[f64]> = src.iter().map(|v| v.as_slice()).collect();
    step_rows(&factors, &medium, &mut a, &mut b, Some(&s), &mut Vec::new());
    for k in 0..points {
        for g in 0..n {
            assert_relative_eq!(avg[g][k], want[k][2 * g], max_relative = 1e-13, epsilon = 1e-14);
            assert_relative_eq!(slope[g][k], want[k][2 * g + 1], max_relative = 1e-13, epsilon = 1e-14);
        }
    }
}

#[test]
fn default_penalty_for_linear_elements() {
    assert_eq!(DEFAULT_PENALTY, (1.0f64 + 1.0).powi(2) / 2.0);
}

proptest! {
    #[test]
    fn mass_leaves_only_through_the_bottom(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = random_grid(&mut rng, n);
        let mut c = random_coefficients(&mut rng, n);
        c.removal = vec![0.0; n];
        let op = EnergyOperator::assemble(&grid, &c, 2.0).unwrap();
        let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = apply(&op, &x);
        let rate: f64 = (0..n).map(|g| grid.width(g) * y[2 * g]).sum();
        let dt1 = (c.straggling[1] - c.straggling[0]) / (grid.center(1) - grid.center(0));
        let outflow = c.density * (c.stopping_edges[0] + 0.5 * dt1) * (x[0] - x[1]);
        prop_assert!((rate + outflow).abs() <= 1e-11 * outflow.abs().max(1.0));
    }
}
