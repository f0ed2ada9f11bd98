use approx::assert_relative_eq;
use lbsplit::lateral_transport::*;
use proptest::prelude::*;

#[test]
fn limiter_examples() {
    assert_eq!(limited_slope(1.0, 2.0, 3.0), 1.0);
    assert_eq!(limited_slope(0.0, 1.0, 0.0), 0.0);
    assert_eq!(limited_slope(0.0, 1.0, 3.0), 2.0);
    assert_eq!(limited_slope(5.0, 5.0, 5.0), 0.0);
    assert_eq!(superbee(-1.0), 0.0);
    assert_eq!(superbee(0.25), 0.5);
    assert_eq!(superbee(1.5), 1.5);
    assert_eq!(superbee(10.0), 2.0);
}

#[test]
fn zero_velocity_leaves_plane_unchanged() {
    let t = LateralTransport::new(5, 4, 0.1, 0.2);
    let mut psi: Vec<f64> = (0..20).map(|k| (k * k % 7) as f64).collect();
    let before = psi.clone();
    t.step(&mut psi, 0.0, 0.0, 0.3, &mut Vec::new());
    assert_eq!(psi, before);
}

#[test]
fn uniform_plane_is_steady() {
    let t = LateralTransport::new(8, 6, 0.5, 0.5);
    for (u, v, h) in [(0.3, -0.2, 0.1), (0.9, 0.9, 2.0), (-0.6, 0.0, 1.0)] {
        let mut psi = vec![2.5; 48];
        t.step(&mut psi, u, v, h, &mut Vec::new());
        for x in psi {
            assert_relative_eq!(x, 2.5, epsilon = 1e-13);
        }
    }
}

fn square_pulse(n: usize, lo: usize, hi: usize) -> Vec<f64> {
    (0..n).map(|k| if (lo..hi).contains(&k) { 1.0 } else { 0.0 }).collect()
}

fn centre(psi: &[f64], dy: f64) -> f64 {
    let m: f64 = psi.iter().sum();
    psi.iter().enumerate().map(|(k, x)| (k as f64 + 0.5) * dy * x).sum::<f64>() / m
}

#[test]
fn square_pulse_at_half_courant() {
    let (n, dy, u) = (200, 0.05, 0.5);
    let h = 0.5 * dy / u;
    let t = LateralTransport::new(n, 1, dy, dy);
    assert_eq!(t.scheme_for(u, 0.0, h), LateralScheme::Explicit);
    let mut psi = square_pulse(n, 40, 60);
    let (m0, c0) = (psi.iter().sum::<f64>(), centre(&psi, dy));
    let mut scratch = Vec::new();
    for _ in 0..100 {
        t.step(&mut psi, u, 0.0, h, &mut scratch);
    }
    let shift = 100.0 * u * h;
    let err = (centre(&psi, dy) - c0 - shift).abs();
    assert!(err <= 0.01 * shift, "centre error {err}");
    assert!((psi.iter().sum::<f64>() - m0).abs() < 1e-12);
    assert!(psi.iter().all(|&x| x > -1e-14 && x < 1.0 + 1e-14));
}

#[test]
fn negative_direction_mirrors_positive() {
    let (n, dy) = (60, 0.1);
    let t = LateralTransport::new(n, 1, dy, dy);
    let mut a = square_pulse(n, 20, 30);
    let mut b: Vec<f64> = a.iter().rev().copied().collect();
    let mut s = Vec::new();
    for _ in 0..20 {
        t.step(&mut a, 0.4, 0.0, 0.1, &mut s);
        t.step(&mut b, -0.4, 0.0, 0.1, &mut s);
    }
    for (x, y) in a.iter().zip(b.iter().rev()) {
        assert_relative_eq!(*x, *y, epsilon = 1e-14);
    }
}

#[test]
fn transposed_plane_swaps_directions() {
    let (n, d) = (12, 0.2);
    let t = LateralTransport::new(n, n, d, d);
    let mut a: Vec<f64> = (0..n * n).map(|k| if (3..6).contains(&(k / n)) && (4..8).contains(&(k % n)) { 1.0 } else { 0.0 }).collect();
    let mut b: Vec<f64> = (0..n * n).map(|k| a[(k % n) * n + k / n]).collect();
    let mut s = Vec::new();
    for h in [0.05, 0.3] {
        t.step(&mut a, 0.3, -0.5, h, &mut s);
        t.step(&mut b, -0.5, 0.3, h, &mut s);
    }
    for k in 0..n * n {
        assert_relative_eq!(a[k], b[(k % n) * n + k / n], epsilon = 1e-14);
    }
}

#[test]
fn implicit_step_keeps_interior_mass() {
    let (n, dy, u) = (100, 0.05, 0.5);
    let t = LateralTransport::new(n, 1, dy, dy);
    let h = 3.0 * dy / u;
    assert_eq!(t.scheme_for(u, 0.0, h), LateralScheme::Implicit);
    let mut psi = square_pulse(n, 10, 20);
    let mut s = Vec::new();
    let m0: f64 = psi.iter().sum();
    for _ in 0..5 {
        t.step(&mut psi, u, 0.0, h, &mut s);
    }
    assert_relative_eq!(psi.iter().sum::<f64>(), m0, max_relative = 1e-12);
    assert!(centre(&psi, dy) > 0.75 + 5.0 * u * h * 0.9);
}

#[test]
fn total_variation_does_not_grow() {
    let (n, dy, u) = (150, 0.04, 0.7);
    let t = LateralTransport::new(n, 1, dy, dy);
    let h = 0.45 * dy / u;
    let mut psi: Vec<f64> = (0..n).map(|k| if (20..40).contains(&k) { 1.0 } else if (50..55).contains(&k) { 0.5 } else { 0.0 }).collect();
    let tv = |p: &[f64]| p.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    let mut prev = tv(&psi);
    let mut s = Vec::new();
    for _ in 0..80 {
        t.step(&mut psi, u, 0.0, h, &mut s);
        let now = tv(&psi);
        assert!(now <= prev + 1e-12);
        prev = now;
    }
}

proptest! {
    #[test]
    fn difference_form_matches_limited_slope(l in -5.0f64..5.0, c in -5.0f64..5.0, r in -5.0f64..5.0) {
        let want = limited_slope(l, c, r);
        let got = slope_from_differences(c - l, r - c);
        prop_assert!((want - got).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn explicit_step_is_positive(seed in proptest::collection::vec(0.0f64..1.0, 30), u in -1.0f64..1.0) {
        let t = LateralTransport::new(30, 1, 0.1, 0.1);
        let mut psi = seed;
        let h = 0.5 * 0.1 / u.abs().max(1e-3);
        t.step_explicit(&mut psi, u, 0.0, h, &mut Vec::new());
        prop_assert!(psi.iter().all(|&x| x >= -1e-12));
    }
}
