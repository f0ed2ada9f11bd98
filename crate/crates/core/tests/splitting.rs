use lbsplit::splitting::*;
use nalgebra::{Matrix3, Vector3};

fn cn(lam: f64, h: f64) -> f64 {
    (1.0 + 0.5 * lam * h) / (1.0 - 0.5 * lam * h)
}

fn rates(stage: Stage) -> f64 {
    match stage {
        Stage::Energy => -0.7,
        Stage::Lateral => 0.3,
        Stage::Angular => -1.1,
    }
}

#[test]
fn zero_operators_leave_state_unchanged() {
    for order in [SplitOrder::FirstOrder, SplitOrder::Strang, SplitOrder::StrangEnergyInner] {
        let mut x = 3.25;
        split_step(order, &mut x, 0.1, |_, h, _, x| *x *= cn(0.0, h));
        assert_eq!(x, 3.25);
    }
}

#[test]
fn scalar_local_error_is_third_order() {
    let exact_total = rates(Stage::Energy) + rates(Stage::Lateral) + rates(Stage::Angular);
    let local = |h: f64| {
        let mut x = 1.0;
        split_step(SplitOrder::Strang, &mut x, h, |s, hh, _, x| *x *= cn(rates(s), hh));
        (x - (exact_total * h).exp()).abs()
    };
    for h in [0.04, 0.02, 0.01] {
        let r = local(h) / local(0.5 * h);
        assert!((r - 8.0).abs() < 0.4, "h={h}: ratio {r}");
    }
}

fn ops() -> [Matrix3<f64>; 3] {
    [
        Matrix3::new(-1.0, 0.4, 0.0, 0.2, -0.5, 0.1, 0.0, 0.3, -0.8),
        Matrix3::new(0.0, 0.6, -0.2, -0.6, 0.0, 0.5, 0.2, -0.5, 0.0),
        Matrix3::new(-0.3, 0.0, 0.2, 0.0, -0.9, 0.0, 0.4, 0.0, -0.2),
    ]
}

fn stage_index(s: Stage) -> usize {
    match s {
        Stage::Energy => 0,
        Stage::Lateral => 1,
        Stage::Angular => 2,
    }
}

fn integrate(order: SplitOrder, steps: usize) -> Vector3<f64> {
    let m = ops();
    let h = 1.0 / steps as f64;
    let mut x = Vector3::new(1.0, -0.5, 0.25);
    for _ in 0..steps {
        split_step(order, &mut x, h, |s, hh, _, x| *x = (m[stage_index(s)] * hh).exp() * *x);
    }
    x
}

#[test]
fn self_convergence_orders() {
    for (order, want) in [(SplitOrder::FirstOrder, 2.0), (SplitOrder::Strang, 4.0), (SplitOrder::StrangEnergyInner, 4.0)] {
        let x: Vec<Vector3<f64>> = [10, 20, 40].iter().map(|&n| integrate(order, n)).collect();
        let r = (x[0] - x[1]).norm() / (x[1] - x[2]).norm();
        assert!((r - want).abs() < 0.15 * want, "{order:?}: ratio {r}");
    }
}

#[test]
fn stage_order_log() {
    let log = |order: SplitOrder| {
        let mut log = Vec::new();
        split_step(order, &mut (), 0.2, |s, h, src, _| log.push((s, h, src)));
        log
    };
    use SourceAt::*;
    use Stage::*;
    assert_eq!(log(SplitOrder::FirstOrder), vec![(Energy, 0.2, Start), (Lateral, 0.2, Start), (Angular, 0.2, Start)]);
    assert_eq!(
        log(SplitOrder::Strang),
        vec![(Energy, 0.1, Start), (Lateral, 0.1, Start), (Angular, 0.2, Start), (Lateral, 0.1, Start), (Energy, 0.1, End)]
    );
    assert_eq!(SplitOrder::default(), SplitOrder::Strang);
    assert_eq!(SplitOrder::Strang.fractions(Energy), vec![0.5]);
    assert_eq!(SplitOrder::StrangEnergyInner.fractions(Angular), vec![0.5]);
    assert_eq!(SplitOrder::FirstOrder.fractions(Lateral), vec![1.0]);
}

#[test]
fn fractions_cover_one_step_per_stage() {
    for order in [SplitOrder::FirstOrder, SplitOrder::Strang, SplitOrder::StrangEnergyInner] {
        for stage in [Stage::Energy, Stage::Lateral, Stage::Angular] {
            let total: f64 = order.sequence().iter().filter(|s| s.stage == stage).map(|s| s.fraction).sum();
            assert_eq!(total, 1.0);
        }
    }
}
