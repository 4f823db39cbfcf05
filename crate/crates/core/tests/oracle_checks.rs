use conekit::kinetics::{KernelFamily, KernelSpec, ModelSpec};
use conekit::oracle::{closed_form_constant_kernel, compare, restrict, rk4_solve};
use conekit::solver::TimeGrid;
use conekit::space::StateVec;

#[test]
fn rk4_is_fourth_order() {
    let model = ModelSpec::with_defaults(KernelSpec::new(KernelFamily::Additive).unwrap(), 16, 1.0)
        .unwrap();
    let f0 = StateVec::monodisperse(16, 1, 1.0).unwrap();
    let coarse = TimeGrid::new(1.0, 16).unwrap();
    let reference = rk4_solve(&model, &f0, TimeGrid::new(1.0, 2048).unwrap()).unwrap();
    let reference = restrict(&reference.trajectory, coarse).unwrap();
    let err = |steps: usize| {
        let r = rk4_solve(&model, &f0, TimeGrid::new(1.0, steps).unwrap()).unwrap();
        compare(&restrict(&r.trajectory, coarse).unwrap(), &reference)
            .unwrap()
            .sup
    };
    let (e1, e2) = (err(32), err(64));
    let order = (e1 / e2).log2();
    assert!(order >= 3.5, "{e1:e} -> {e2:e}: order {order}");
}

#[test]
fn closed_form_matches_rk4() {
    let model = ModelSpec::with_defaults(KernelSpec::constant(1.0).unwrap(), 128, 1.0).unwrap();
    let f0 = StateVec::monodisperse(128, 1, 1.0).unwrap();
    let run = rk4_solve(&model, &f0, TimeGrid::new(2.0, 4096).unwrap()).unwrap();
    assert_eq!(run.clamped_entries, 0);
    for (node, t) in [(1024, 0.5), (2048, 1.0), (4096, 2.0)] {
        let s = run.trajectory.state(node);
        for k in 1..=32 {
            let exact = closed_form_constant_kernel(1.0, 1.0, k, t);
            let got = s.get(k - 1, 0);
            assert!(
                (got - exact).abs() <= 1e-6,
                "t = {t} k = {k}: {got} vs {exact}"
            );
        }
    }
}

#[test]
fn rk4_scales_with_kappa() {
    // κ rescales time
    let fast = ModelSpec::with_defaults(KernelSpec::constant(2.0).unwrap(), 32, 1.0).unwrap();
    let slow = ModelSpec::with_defaults(KernelSpec::constant(1.0).unwrap(), 32, 1.0).unwrap();
    let f0 = StateVec::monodisperse(32, 1, 1.0).unwrap();
    let a = rk4_solve(&fast, &f0, TimeGrid::new(0.5, 256).unwrap()).unwrap();
    let b = rk4_solve(&slow, &f0, TimeGrid::new(1.0, 256).unwrap()).unwrap();
    let d = a
        .trajectory
        .last()
        .l1_distance(b.trajectory.last())
        .unwrap();
    assert!(d < 1e-13, "{d:e}");
}
