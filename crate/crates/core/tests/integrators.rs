mod common;

use std::f64::consts::PI;

use common::{run, self_convergence, sech2, sup_diff};
use dispersive_breakup::models::{build_model, ModelKind};
use dispersive_breakup::time_stepping::{gauss_irk4_step_stats, Integrator, StepperState};
use dispersive_breakup::{PeriodicGrid, SmoothFn};

#[test]
fn etdrk4_is_fourth_order_on_kdv() {
    let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
    let grid = PeriodicGrid::new(8.0 * PI, 512).unwrap();
    let order = self_convergence(&model, &grid.sample(sech2), 0.1, 0.1, 0.01, Integrator::Etdrk4);
    assert!((order - 4.0).abs() < 0.2, "order {order}");
}

#[test]
fn gauss_is_fourth_order_on_nonlinear_dispersion() {
    let model = build_model(ModelKind::NonlinearDispersion {
        c: SmoothFn::monomial(1.0, 2),
        p: SmoothFn::zero(),
    })
    .unwrap();
    let grid = PeriodicGrid::new(8.0 * PI, 256).unwrap();
    let order = self_convergence(&model, &grid.sample(sech2), 0.1, 0.1, 0.01, Integrator::GaussIrk4);
    assert!((order - 4.0).abs() < 0.3, "order {order}");
}

#[test]
fn kdv_soliton_crosses_the_period() {
    let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
    let l = 8.0 * PI;
    let grid = PeriodicGrid::new(l, 256).unwrap();
    let kappa: f64 = 1.0;
    let speed = 4.0 * kappa * kappa;
    let t = 2.0 * l / speed;
    let soliton = |x: f64| 2.0 * kappa * kappa * sech2(kappa * x);
    let u = run(&model, &grid.sample(soliton), 1.0, t, 1e-3, Integrator::Etdrk4);
    let err = sup_diff(&u, &grid.sample(soliton));
    assert!(err < 1e-6, "soliton error {err:e}");
}

#[test]
fn steppers_agree_on_kawahara() {
    let model = build_model(ModelKind::Kawahara { alpha: 1.0, beta: 1.0 }).unwrap();
    let grid = PeriodicGrid::new(8.0 * PI, 256).unwrap();
    let u0 = grid.sample(sech2);
    let a = run(&model, &u0, 0.3, 0.05, 1e-3, Integrator::Etdrk4);
    let b = run(&model, &u0, 0.3, 0.05, 2.5e-4, Integrator::GaussIrk4);
    let d = sup_diff(&a, &b);
    assert!(d < 1e-7, "difference {d:e}");
}

#[test]
fn gauss_step_falls_back_to_newton_when_stiff() {
    let model = build_model(ModelKind::NonlinearDispersion {
        c: SmoothFn::monomial(1.0, 2),
        p: SmoothFn::constant(0.01),
    })
    .unwrap();
    let grid = PeriodicGrid::new(8.0 * PI, 1024).unwrap();
    let st = StepperState::new(&grid.sample(sech2), 0.0).unwrap();
    let (st, stats) = gauss_irk4_step_stats(st, 0.01, &model, 0.3, 1e-12, 50).unwrap();
    assert!(stats.newton_iterations > 0, "{stats:?}");
    assert!(st.field().is_valid());
}
