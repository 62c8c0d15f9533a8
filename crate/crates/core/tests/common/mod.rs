#![allow(dead_code)]

use dispersive_breakup::models::ModelSpec;
use dispersive_breakup::time_stepping::{evolve, Integrator, Monitors};
use dispersive_breakup::RealField;

pub fn sech2(x: f64) -> f64 {
    1.0 / x.cosh().powi(2)
}

pub fn sup_diff(a: &RealField, b: &RealField) -> f64 {
    a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Run with the energy and resolution monitors off, for convergence studies.
pub fn run(model: &ModelSpec, u0: &RealField, eps: f64, t: f64, dt: f64, integrator: Integrator) -> RealField {
    let mon = Monitors {
        integrator: Some(integrator),
        energy: false,
        resolution_threshold: 1.0,
        blowup_tail: 1.0,
        ..Monitors::default()
    };
    let tr = evolve(model, u0, eps, t, dt, &[], &mon).unwrap();
    assert!(tr.status.is_completed(), "{:?}", tr.status);
    tr.final_field()
}

/// Observed order from runs at `dt`, `dt/2` and `dt/4`.
pub fn self_convergence(model: &ModelSpec, u0: &RealField, eps: f64, t: f64, dt: f64, integ: Integrator) -> f64 {
    let a = run(model, u0, eps, t, dt, integ);
    let b = run(model, u0, eps, t, dt / 2.0, integ);
    let c = run(model, u0, eps, t, dt / 4.0, integ);
    let (d1, d2) = (sup_diff(&a, &b), sup_diff(&b, &c));
    eprintln!("differences {d1:e} {d2:e}");
    (d1 / d2).log2()
}
