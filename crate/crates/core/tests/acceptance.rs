//! One line per criterion: `criterion N: PASS|FAIL` followed by the raw
//! measured values. Outcomes are reported, not asserted; the test fails
//! only if a criterion could not be evaluated at all.
//!
//! Lines are written straight to stdout so they survive output capture.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use common::{run, sech2, self_convergence, sup_diff};
use dispersive_breakup::catalog::run_experiment;
use dispersive_breakup::diagnostics::loglog_fit;
use dispersive_breakup::hopf::{critical_point, InitialData};
use dispersive_breakup::io::{ExperimentId, RunConfig, RunRecord, RunSummary};
use dispersive_breakup::models::{build_model, ModelKind, ModelSpec};
use dispersive_breakup::pi2::{pi2_solve, Pi2Options};
use dispersive_breakup::time_stepping::Integrator;
use dispersive_breakup::{PeriodicGrid, SmoothFn};

thread_local! {
    static REPORT: std::cell::RefCell<Vec<(usize, String)>> = const { std::cell::RefCell::new(Vec::new()) };
    static CURRENT: std::cell::Cell<usize> = const { std::cell::Cell::new(0) };
}

fn begin(n: usize) -> Instant {
    CURRENT.with(|c| c.set(n));
    Instant::now()
}

fn line(n: usize, pass: bool, detail: String, start: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let text = format!("criterion {n}: {verdict} {detail} [{:.1} s]", start.elapsed().as_secs_f64());
    REPORT.with(|r| r.borrow_mut().push((n, text)));
}

fn note(text: String) {
    let n = CURRENT.with(|c| c.get());
    REPORT.with(|r| r.borrow_mut().push((n, format!("    {text}"))));
}

fn catalog(id: ExperimentId) -> RunRecord {
    run_experiment(&RunConfig::catalog(id)).unwrap()
}

fn ids(rec: &RunRecord) -> Vec<String> {
    rec.config.models.iter().map(|m| build_model(m.kind()).unwrap().id).collect()
}

fn column(rec: &RunRecord, table: &str, name: &str) -> Vec<f64> {
    rec.table(table).unwrap_or_else(|| panic!("missing table {table}")).column(name).unwrap()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1() {
    let start = begin(1);
    let data = InitialData::sech2();
    let mut worst = 0.0f64;
    let mut pass = true;
    let mut n1 = (0.0, 0.0);
    for n in 1..=5 {
        let model = build_model(ModelKind::GenKdV { n }).unwrap();
        let cp = critical_point(&model.a, &data).unwrap();
        let nf = n as f64;
        let u_c = 2.0 * nf / (2.0 * nf + 1.0);
        let t_c = (1.0 + 2.0 * nf).powf(nf + 0.5) / (6.0 * (2.0 * nf).powf(nf + 1.0));
        let k = (2.0 * nf + 1.0).powf(4.5) / (96.0 * nf * nf);
        let x_c = (1.0 / u_c.sqrt()).acosh() + 6.0 * u_c.powi(n as i32) * t_c;
        for (got, want) in [(cp.u_c, u_c), (cp.t_c, t_c), (cp.k, k), (cp.x_c, x_c)] {
            worst = worst.max(((got - want) / want).abs());
        }
        if n == 1 {
            n1 = (cp.x_c, cp.t_c);
        }
    }
    pass &= worst < 1e-10;
    // The reference values are truncated to three decimals.
    pass &= within(n1.0, 1.524, 1e-3) && within(n1.1, 0.216, 1e-3);
    line(
        1,
        pass,
        format!("max relative error {worst:.2e} (< 1e-10); n = 1: x_c = {:.6}, t_c = {:.6} (1.524, 0.216 to 1e-3)", n1.0, n1.1),
        start,
    );
}

fn criterion_2() {
    let start = begin(2);
    let s = pi2_solve(0.0, &Pi2Options::default()).unwrap();
    let (xs, ds): (Vec<f64>, Vec<f64>) = s
        .x
        .iter()
        .zip(&s.u)
        .filter(|(x, _)| **x >= 50.0 && **x <= s.x_max - 2.0)
        .map(|(&x, &u)| (x, (u + (6.0 * x).cbrt()).abs()))
        .unzip();
    let fit = loglog_fit(&xs, &ds).unwrap();
    // The sub-leading correction is X^{-10/3}, so the fitted exponent sits a
    // hair below −2; the fit is read to 1e-3.
    let pass = s.residual < 1e-8 && fit.slope >= -2.0 - 1e-3 && fit.slope <= -1.3;
    line(
        2,
        pass,
        format!(
            "residual {:.2e} (< 1e-8); far-field exponent {:.5} on [50, {}] (in [-2.0, -1.3])",
            s.residual,
            fit.slope,
            s.x_max - 2.0
        ),
        start,
    );
}

fn criterion_3(runs: &mut Vec<RunSummary>) {
    let start = begin(3);
    let rec = catalog(ExperimentId::Scaling);
    let targets = [(1, 0.30, 0.05), (3, 0.32, 0.06), (4, 0.32, 0.06), (5, 0.33, 0.06)];
    let mut pass = rec.errors.is_empty();
    let mut parts = Vec::new();
    for (n, target, tol) in targets {
        let key = format!("genkdv-{n}/sup_error");
        match rec.fits.get(&key) {
            Some(f) => {
                pass &= within(f.slope, target, tol) && f.r > 0.995 && f.points == 7;
                parts.push(format!("n={n}: slope {:.4} r {:.5}", f.slope, f.r));
            }
            None => {
                pass = false;
                parts.push(format!("n={n}: no fit"));
            }
        }
    }
    for e in &rec.errors {
        note(e.clone());
    }
    runs.extend(rec.runs.iter().cloned());
    line(3, pass, parts.join("; "), start);
}

fn criterion_4(runs: &mut Vec<RunSummary>) {
    let start = begin(4);
    let rec = catalog(ExperimentId::BreakupUniversality);
    let mut pass = rec.errors.is_empty();
    let mut parts = Vec::new();
    for id in ids(&rec) {
        let table = format!("universality-{id}");
        let eps = column(&rec, &table, "eps");
        let ratio = column(&rec, &table, "ratio");
        let (ms, hopf) = (column(&rec, &table, "multiscale_error"), column(&rec, &table, "hopf_error"));
        let j = (0..eps.len()).min_by(|&a, &b| (eps[a] - 1e-2).abs().total_cmp(&(eps[b] - 1e-2).abs())).unwrap();
        let slope = rec.fits.get(&format!("{id}/multiscale_error")).map_or(f64::NAN, |f| f.slope);
        let ok = ratio[j] <= 0.7 && ms[j] < hopf[j] && slope >= 4.0 / 7.0 - 0.1;
        pass &= ok;
        parts.push(format!(
            "{id}: at eps {:.1e} multiscale {:.3e} vs hopf {:.3e} ratio {:.3} (<= 0.7), slope {:.3} (>= 0.471)",
            eps[j], ms[j], hopf[j], ratio[j], slope
        ));
    }
    for e in &rec.errors {
        note(e.clone());
    }
    runs.extend(rec.runs.iter().cloned());
    line(4, pass, parts.join("; "), start);
}

fn criterion_5(runs: &mut Vec<RunSummary>) {
    let start = begin(5);
    let rec = catalog(ExperimentId::Quasitriviality);
    let fit = |k: &str| rec.fits.get(k).map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r));
    let hopf = fit("kawahara-1-1/hopf_window_l2");
    let qt = fit("kawahara-1-1/qt_window_l2");
    let cons = fit("genkdv-5/hopf_l2");
    let pass = rec.errors.is_empty()
        && within(hopf.0, 1.94, 0.15)
        && within(qt.0, 3.77, 0.35)
        && within(cons.0, 1.99, 0.05);
    for e in &rec.errors {
        note(e.clone());
    }
    for k in ["kawahara-1-1/hopf_window_sup", "kawahara-1-1/qt_window_sup", "genkdv-5/hopf_sup"] {
        let (s, r) = fit(k);
        note(format!("sup-norm variant {k}: slope {s:.4} r {r:.5}"));
    }
    runs.extend(rec.runs.iter().cloned());
    line(
        5,
        pass,
        format!(
            "L2 slopes: Kawahara(1,1) Hopf {:.4} r {:.5} (1.94 ± 0.15); quasitriviality {:.4} r {:.5} (3.77 ± 0.35); GenKdV(5) {:.4} r {:.5} (1.99 ± 0.05)",
            hopf.0, hopf.1, qt.0, qt.1, cons.0, cons.1
        ),
        start,
    );
}

fn criterion_6(runs: &[RunSummary]) {
    let start = begin(6);
    let accepted: Vec<&RunSummary> = runs.iter().filter(|r| r.finished()).collect();
    let energy = accepted.iter().map(|r| r.energy_drift).fold(0.0, f64::max);
    let mass = accepted.iter().map(|r| r.mass_drift).fold(0.0, f64::max);
    for r in accepted.iter().filter(|r| !r.conserves()) {
        note(format!("{} at eps {:e}: energy {:.2e} mass {:.2e}", r.model, r.eps, r.energy_drift, r.mass_drift));
    }
    let pass = !accepted.is_empty() && accepted.iter().all(|r| r.conserves());
    line(
        6,
        pass,
        format!(
            "{} accepted of {} catalog runs; max energy drift {energy:.2e} (< 1e-6), max mass drift {mass:.2e} (< 1e-10)",
            accepted.len(),
            runs.len()
        ),
        start,
    );
}

fn criterion_7() {
    let start = begin(7);
    let rec = catalog(ExperimentId::HamiltonianChecks);
    let col = |c: &str| column(&rec, "brackets", c);
    let (plain, ext) = (col("slope"), col("slope_extended"));
    let anti = col("antisymmetry").into_iter().fold(0.0, f64::max);
    let cas = col("casimir").into_iter().fold(0.0, f64::max);
    let obstructed = rec.flags.get("obstruction_for_zero_c").copied().unwrap_or(false);
    let pass = rec.errors.is_empty()
        && plain.len() == 3
        && plain.iter().all(|s| *s >= 5.7)
        && ext.iter().all(|s| *s >= 7.7)
        && anti <= 1e-10
        && cas <= 1e-10
        && obstructed;
    let fmt = |v: &[f64]| v.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(", ");
    line(
        7,
        pass,
        format!(
            "slopes [{}] (>= 5.7); extended [{}] (>= 7.7); antisymmetry {anti:.1e}, Casimir {cas:.1e} (<= 1e-10); obstruction raised: {obstructed}",
            fmt(&plain),
            fmt(&ext)
        ),
        start,
    );
}

fn criterion_8(runs: &mut Vec<RunSummary>) {
    let start = begin(8);
    let rec = catalog(ExperimentId::Blowup);
    let mut pass = rec.errors.is_empty();
    let mut parts = Vec::new();
    for (id, s) in ids(&rec).iter().zip(&rec.runs) {
        let key = format!("{id}/eps=1.0000e-1");
        let v = |k: &str| rec.values.get(&format!("{key}/{k}")).copied().unwrap_or(f64::NAN);
        let f = |k: &str| rec.flags.get(&format!("{key}/{k}")).copied().unwrap_or(false);
        let (t_c, d0, d1, trend) = (v("t_c"), v("delta_start"), v("delta_end"), v("delta_trend"));
        let ok = s.finished()
            && f("nan_free")
            && f("linf_monotone")
            && trend < 0.0
            && d1 < 0.5 * d0
            && s.t_end >= 2.5 * t_c;
        pass &= ok;
        parts.push(format!(
            "{id}: t_end {:.4} = {:.2} t_c, {:?}, L∞ monotone {}, δ {:.3} -> {:.3} trend {:.3}",
            s.t_end,
            s.t_end / t_c,
            s.status,
            f("linf_monotone"),
            d0,
            d1,
            trend
        ));
    }
    runs.extend(rec.runs.iter().cloned());
    let kdv2 = catalog(ExperimentId::Kdv2Transition);
    runs.extend(kdv2.runs.iter().cloned());
    line(8, pass, parts.join("; "), start);
}

fn criterion_9() {
    let start = begin(9);
    let grid = PeriodicGrid::new(8.0 * PI, 512).unwrap();
    let kdv: ModelSpec = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
    let etd = self_convergence(&kdv, &grid.sample(sech2), 0.1, 0.1, 0.01, Integrator::Etdrk4);
    let nld = build_model(ModelKind::NonlinearDispersion { c: SmoothFn::monomial(1.0, 2), p: SmoothFn::zero() }).unwrap();
    let g256 = PeriodicGrid::new(8.0 * PI, 256).unwrap();
    let gauss = self_convergence(&nld, &g256.sample(sech2), 0.1, 0.1, 0.01, Integrator::GaussIrk4);
    let l = 8.0 * PI;
    let soliton = |x: f64| 2.0 * sech2(x);
    let u = run(&kdv, &g256.sample(soliton), 1.0, 2.0 * l / 4.0, 1e-3, Integrator::Etdrk4);
    let err = sup_diff(&u, &g256.sample(soliton));
    let pass = within(etd, 4.0, 0.3) && within(gauss, 4.0, 0.3) && err < 1e-6;
    line(
        9,
        pass,
        format!("ETDRK4 order {etd:.3}, Gauss-IRK4 order {gauss:.3} (4.0 ± 0.3); soliton error {err:.2e} (< 1e-6)"),
        start,
    );
}

#[test]
fn acceptance() {
    let mut runs = Vec::new();
    criterion_1();
    criterion_2();
    criterion_3(&mut runs);
    criterion_4(&mut runs);
    criterion_5(&mut runs);
    criterion_7();
    criterion_8(&mut runs);
    criterion_6(&runs);
    criterion_9();
    // Verdict lines first within each criterion, then its notes.
    let mut report = REPORT.with(|r| r.take());
    report.sort_by_key(|(n, text)| (*n, text.starts_with(' ')));
    let mut out = std::io::stdout().lock();
    for (_, text) in report {
        writeln!(out, "{text}").unwrap();
    }
}
