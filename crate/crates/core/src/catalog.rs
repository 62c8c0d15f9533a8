//! Experiment catalog. Every PDE run starts from `φ(x) = sech²x`.
//!
//! Results land in a [`RunRecord`]: one table per model and experiment,
//! named `<experiment>-<model id>`, plus fits and scalar values keyed
//! `<model id>/<quantity>`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::asymptotics::{multiscale_constants, multiscale_grid, quasitriv_solution, TrustWindow, WINDOW_X_SCALED};
use crate::diagnostics::{
    fourier_decay_fit, linear_fit, loglog_fit, windowed_l2_diff, windowed_sup_diff, DecayFitOptions, LinfHistory,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{bracket_scaling, hf_density, order6_extension, poisson_bracket};
use crate::hopf::{critical_point, hopf_solve_grid, CriticalPoint, InitialData};
use crate::io::{emit_outputs, worker_pool, ExperimentId, RunConfig, RunRecord, RunSummary, Table};
use crate::jet::SmoothFn;
use crate::models::{build_model, ModelSpec};
use crate::pi2::{pi2_tabulate, Pi2Options};
use crate::spectral::{PeriodicGrid, RealField};
use crate::time_stepping::{evolve, Monitors, Trajectory};

/// Points in the dense windows around `x_c`.
const DENSE_POINTS: usize = 4001;
/// Half-width of the dense window used by the breakup sweep, in units of `ε^{6/7}`.
const SWEEP_WINDOW: f64 = 30.0;

/// Run the experiment named in `cfg` and write its outputs when
/// `cfg.output` is set. Only configuration problems are returned as
/// errors; solver failures are recorded and leave a partial record.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let mut rec = RunRecord::new(cfg.clone());
    let pool = worker_pool()?;
    let outcome = pool.install(|| match cfg.experiment {
        ExperimentId::Evolve => evolve_runs(cfg, &mut rec),
        ExperimentId::Hopf => hopf_profiles(cfg, &mut rec),
        ExperimentId::Pi2 => pi2_table(cfg, &mut rec),
        ExperimentId::BreakupUniversality => universality(cfg, &mut rec),
        ExperimentId::Scaling => scaling(cfg, &mut rec),
        ExperimentId::Quasitriviality => quasitriviality(cfg, &mut rec),
        ExperimentId::Blowup => blowup(cfg, &mut rec),
        ExperimentId::Kdv2Transition => evolve_runs(cfg, &mut rec),
        ExperimentId::HamiltonianChecks => hamiltonian_checks(cfg, &mut rec),
    });
    match outcome {
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => rec.errors.push(e.to_string()),
        Ok(()) => {}
    }
    if let Some(dir) = &cfg.output {
        emit_outputs(&rec, dir)?;
    }
    Ok(rec)
}

struct Setup {
    model: ModelSpec,
    cp: Option<CriticalPoint>,
    index: usize,
}

fn setups(cfg: &RunConfig) -> Result<Vec<Setup>> {
    let data = InitialData::sech2();
    cfg.models
        .iter()
        .enumerate()
        .map(|(index, m)| {
            let model = build_model(m.kind())?;
            let cp = critical_point(&model.a, &data).ok();
            Ok(Setup { model, cp, index })
        })
        .collect()
}

fn need_cp(s: &Setup) -> Result<&CriticalPoint> {
    s.cp.as_ref()
        .ok_or_else(|| Error::Config(format!("no gradient catastrophe found for {}", s.model.id)))
}

fn grid(cfg: &RunConfig) -> Result<PeriodicGrid> {
    PeriodicGrid::new(cfg.half_width, cfg.nodes)
}

fn initial(grid: &PeriodicGrid) -> RealField {
    grid.sample(|x| 1.0 / x.cosh().powi(2))
}

fn run_pde(
    cfg: &RunConfig,
    model: &ModelSpec,
    eps: f64,
    t_end: f64,
    stops: &[f64],
) -> Result<(Trajectory, RunSummary)> {
    let g = grid(cfg)?;
    let dt = cfg.dt_for(eps);
    let mon = Monitors { integrator: cfg.integrator, ..Monitors::default() };
    let tr = evolve(model, &initial(&g), eps, t_end, dt, stops, &mon)?;
    let summary = RunSummary::from_trajectory(&model.id, eps, dt, t_end, &tr);
    Ok((tr, summary))
}

/// All `(model, ε)` jobs of a sweep, in model-major order, run on the
/// current pool. Results keep that order whatever the scheduling.
fn sweep<T: Send>(
    cfg: &RunConfig,
    setups: &[Setup],
    job: impl Fn(&Setup, f64) -> Result<T> + Sync,
) -> Vec<(usize, f64, Result<T>)> {
    let jobs: Vec<(usize, f64)> = (0..setups.len())
        .flat_map(|i| cfg.eps.iter().map(move |&e| (i, e)))
        .collect();
    jobs.par_iter().map(|&(i, e)| (i, e, job(&setups[i], e))).collect()
}

fn fit_finite(rec: &mut RunRecord, key: String, eps: &[f64], err: &[f64]) {
    let (e, d): (Vec<f64>, Vec<f64>) = eps
        .iter()
        .zip(err)
        .filter(|(_, d)| d.is_finite() && **d > 0.0)
        .map(|(&e, &d)| (e, d))
        .unzip();
    match loglog_fit(&e, &d) {
        Ok(f) => {
            rec.fits.insert(key, f);
        }
        Err(err) => rec.errors.push(format!("{key}: {err}")),
    }
}

fn sup_on(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn dense(lo: f64, hi: f64) -> Vec<f64> {
    (0..DENSE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (DENSE_POINTS - 1) as f64)
        .collect()
}

fn eps_key(eps: f64) -> String {
    format!("{eps:.4e}")
}

fn snapshot_table(name: String, f: &RealField) -> Table {
    let mut t = Table::new(name, &["x", "u"]);
    for (j, &u) in f.values.iter().enumerate() {
        t.push(vec![f.grid.node(j), u]);
    }
    t
}

fn evolve_runs(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let s = setups(cfg)?;
    let out = sweep(cfg, &s, |st, eps| {
        let t_end = match (cfg.t_end_for(st.index), &st.cp) {
            (Some(t), _) => t,
            (None, Some(cp)) => cp.t_c,
            (None, None) => return Err(Error::Config(format!("{} needs an end time", st.model.id))),
        };
        run_pde(cfg, &st.model, eps, t_end, &cfg.snapshots)
    });
    for (i, eps, r) in out {
        let id = &s[i].model.id;
        match r {
            Ok((tr, sum)) => {
                for (t, f) in &tr.snapshots {
                    rec.tables.push(snapshot_table(format!("snapshot-{id}-eps{}-t{t:.5}", eps_key(eps)), f));
                }
                let last = tr.final_field();
                rec.values.insert(format!("{id}/eps={}/linf_final", eps_key(eps)), last.sup_norm());
                rec.tables.push(snapshot_table(format!("final-{id}-eps{}", eps_key(eps)), &last));
                rec.runs.push(sum);
            }
            Err(e) => rec.errors.push(format!("{id} at ε = {eps:e}: {e}")),
        }
    }
    Ok(())
}

fn hopf_profiles(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let data = InitialData::sech2();
    let g = grid(cfg)?;
    for st in setups(cfg)? {
        let id = st.model.id.clone();
        let cp = need_cp(&st)?;
        for (k, v) in [
            ("x_c", cp.x_c),
            ("t_c", cp.t_c),
            ("u_c", cp.u_c),
            ("k", cp.k),
            ("k_limit", cp.k_limit),
            ("k_limit_estimate", cp.k_limit_estimate),
        ] {
            rec.values.insert(format!("{id}/{k}"), v);
        }
        let t = cfg.t_end_for(st.index).unwrap_or(cp.t_c);
        match hopf_solve_grid(&st.model.a, &data, &g.nodes(), t, cfg.hopf_tol) {
            Ok(u) => {
                let mut tab = Table::new(format!("hopf-{id}"), &["x", "u"]);
                for (x, u) in g.nodes().into_iter().zip(u) {
                    tab.push(vec![x, u]);
                }
                rec.tables.push(tab);
            }
            Err(e) => rec.errors.push(format!("{id} at t = {t}: {e}")),
        }
    }
    Ok(())
}

fn pi2_options(cfg: &RunConfig) -> Pi2Options {
    Pi2Options { x_max: cfg.pi2_x_max, nodes: cfg.pi2_nodes, ..Pi2Options::default() }
}

fn pi2_table(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let tab = pi2_tabulate(&cfg.pi2_times, &pi2_options(cfg))?;
    let mut t = Table::new("pi2-summary", &["T", "U0", "residual", "iterations"]);
    for s in &tab.solutions {
        t.push(vec![s.t, tab.eval(0.0, s.t)?, s.residual, s.newton_iterations as f64]);
    }
    rec.tables.push(t);
    rec.pi2 = Some(tab);
    Ok(())
}

fn scaling(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let data = InitialData::sech2();
    let s = setups(cfg)?;
    let out = sweep(cfg, &s, |st, eps| {
        let cp = need_cp(st)?;
        let t = cfg.t_end_for(st.index).unwrap_or(cp.t_c);
        let (tr, sum) = run_pde(cfg, &st.model, eps, t, &[])?;
        let u = tr.final_field();
        let h = hopf_solve_grid(&st.model.a, &data, &u.grid.nodes(), t, cfg.hopf_tol)?;
        // The cusp at x_c is only a few nodes wide at small ε, so the nodes
        // are supplemented by a dense window evaluated spectrally.
        let w = SWEEP_WINDOW * eps.powf(6.0 / 7.0);
        let xs = dense(cp.x_c - w, cp.x_c + w);
        let hd = hopf_solve_grid(&st.model.a, &data, &xs, t, cfg.hopf_tol)?;
        let err = sup_on(&u.values, &h).max(sup_on(&u.to_spectral().eval_at(&xs), &hd));
        Ok(([err], sum))
    });
    collect_sweep(rec, &s, out, "scaling", &["sup_error"], |rec, id, eps, cols| {
        fit_finite(rec, format!("{id}/sup_error"), eps, &cols[0]);
    });
    Ok(())
}

type SweepOut<const K: usize> = Vec<(usize, f64, Result<([f64; K], RunSummary)>)>;

/// Gathers per-(model, ε) error vectors into tables and runs `fits` on
/// each model's columns.
fn collect_sweep<const K: usize>(
    rec: &mut RunRecord,
    setups: &[Setup],
    out: SweepOut<K>,
    prefix: &str,
    names: &[&str; K],
    fits: impl Fn(&mut RunRecord, &str, &[f64], &[Vec<f64>]),
) {
    for (i, st) in setups.iter().enumerate() {
        let id = st.model.id.clone();
        let mut cols: Vec<&str> = vec!["eps"];
        cols.extend(names.iter());
        cols.extend(["energy_drift", "mass_drift"]);
        let mut tab = Table::new(format!("{prefix}-{id}"), &cols);
        let mut eps = Vec::new();
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); K];
        for (_, e, r) in out.iter().filter(|o| o.0 == i) {
            match r {
                Ok((vals, sum)) => {
                    let mut row = vec![*e];
                    row.extend(vals.iter());
                    row.extend([sum.energy_drift, sum.mass_drift]);
                    tab.push(row);
                    eps.push(*e);
                    for k in 0..K {
                        data[k].push(if sum.finished() { vals[k] } else { f64::NAN });
                    }
                    rec.runs.push(sum.clone());
                }
                Err(err) => rec.errors.push(format!("{id} at ε = {e:e}: {err}")),
            }
        }
        rec.tables.push(tab);
        fits(rec, &id, &eps, &data);
    }
}

fn scaled_window(cfg: &RunConfig, mc: &crate::asymptotics::MultiscaleConstants, eps: f64) -> TrustWindow {
    let mut w = TrustWindow::default_for(mc, eps);
    w.x_half *= cfg.window_scaled / WINDOW_X_SCALED;
    w
}

fn universality(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let data = InitialData::sech2();
    let s = setups(cfg)?;
    let tab = pi2_tabulate(&cfg.pi2_times, &pi2_options(cfg))?;
    let profile_eps = cfg
        .eps
        .iter()
        .copied()
        .min_by(|a, b| (a.log10() + 2.0).abs().total_cmp(&(b.log10() + 2.0).abs()));
    let out = sweep(cfg, &s, |st, eps| {
        let cp = need_cp(st)?;
        let mc = multiscale_constants(&st.model, cp)?;
        let t = cfg.t_end_for(st.index).unwrap_or(cp.t_c);
        let (tr, sum) = run_pde(cfg, &st.model, eps, t, &[])?;
        let win = scaled_window(cfg, &mc, eps);
        let (lo, hi) = win.x_range(&mc, t);
        let xs = dense(lo, hi);
        let up = tr.final_field().to_spectral().eval_at(&xs);
        let ms = multiscale_grid(&xs, t, eps, &mc, &tab, &win)?;
        let h = hopf_solve_grid(&st.model.a, &data, &xs, t, cfg.hopf_tol)?;
        let (em, eh) = (sup_on(&up, &ms), sup_on(&up, &h));
        let profile = (Some(eps) == profile_eps).then(|| {
            let mut p = Table::new(format!("profile-{}", st.model.id), &["x", "u_pde", "u_hopf", "u_multiscale"]);
            for j in 0..xs.len() {
                p.push(vec![xs[j], up[j], h[j], ms[j]]);
            }
            p
        });
        Ok(([em, eh, em / eh], sum, profile))
    });
    let mut flat = Vec::new();
    for (i, e, r) in out {
        flat.push((
            i,
            e,
            r.map(|(vals, sum, profile)| {
                if let Some(p) = profile {
                    rec.tables.push(p);
                }
                (vals, sum)
            }),
        ));
    }
    for st in &s {
        if let Ok(mc) = need_cp(st).and_then(|cp| multiscale_constants(&st.model, cp)) {
            let id = &st.model.id;
            for (k, v) in [("alpha", mc.alpha), ("beta", mc.beta), ("gamma", mc.gamma)] {
                rec.values.insert(format!("{id}/{k}"), v);
            }
        }
    }
    collect_sweep(
        rec,
        &s,
        flat,
        "universality",
        &["multiscale_error", "hopf_error", "ratio"],
        |rec, id, eps, cols| {
            fit_finite(rec, format!("{id}/multiscale_error"), eps, &cols[0]);
            fit_finite(rec, format!("{id}/hopf_error"), eps, &cols[1]);
        },
    );
    rec.pi2 = Some(tab);
    Ok(())
}

fn quasitriviality(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let data = InitialData::sech2();
    let s = setups(cfg)?;
    let smallest = cfg.eps.iter().copied().fold(f64::INFINITY, f64::min);
    let out = sweep(cfg, &s, |st, eps| {
        let cp = need_cp(st)?;
        let t = cfg.t_end_for(st.index).unwrap_or(cp.t_c / 2.0);
        let (tr, sum) = run_pde(cfg, &st.model, eps, t, &[])?;
        let u = tr.final_field();
        let g = u.grid;
        let nodes = g.nodes();
        let hopf = RealField::new(g, hopf_solve_grid(&st.model.a, &data, &nodes, t, cfg.hopf_tol)?)?;
        let (lo, hi) = (-g.half_width(), g.half_width());
        let mut vals = [
            windowed_l2_diff(&u, &hopf, lo, hi)?,
            windowed_sup_diff(&u, &hopf, lo, hi)?,
            f64::NAN,
            f64::NAN,
            f64::NAN,
            f64::NAN,
        ];
        let mut profile = None;
        if let Some((wlo, whi)) = cfg.window {
            vals[2] = windowed_l2_diff(&u, &hopf, wlo, whi)?;
            vals[3] = windowed_sup_diff(&u, &hopf, wlo, whi)?;
            let idx: Vec<usize> = (0..nodes.len()).filter(|&j| nodes[j] >= wlo && nodes[j] <= whi).collect();
            let xs: Vec<f64> = idx.iter().map(|&j| nodes[j]).collect();
            let q = quasitriv_solution(&st.model.a, &data, &st.model.c, &xs, t, eps)?;
            let mut qf = u.clone();
            for (&j, v) in idx.iter().zip(q.values()) {
                qf.values[j] = v;
            }
            vals[4] = windowed_l2_diff(&u, &qf, wlo, whi)?;
            vals[5] = windowed_sup_diff(&u, &qf, wlo, whi)?;
            if eps == smallest {
                let mut p = Table::new(format!("qt-profile-{}", st.model.id), &["x", "u_pde", "u_hopf", "u_quasitriv"]);
                for (k, &j) in idx.iter().enumerate() {
                    p.push(vec![nodes[j], u.values[j], hopf.values[j], q.samples[k].u]);
                }
                profile = Some(p);
            }
        }
        Ok((vals, sum, profile))
    });
    let mut flat = Vec::new();
    for (i, e, r) in out {
        flat.push((
            i,
            e,
            r.map(|(vals, sum, profile)| {
                if let Some(p) = profile {
                    rec.tables.push(p);
                }
                (vals, sum)
            }),
        ));
    }
    collect_sweep(
        rec,
        &s,
        flat,
        "quasitriv",
        &["hopf_l2", "hopf_sup", "hopf_window_l2", "hopf_window_sup", "qt_window_l2", "qt_window_sup"],
        |rec, id, eps, cols| {
            for (k, name) in ["hopf_l2", "hopf_sup", "hopf_window_l2", "hopf_window_sup", "qt_window_l2", "qt_window_sup"]
                .iter()
                .enumerate()
            {
                if cols[k].iter().any(|v| v.is_finite()) {
                    fit_finite(rec, format!("{id}/{name}"), eps, &cols[k]);
                }
            }
        },
    );
    Ok(())
}

fn blowup(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let s = setups(cfg)?;
    let out = sweep(cfg, &s, |st, eps| {
        let cp = need_cp(st)?;
        let t_end = cfg.t_end_for(st.index).unwrap_or(3.0 * cp.t_c);
        let stops: Vec<f64> = if cfg.snapshots.is_empty() {
            (0..=20).map(|i| cp.t_c + (t_end - cp.t_c) * i as f64 / 20.0).collect()
        } else {
            cfg.snapshots.clone()
        };
        let (tr, sum) = run_pde(cfg, &st.model, eps, t_end, &stops)?;
        Ok((tr, sum, cp.t_c))
    });
    for (i, eps, r) in out {
        let id = s[i].model.id.clone();
        let key = format!("{id}/eps={}", eps_key(eps));
        let (tr, sum, t_c) = match r {
            Ok(v) => v,
            Err(e) => {
                rec.errors.push(format!("{key}: {e}"));
                continue;
            }
        };
        let mut hist = Table::new(format!("blowup-{id}-eps{}", eps_key(eps)), &["t", "linf", "delta", "mu", "rms"]);
        let (mut ts, mut ds) = (Vec::new(), Vec::new());
        let mut nan = false;
        for (t, f) in tr.snapshots.iter().filter(|(t, _)| *t >= t_c) {
            nan |= !f.is_valid();
            let fit = fourier_decay_fit(&f.to_spectral(), DecayFitOptions::default());
            let (mu, delta, rms) = fit.map_or((f64::NAN, f64::NAN, f64::NAN), |d| (d.mu, d.delta, d.rms_residual));
            hist.push(vec![*t, f.sup_norm(), delta, mu, rms]);
            if delta.is_finite() {
                ts.push(*t);
                ds.push(delta);
            }
        }
        let linf = LinfHistory::from_snapshots(tr.snapshots.iter().map(|(t, f)| (*t, f))).after(t_c);
        rec.flags.insert(format!("{key}/linf_monotone"), linf.monotone_growth(2));
        rec.flags.insert(format!("{key}/nan_free"), !nan && tr.final_field().is_valid());
        rec.values.insert(format!("{key}/t_c"), t_c);
        rec.values.insert(format!("{key}/linf_max"), linf.max());
        if let (Some(d0), Some(d1)) = (ds.first(), ds.last()) {
            rec.values.insert(format!("{key}/delta_start"), *d0);
            rec.values.insert(format!("{key}/delta_end"), *d1);
        }
        match linear_fit(&ts, &ds) {
            Ok(f) => {
                rec.values.insert(format!("{key}/delta_trend"), f.slope);
            }
            Err(e) => rec.errors.push(format!("{key}: δ trend: {e}")),
        }
        rec.tables.push(hist);
        rec.tables.push(snapshot_table(format!("final-{id}-eps{}", eps_key(eps)), &tr.final_field()));
        rec.runs.push(sum);
    }
    Ok(())
}

/// Invariants used by the bracket checks.
pub fn bracket_invariants() -> (SmoothFn, SmoothFn) {
    (
        SmoothFn::new("(1+u)/6", |j| j.offset(1.0).scale(1.0 / 6.0)),
        SmoothFn::new("0.1u^2", |j| j.square().scale(0.1)),
    )
}

/// Test state without mirror symmetry: for a symmetric state every bracket
/// of even-order densities vanishes identically.
pub fn bracket_test_field(grid: &PeriodicGrid) -> RealField {
    let l = grid.half_width();
    grid.sample(|x| {
        let s = std::f64::consts::PI * x / l;
        0.5 + 0.3 * s.sin() + 0.1 * (2.0 * s).sin()
    })
}

/// Random polynomial of degree 3–5 with a leading coefficient of size at
/// least 0.1, so its third derivative is not identically zero.
pub fn random_polynomial(rng: &mut impl Rng) -> (Vec<f64>, SmoothFn) {
    let deg = rng.gen_range(3..=5);
    let mut c: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lead = rng.gen_range(0.1..1.0);
    c[deg] = if rng.gen_bool(0.5) { lead } else { -lead };
    (c.clone(), SmoothFn::polynomial(c))
}

fn hamiltonian_checks(cfg: &RunConfig, rec: &mut RunRecord) -> Result<()> {
    let g = grid(cfg)?;
    let u = bracket_test_field(&g);
    let (c, p) = bracket_invariants();
    let ext = order6_extension(&c, &p, &SmoothFn::zero(), &[0.0, 1.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tab = Table::new(
        "brackets",
        &["pair", "deg_f", "deg_g", "slope", "r", "slope_extended", "r_extended", "antisymmetry", "antisymmetry_relative", "casimir"],
    );
    let eps_probe = cfg.eps.iter().copied().fold(0.0, f64::max);
    let casimir_density = hf_density(&SmoothFn::identity(), &c, &p);
    for k in 0..cfg.pairs {
        let (fc, f) = random_polynomial(&mut rng);
        let (gc, gpoly) = random_polynomial(&mut rng);
        let (hf, hg) = (hf_density(&f, &c, &p), hf_density(&gpoly, &c, &p));
        let fg = poisson_bracket(&hf, &hg, &u, eps_probe)?;
        let gf = poisson_bracket(&hg, &hf, &u, eps_probe)?;
        let anti = (fg + gf).abs();
        let anti_rel = anti / fg.abs().max(gf.abs()).max(1e-300);
        let cas = poisson_bracket(&casimir_density, &hf, &u, eps_probe)?.abs();
        let plain = bracket_scaling(&hf, &hg, &cfg.eps, &u)?;
        let extended = bracket_scaling(&ext.commuting_density(&f), &ext.commuting_density(&gpoly), &cfg.eps, &u)?;
        let (s0, r0) = plain.fit.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r));
        let (s1, r1) = extended.fit.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r));
        if let Some(f) = plain.fit {
            rec.fits.insert(format!("pair{k}/bracket"), f);
        }
        if let Some(f) = extended.fit {
            rec.fits.insert(format!("pair{k}/bracket_extended"), f);
        }
        tab.push(vec![
            k as f64,
            (fc.len() - 1) as f64,
            (gc.len() - 1) as f64,
            s0,
            r0,
            s1,
            r1,
            anti,
            anti_rel,
            cas,
        ]);
    }
    rec.tables.push(tab);
    let obstructed = matches!(
        order6_extension(&SmoothFn::zero(), &SmoothFn::constant(1.0), &SmoothFn::zero(), &[0.0, 1.0]),
        Err(Error::Obstruction(_))
    );
    rec.flags.insert("obstruction_for_zero_c".into(), obstructed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{ModelConfig, Table};

    #[test]
    fn small_evolve_writes_tables() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            experiment: ExperimentId::Evolve,
            models: vec![ModelConfig::GenKdv { n: 1 }],
            eps: vec![0.3],
            nodes: 256,
            dt: 1e-3,
            t_end: vec![0.05],
            snapshots: vec![0.02],
            output: Some(dir.path().to_path_buf()),
            ..RunConfig::default()
        };
        let rec = run_experiment(&cfg).unwrap();
        assert!(rec.errors.is_empty(), "{:?}", rec.errors);
        assert_eq!(rec.runs.len(), 1);
        assert!(rec.runs[0].conserves());
        let snap = rec.tables.iter().find(|t| t.name.starts_with("snapshot-")).unwrap();
        assert_eq!(snap.rows.len(), 256);
        let back = Table::read(&dir.path().join(format!("{}.dat", snap.name))).unwrap();
        assert_eq!(back.rows, snap.rows);
        assert!(dir.path().join("metadata.toml").exists());
    }

    #[test]
    fn same_config_same_bytes() {
        let cfg = RunConfig {
            experiment: ExperimentId::HamiltonianChecks,
            pairs: 1,
            nodes: 64,
            ..RunConfig::catalog(ExperimentId::HamiltonianChecks)
        };
        let a = run_experiment(&cfg).unwrap();
        assert!(a.errors.is_empty(), "{:?}", a.errors);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.tables[0].to_text(), b.tables[0].to_text());
        assert_eq!(a.metadata().unwrap(), b.metadata().unwrap());
    }

    #[test]
    fn solver_failures_leave_a_partial_record() {
        // Evolving past breakup makes the Hopf comparison multivalued.
        let cfg = RunConfig {
            experiment: ExperimentId::Scaling,
            models: vec![ModelConfig::GenKdv { n: 1 }],
            eps: vec![0.3],
            nodes: 256,
            dt: 1e-3,
            t_end: vec![0.4],
            ..RunConfig::default()
        };
        let rec = run_experiment(&cfg).unwrap();
        assert!(!rec.errors.is_empty());
        assert!(matches!(rec.status(), crate::io::RecordStatus::Partial { .. }));
    }

    #[test]
    fn bracket_field_breaks_mirror_symmetry() {
        let g = PeriodicGrid::new(std::f64::consts::PI, 64).unwrap();
        let u = bracket_test_field(&g);
        let (c, p) = bracket_invariants();
        let f = hf_density(&SmoothFn::monomial(1.0 / 6.0, 3), &c, &p);
        let h = hf_density(&SmoothFn::monomial(1.0 / 24.0, 4), &c, &p);
        assert!(poisson_bracket(&f, &h, &u, 0.3).unwrap().abs() > 1e-8);
        let sym = g.sample(|x| 0.5 + 0.3 * x.sin());
        assert!(poisson_bracket(&f, &h, &sym, 0.3).unwrap().abs() < 1e-14);
    }
}
