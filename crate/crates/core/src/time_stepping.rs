//! Fourth-order time integration of `û_t = L û + N̂(û)`.
//!
//! Two schemes are provided: ETDRK4 for models whose stiff part is a
//! constant-coefficient linear symbol, and the two-stage Gauss–Legendre
//! implicit Runge–Kutta method for models with nonlinear dispersion.
//! [`evolve`] drives either one between snapshot times and records the
//! energy, mass, `L∞` and spectral-tail histories.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::spectral::{plans, PeriodicGrid, RealField, SpectralCoeffs, DEFAULT_TAIL_FRACTION};

const CONTOUR_POINTS: usize = 64;

/// Exact identity of the parameters a propagator table depends on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableKey {
    dt: u64,
    eps: u64,
    model: String,
    n: usize,
    l: u64,
}

impl TableKey {
    pub fn new(dt: f64, eps: f64, model: &ModelSpec, grid: &PeriodicGrid) -> Self {
        TableKey {
            dt: dt.to_bits(),
            eps: eps.to_bits(),
            model: model.id.clone(),
            n: grid.len(),
            l: grid.half_width().to_bits(),
        }
    }
}

/// Per-mode ETDRK4 coefficients for one `(dt, ε, model, N, L)`.
#[derive(Clone, Debug)]
pub struct Etdrk4Tables {
    pub key: TableKey,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etdrk4Tables {
    /// The φ-functions are averaged over a unit circle around `L dt` so that
    /// small `|L dt|` does not suffer from cancellation.
    pub fn new(dt: f64, eps: f64, model: &ModelSpec, grid: &PeriodicGrid) -> Self {
        let n = grid.len();
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| {
                let th = std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64 * 2.0;
                Complex64::new(th.cos(), th.sin())
            })
            .collect();
        let mut t = Etdrk4Tables {
            key: TableKey::new(dt, eps, model, grid),
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        let m = CONTOUR_POINTS as f64;
        for j in 0..n {
            let lh = model.linear_symbol(grid.wavenumber(j), eps) * dt;
            t.e.push(lh.exp());
            t.e2.push((lh * 0.5).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for &w in &roots {
                let r = lh + w;
                let er = r.exp();
                let r2 = r * r;
                let r3 = r2 * r;
                q += ((r * 0.5).exp() - 1.0) / r;
                f1 += (-4.0 - r + er * (4.0 - 3.0 * r + r2)) / r3;
                f2 += (2.0 + r + er * (r - 2.0)) / r3;
                f3 += (-4.0 - 3.0 * r - r2 + er * (4.0 - r)) / r3;
            }
            t.q.push(q * (dt / m));
            t.f1.push(f1 * (dt / m));
            t.f2.push(f2 * (dt / m));
            t.f3.push(f3 * (dt / m));
        }
        t
    }
}

/// Time, spectral state and the propagator table last used with it.
#[derive(Clone, Debug)]
pub struct StepperState {
    pub t: f64,
    pub u_hat: SpectralCoeffs,
    tables: Option<Arc<Etdrk4Tables>>,
}

impl StepperState {
    pub fn new(u0: &RealField, t: f64) -> Result<Self> {
        u0.ensure_valid()?;
        let mut u_hat = u0.to_spectral();
        let ny = u_hat.grid.nyquist_index();
        u_hat.coeffs[ny] = Complex64::default();
        Ok(StepperState { t, u_hat, tables: None })
    }

    pub fn field(&self) -> RealField {
        self.u_hat.to_physical()
    }

    pub fn tables(&self) -> Option<&Arc<Etdrk4Tables>> {
        self.tables.as_ref()
    }

    /// Tables for `(dt, ε, model)`, rebuilt only when the key changes.
    fn tables_for(&mut self, dt: f64, eps: f64, model: &ModelSpec) -> Arc<Etdrk4Tables> {
        let key = TableKey::new(dt, eps, model, &self.u_hat.grid);
        match &self.tables {
            Some(t) if t.key == key => t.clone(),
            _ => {
                let t = Arc::new(Etdrk4Tables::new(dt, eps, model, &self.u_hat.grid));
                self.tables = Some(t.clone());
                t
            }
        }
    }
}

fn finite(v: &[Complex64]) -> bool {
    v.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// One ETDRK4 step (Cox–Matthews, contour-averaged coefficients).
pub fn etdrk4_step(mut state: StepperState, dt: f64, model: &ModelSpec, eps: f64) -> Result<StepperState> {
    etdrk4_step_with(&mut state, dt, model, eps, |u| model.nonlinear_hat(u, eps))?;
    Ok(state)
}

/// ETDRK4 with a caller-supplied nonlinear term.
pub fn etdrk4_step_with(
    state: &mut StepperState,
    dt: f64,
    model: &ModelSpec,
    eps: f64,
    nonlinear: impl Fn(&SpectralCoeffs) -> Vec<Complex64>,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let tb = state.tables_for(dt, eps, model);
    let grid = state.u_hat.grid;
    let v = &state.u_hat.coeffs;
    let n = v.len();
    let blowup = |t: f64| Error::BlowupSuspected {
        t,
        reason: "non-finite ETDRK4 stage".into(),
    };
    let wrap = |c: Vec<Complex64>| SpectralCoeffs { grid, coeffs: c };

    let nv = nonlinear(&state.u_hat);
    let a: Vec<Complex64> = (0..n).map(|j| tb.e2[j] * v[j] + tb.q[j] * nv[j]).collect();
    let a = wrap(a);
    let na = nonlinear(&a);
    let b: Vec<Complex64> = (0..n).map(|j| tb.e2[j] * v[j] + tb.q[j] * na[j]).collect();
    let b = wrap(b);
    let nb = nonlinear(&b);
    let c: Vec<Complex64> = (0..n)
        .map(|j| tb.e2[j] * a.coeffs[j] + tb.q[j] * (2.0 * nb[j] - nv[j]))
        .collect();
    let c = wrap(c);
    let nc = nonlinear(&c);
    let mut next: Vec<Complex64> = (0..n)
        .map(|j| {
            tb.e[j] * v[j] + tb.f1[j] * nv[j] + 2.0 * tb.f2[j] * (na[j] + nb[j]) + tb.f3[j] * nc[j]
        })
        .collect();
    next[grid.nyquist_index()] = Complex64::default();
    if !finite(&next) {
        return Err(blowup(state.t));
    }
    state.u_hat.coeffs = next;
    state.t += dt;
    Ok(())
}

const GAUSS_S3: f64 = 0.288_675_134_594_812_9; // √3/6
const GAUSS_A: [[f64; 2]; 2] = [[0.25, 0.25 - GAUSS_S3], [0.25 + GAUSS_S3, 0.25]];

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_NEWTON: usize = 50;
const FIXED_POINT_ITERS: usize = 30;
const GMRES_RESTART: usize = 40;

/// Statistics of the last implicit stage solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSolve {
    pub fixed_point_iterations: usize,
    pub newton_iterations: usize,
    pub krylov_iterations: usize,
    pub residuals: Vec<f64>,
}

/// `f(u)` in physical space for a real state vector.
fn rhs_physical(model: &ModelSpec, grid: PeriodicGrid, u: &[f64], eps: f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plans(grid.len()).forward(&mut buf);
    let hat = SpectralCoeffs { grid, coeffs: buf };
    let mut r = model.rhs_hat(&hat, eps);
    r[grid.nyquist_index()] = Complex64::default();
    plans(grid.len()).inverse(&mut r);
    r.iter().map(|c| c.re).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Block preconditioner `(I − dt A ⊗ Λ)^{-1}` with `Λ` the frozen symbol,
/// applied mode by mode to a stacked pair of real stage vectors.
struct FrozenPreconditioner {
    grid: PeriodicGrid,
    inv: Vec<[[Complex64; 2]; 2]>,
}

impl FrozenPreconditioner {
    fn new(grid: PeriodicGrid, lambda: &[Complex64], dt: f64) -> Self {
        let inv = lambda
            .iter()
            .map(|&l| {
                let m11 = 1.0 - dt * GAUSS_A[0][0] * l;
                let m12 = -dt * GAUSS_A[0][1] * l;
                let m21 = -dt * GAUSS_A[1][0] * l;
                let m22 = 1.0 - dt * GAUSS_A[1][1] * l;
                let det = m11 * m22 - m12 * m21;
                [[m22 / det, -m12 / det], [-m21 / det, m11 / det]]
            })
            .collect();
        FrozenPreconditioner { grid, inv }
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let p = plans(n);
        let mut r1: Vec<Complex64> = r[..n].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut r2: Vec<Complex64> = r[n..].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        p.forward(&mut r1);
        p.forward(&mut r2);
        for j in 0..n {
            let m = &self.inv[j];
            let (a, b) = (r1[j], r2[j]);
            r1[j] = m[0][0] * a + m[0][1] * b;
            r2[j] = m[1][0] * a + m[1][1] * b;
        }
        p.inverse(&mut r1);
        p.inverse(&mut r2);
        r1.iter().chain(r2.iter()).map(|c| c.re).collect()
    }
}

/// Right-preconditioned restarted GMRES for `J x = b`. Returns the solution
/// and the number of Krylov iterations used.
fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (x, 0);
    }
    let mut total = 0;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = dot(&r, &r).sqrt();
        if beta <= rtol * bnorm {
            break;
        }
        let m = GMRES_RESTART.min(max_iter - total);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = dot(&w, &w).sqrt();
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            let hk = h[k + 1][k];
            if g[k + 1].abs() <= rtol * bnorm || hk == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hk).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (zi, yi) in z.iter().zip(&y) {
            for (xj, zj) in x.iter_mut().zip(zi) {
                *xj += yi * zj;
            }
        }
        if g[k_used].abs() <= rtol * bnorm {
            break;
        }
    }
    (x, total)
}

/// One step of the two-stage Gauss–Legendre method. Stage values are found
/// by fixed-point iteration; when that stalls, Newton–Krylov with a
/// frozen-coefficient preconditioner takes over.
pub fn gauss_irk4_step(
    state: StepperState,
    dt: f64,
    model: &ModelSpec,
    eps: f64,
    newton_tol: f64,
    max_newton: usize,
) -> Result<StepperState> {
    gauss_irk4_step_stats(state, dt, model, eps, newton_tol, max_newton).map(|(s, _)| s)
}

pub fn gauss_irk4_step_stats(
    mut state: StepperState,
    dt: f64,
    model: &ModelSpec,
    eps: f64,
    newton_tol: f64,
    max_newton: usize,
) -> Result<(StepperState, StageSolve)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let grid = state.u_hat.grid;
    let n = grid.len();
    let u0 = state.u_hat.to_physical().values;
    let scale = sup(&u0).max(1.0);
    let f = |y: &[f64]| rhs_physical(model, grid, y, eps);
    let mut stats = StageSolve::default();

    // Stage values stacked as [Y1; Y2].
    let f0 = f(&u0);
    let mut y: Vec<f64> = Vec::with_capacity(2 * n);
    for i in 0..2 {
        let ci = GAUSS_A[i][0] + GAUSS_A[i][1];
        y.extend(u0.iter().zip(&f0).map(|(u, fu)| u + dt * ci * fu));
    }
    let stage_map = |y: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k1 = f(&y[..n]);
        let k2 = f(&y[n..]);
        let mut g = Vec::with_capacity(2 * n);
        for a in GAUSS_A.iter() {
            g.extend((0..n).map(|j| u0[j] + dt * (a[0] * k1[j] + a[1] * k2[j])));
        }
        (g, k1, k2)
    };

    let mut converged: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut prev = f64::INFINITY;
    for _ in 0..FIXED_POINT_ITERS {
        let (g, _, _) = stage_map(&y);
        let step = sup(&g.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        stats.fixed_point_iterations += 1;
        stats.residuals.push(step);
        if !step.is_finite() {
            break;
        }
        y = g;
        if step <= newton_tol * scale {
            converged = Some((f(&y[..n]), f(&y[n..])));
            break;
        }
        if step > 0.9 * prev {
            break;
        }
        prev = step;
    }

    if converged.is_none() {
        let lambda = model.frozen_symbol(&state.u_hat.to_physical(), eps);
        let pc = FrozenPreconditioner::new(grid, &lambda, dt);
        if !y.iter().all(|v| v.is_finite()) {
            y = u0.iter().chain(u0.iter()).copied().collect();
        }
        for _ in 0..max_newton {
            let (g, k1, k2) = stage_map(&y);
            let r: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - b).collect();
            let rn = sup(&r);
            stats.residuals.push(rn);
            if !rn.is_finite() {
                break;
            }
            if rn <= newton_tol * scale {
                converged = Some((k1, k2));
                break;
            }
            stats.newton_iterations += 1;
            let ynorm = dot(&y, &y).sqrt().max(1.0);
            let jac = |v: &[f64]| -> Vec<f64> {
                let vn = dot(v, v).sqrt();
                if vn == 0.0 {
                    return vec![0.0; 2 * n];
                }
                let h = 1e-7 * ynorm / vn;
                let yp: Vec<f64> = y.iter().zip(v).map(|(a, b)| a + h * b).collect();
                let (gp, _, _) = stage_map(&yp);
                (0..2 * n).map(|j| v[j] - (gp[j] - g[j]) / h).collect()
            };
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let (dz, its) = gmres(&jac, |v| pc.apply(v), &rhs, 1e-3_f64.min(rn), 200);
            stats.krylov_iterations += its;
            for (a, b) in y.iter_mut().zip(&dz) {
                *a += b;
            }
        }
    }

    let (k1, k2) = converged.ok_or_else(|| Error::NonConvergence {
        what: format!("Gauss stage equations at t = {}", state.t),
        residuals: stats.residuals.clone(),
    })?;
    let next: Vec<f64> = (0..n).map(|j| u0[j] + 0.5 * dt * (k1[j] + k2[j])).collect();
    if !next.iter().all(|v| v.is_finite()) {
        return Err(Error::BlowupSuspected {
            t: state.t,
            reason: "non-finite Gauss stage".into(),
        });
    }
    let mut buf: Vec<Complex64> = next.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plans(n).forward(&mut buf);
    buf[grid.nyquist_index()] = Complex64::default();
    state.u_hat.coeffs = buf;
    state.t += dt;
    Ok((state, stats))
}

/// Which scheme advances a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Etdrk4,
    GaussIrk4,
}

impl Integrator {
    /// ETDRK4 when the stiff part is linear, Gauss otherwise.
    pub fn for_model(model: &ModelSpec) -> Self {
        if model.has_stiff_linear_part() {
            Integrator::Etdrk4
        } else {
            Integrator::GaussIrk4
        }
    }
}

/// Energy at one monitor time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: f64,
    /// `|E(t) − E(0)| / |E(0)|` (absolute when `E(0) = 0`).
    pub drift: f64,
}

/// Thresholds and cadence for [`evolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// Record histories every this many steps (and at every snapshot).
    pub every: usize,
    pub tail_fraction: f64,
    /// Spectral tail above which the run stops as under-resolved.
    pub resolution_threshold: f64,
    /// Spectral tail above which blowup is suspected.
    pub blowup_tail: f64,
    pub blowup_linf: f64,
    pub integrator: Option<Integrator>,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub energy: bool,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors {
            every: 20,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            resolution_threshold: 1e-4,
            blowup_tail: 1e-2,
            blowup_linf: 1e6,
            integrator: None,
            newton_tol: DEFAULT_NEWTON_TOL,
            max_newton: DEFAULT_MAX_NEWTON,
            energy: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    ResolutionExhausted { t: f64, tail: f64 },
    BlowupSuspected { t: f64, reason: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Monitor sample: `(t, value)`.
pub type Series = Vec<(f64, f64)>;

/// Everything recorded by one [`evolve`] call.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub integrator: Integrator,
    pub snapshots: Vec<(f64, RealField)>,
    pub energy: Vec<EnergyRecord>,
    pub linf: Series,
    pub tail: Series,
    pub mass: Series,
    pub status: RunStatus,
    pub steps: usize,
    /// Last state reached, valid even when the run stopped early.
    pub last: StepperState,
}

impl Trajectory {
    pub fn max_energy_drift(&self) -> f64 {
        self.energy.iter().fold(0.0, |m, e| m.max(e.drift))
    }

    pub fn max_mass_drift(&self) -> f64 {
        let Some(&(_, m0)) = self.mass.first() else {
            return 0.0;
        };
        let d = if m0 != 0.0 { m0.abs() } else { 1.0 };
        self.mass.iter().fold(0.0, |m, &(_, v)| m.max((v - m0).abs() / d))
    }

    /// Completed with energy drift below `1e-6` and mass drift below `1e-10`.
    pub fn accepted(&self) -> bool {
        self.status.is_completed() && self.max_energy_drift() < 1e-6 && self.max_mass_drift() < 1e-10
    }

    pub fn final_field(&self) -> RealField {
        self.last.field()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&RealField> {
        self.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|(_, f)| f)
    }
}

struct Recorder<'a> {
    model: &'a ModelSpec,
    eps: f64,
    mon: &'a Monitors,
    e0: Option<f64>,
    traj_energy: Vec<EnergyRecord>,
    linf: Series,
    tail: Series,
    mass: Series,
}

impl Recorder<'_> {
    /// Records one sample; returns the stop status if a threshold tripped.
    fn sample(&mut self, st: &StepperState) -> Result<Option<RunStatus>> {
        let u = st.field();
        if !u.is_valid() {
            return Ok(Some(RunStatus::BlowupSuspected {
                t: st.t,
                reason: "non-finite field".into(),
            }));
        }
        let linf = u.sup_norm();
        let rep = st.u_hat.resolution_ok(self.mon.tail_fraction, self.mon.resolution_threshold)?;
        self.linf.push((st.t, linf));
        self.tail.push((st.t, rep.tail_relative));
        self.mass.push((st.t, u.integral()));
        if self.mon.energy {
            let e = self.model.energy(&u, self.eps)?;
            let e0 = *self.e0.get_or_insert(e);
            let d = if e0 != 0.0 { e0.abs() } else { 1.0 };
            self.traj_energy.push(EnergyRecord {
                t: st.t,
                energy: e,
                drift: (e - e0).abs() / d,
            });
        }
        if linf > self.mon.blowup_linf {
            return Ok(Some(RunStatus::BlowupSuspected {
                t: st.t,
                reason: format!("L-infinity norm {linf:e} exceeds {:e}", self.mon.blowup_linf),
            }));
        }
        if rep.tail_relative > self.mon.blowup_tail {
            return Ok(Some(RunStatus::BlowupSuspected {
                t: st.t,
                reason: format!("spectral tail {:e} exceeds {:e}", rep.tail_relative, self.mon.blowup_tail),
            }));
        }
        if !rep.ok {
            return Ok(Some(RunStatus::ResolutionExhausted {
                t: st.t,
                tail: rep.tail_relative,
            }));
        }
        Ok(None)
    }
}

/// Advances `u0` from `t = 0` to `t_end`, stopping exactly at every
/// snapshot time. Each gap between stops is covered by equal steps no
/// longer than `dt`. The run ends early, with a partial record, when
/// the spectral tail or the `L∞` norm crosses the monitor thresholds.
#[allow(clippy::too_many_arguments)]
pub fn evolve(
    model: &ModelSpec,
    u0: &RealField,
    eps: f64,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
    monitors: &Monitors,
) -> Result<Trajectory> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
    }
    let integrator = monitors.integrator.unwrap_or_else(|| Integrator::for_model(model));
    if integrator == Integrator::Etdrk4 && !model.has_stiff_linear_part() {
        return Err(Error::Config(format!("model {} has no linear stiff part for ETDRK4", model.id)));
    }
    let mut stops: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s < t_end - 1e-12 * t_end.abs().max(1.0))
        .collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut state = StepperState::new(u0, 0.0)?;
    let mut rec = Recorder {
        model,
        eps,
        mon: monitors,
        e0: None,
        traj_energy: Vec::new(),
        linf: Vec::new(),
        tail: Vec::new(),
        mass: Vec::new(),
    };
    let mut snapshots = Vec::new();
    if snapshot_times.iter().any(|&s| s == 0.0) || t_end == 0.0 {
        snapshots.push((0.0, u0.clone()));
    }
    let mut status = rec.sample(&state)?.unwrap_or(RunStatus::Completed);
    let mut steps = 0;
    let mut t0 = 0.0;
    let every = monitors.every.max(1);

    'outer: for &stop in &stops {
        if !status.is_completed() {
            break;
        }
        let gap = stop - t0;
        if gap <= 0.0 {
            continue;
        }
        let m = (gap / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = gap / m as f64;
        for i in 0..m {
            let step = match integrator {
                Integrator::Etdrk4 => etdrk4_step(state.clone(), h, model, eps),
                Integrator::GaussIrk4 => {
                    gauss_irk4_step(state.clone(), h, model, eps, monitors.newton_tol, monitors.max_newton)
                }
            };
            match step {
                Ok(s) => state = s,
                Err(Error::BlowupSuspected { t, reason }) => {
                    status = RunStatus::BlowupSuspected { t, reason };
                    break 'outer;
                }
                Err(Error::NonConvergence { what, .. }) => {
                    status = RunStatus::BlowupSuspected {
                        t: state.t,
                        reason: what,
                    };
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            steps += 1;
            if i + 1 == m {
                state.t = stop;
            }
            if i + 1 == m || steps % every == 0 {
                if let Some(s) = rec.sample(&state)? {
                    status = s;
                    break 'outer;
                }
            }
        }
        snapshots.push((stop, state.field()));
        t0 = stop;
    }

    Ok(Trajectory {
        integrator,
        snapshots,
        energy: rec.traj_energy,
        linf: rec.linf,
        tail: rec.tail,
        mass: rec.mass,
        status,
        steps,
        last: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelKind};
    use crate::SmoothFn;

    fn sech2(x: f64) -> f64 {
        1.0 / x.cosh().powi(2)
    }

    fn sup_diff(a: &RealField, b: &RealField) -> f64 {
        a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn linear_problem_is_exact() {
        let model = build_model(ModelKind::Kawahara { alpha: 1.0, beta: 1.0 }).unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 128).unwrap();
        let u0 = grid.sample(|x| sech2(x) + 0.1 * (x / 4.0).sin());
        let eps = 0.3;
        let dt = 0.05;
        let mut st = StepperState::new(&u0, 0.0).unwrap();
        let zero = |u: &SpectralCoeffs| vec![Complex64::default(); u.coeffs.len()];
        etdrk4_step_with(&mut st, dt, &model, eps, zero).unwrap();
        let start = StepperState::new(&u0, 0.0).unwrap();
        for j in 0..grid.len() {
            let exact = (model.linear_symbol(grid.wavenumber(j), eps) * dt).exp() * start.u_hat.coeffs[j];
            assert!((st.u_hat.coeffs[j] - exact).norm() < 1e-12 * grid.len() as f64);
        }
    }

    #[test]
    fn tables_are_cached_by_key() {
        let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 64).unwrap();
        let st = StepperState::new(&grid.sample(sech2), 0.0).unwrap();
        let st = etdrk4_step(st, 1e-3, &model, 0.1).unwrap();
        let first = st.tables().unwrap().clone();
        let st = etdrk4_step(st, 1e-3, &model, 0.1).unwrap();
        assert!(Arc::ptr_eq(&first, st.tables().unwrap()));
        let st = etdrk4_step(st, 1e-3, &model, 0.2).unwrap();
        assert!(!Arc::ptr_eq(&first, st.tables().unwrap()));
    }

    #[test]
    fn small_argument_coefficients_match_limits() {
        // As L dt → 0: Q → dt/2, f1 = f3 → dt/6, f2 → dt/6.
        let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 16).unwrap();
        let dt = 1e-3;
        let t = Etdrk4Tables::new(dt, 1e-6, &model, &grid);
        assert!((t.q[0] - dt / 2.0).norm() < 1e-15);
        for f in [&t.f1, &t.f2, &t.f3] {
            assert!((f[0] - dt / 6.0).norm() < 1e-15);
        }
    }

    #[test]
    fn gauss_stability_function_is_pade22() {
        // u' = λu on a single KdV mode, the nonlinearity suppressed by a tiny amplitude.
        let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let grid = PeriodicGrid::new(std::f64::consts::PI, 16).unwrap();
        let amp = 1e-9;
        let u0 = grid.sample(|x| amp * (3.0 * x).cos());
        let eps = 0.5;
        let dt = 0.7;
        let st = StepperState::new(&u0, 0.0).unwrap();
        let c0 = st.u_hat.coeffs[3];
        let st = gauss_irk4_step(st, dt, &model, eps, 1e-14, 50).unwrap();
        let z = model.linear_symbol(3.0, eps) * dt;
        let r = (1.0 + z / 2.0 + z * z / 12.0) / (1.0 - z / 2.0 + z * z / 12.0);
        let got = st.u_hat.coeffs[3] / c0;
        assert!((got - r).norm() < 1e-6, "{got} vs {r}");
    }

    #[test]
    fn gauss_leaves_constants_alone() {
        let model = build_model(ModelKind::NonlinearDispersion {
            c: SmoothFn::monomial(1.0, 2),
            p: SmoothFn::zero(),
        })
        .unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 64).unwrap();
        let u0 = grid.sample(|_| 0.7);
        let st = gauss_irk4_step(StepperState::new(&u0, 0.0).unwrap(), 0.1, &model, 0.1, 1e-12, 50).unwrap();
        assert!(sup_diff(&st.field(), &u0) < 1e-14);
    }

    #[test]
    fn zero_end_time_returns_initial_data() {
        let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 128).unwrap();
        let u0 = grid.sample(sech2);
        let tr = evolve(&model, &u0, 0.1, 0.0, 1e-3, &[], &Monitors::default()).unwrap();
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.snapshots[0].1, u0);
        assert_eq!(tr.steps, 0);
    }

    #[test]
    fn energy_of_sech2_matches_exact_integrals() {
        // ∫sech⁴ = 4/3, ∫sech⁶ = 16/15, ∫u_x² = 4(4/3 − 16/15) = 16/15.
        let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 1024).unwrap();
        let u = grid.sample(sech2);
        let eps: f64 = 0.1;
        let exact = eps * eps / 2.0 * 16.0 / 15.0 - 16.0 / 15.0;
        let e = model.energy(&u, eps).unwrap();
        assert!(((e - exact) / exact).abs() < 1e-10, "{e} vs {exact}");
        assert_eq!(model.energy(&grid.sample(|_| 0.0), eps).unwrap(), 0.0);
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 256).unwrap();
        let u0 = grid.sample(sech2);
        let tr = evolve(&model, &u0, 0.3, 0.05, 0.003, &[0.0, 0.0123, 0.05 * (1.0 - 1e-15)], &Monitors::default()).unwrap();
        let times: Vec<f64> = tr.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.0123, 0.05]);
        assert!(tr.status.is_completed());
        assert!(tr.max_mass_drift() < 1e-12);
    }

    #[test]
    fn coarse_grid_reports_resolution_exhausted() {
        let model = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let grid = PeriodicGrid::new(8.0 * std::f64::consts::PI, 64).unwrap();
        let u0 = grid.sample(sech2);
        let tr = evolve(&model, &u0, 0.01, 0.4, 1e-3, &[], &Monitors::default()).unwrap();
        assert!(
            matches!(tr.status, RunStatus::ResolutionExhausted { .. } | RunStatus::BlowupSuspected { .. }),
            "{:?}",
            tr.status
        );
        assert!(tr.last.field().is_valid());
    }
}
