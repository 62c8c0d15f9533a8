//! The smooth special solution `U(X; T)` of the fourth-order equation
//!
//! ```text
//! X = T U − [U³/6 + U_X²/24 + U U_XX/12 + U_XXXX/240]
//! ```
//!
//! with `U ~ −(6X)^{1/3} − 2^{2/3} T / (3X)^{1/3}` as `X → ±∞`.
//!
//! The boundary value problem on `[−X_max, X_max]` is discretized by
//! 11-point finite differences on a grid clustered around `X = 0` and near
//! both ends, and solved by damped Newton with a banded LU factorization.
//! The unknown is the deviation from a smooth background with the leading
//! far-field growth. The `T`-derivatives
//! `U_T`, `U_TT` come from the linearized equations and feed a quintic
//! Hermite interpolant in `T`.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::Jet;

const STENCIL: usize = 11;
const BAND: usize = 10;

/// Numerical parameters of a solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Pi2Options {
    pub x_max: f64,
    pub nodes: usize,
    pub tol: f64,
    /// Half-width of the node cluster around `X = 0`.
    pub cluster_width: f64,
    /// Uniform share of the node density far from the cluster.
    pub density_floor: f64,
    /// Width of the extra node clusters at `±x_max`, which resolve the
    /// oscillatory boundary layer left by the truncated asymptotics.
    pub edge_width: f64,
    pub max_newton: usize,
    /// Largest `T` increment of the continuation from `T = 0`.
    pub continuation_step: f64,
    /// Largest `T` spacing of a tabulation; coarser requested lists are
    /// subdivided uniformly between consecutive values.
    pub table_spacing: f64,
}

impl Default for Pi2Options {
    fn default() -> Self {
        Pi2Options {
            x_max: 400.0,
            nodes: 4096,
            tol: 1e-10,
            cluster_width: 20.0,
            density_floor: 0.1,
            edge_width: 3.0,
            max_newton: 60,
            continuation_step: 0.2,
            table_spacing: 0.1,
        }
    }
}

/// Real cube root, odd in its argument.
fn cbrt(x: f64) -> f64 {
    x.cbrt()
}

/// Two-term expansion `−(6X)^{1/3} − 2^{2/3} T/(3X)^{1/3}` and its X-derivative.
pub fn asymptotic(x: f64, t: f64) -> (f64, f64) {
    let c6 = cbrt(6.0 * x);
    let c3 = cbrt(3.0 * x);
    let k = 2f64.powf(2.0 / 3.0);
    let u = -c6 - k * t / c3;
    let du = -2.0 / (c6 * c6) + k * t / (c3 * c3 * c3 * c3);
    (u, du)
}

/// Root of `X = T U − U³/6` continuing the `X → ±∞` branches.
///
/// For `T > 0` and `|X| < (2T)^{3/2}/3` three roots exist; there the two
/// outer branches are joined by the cubic Hermite interpolant matching
/// their values and slopes at the fold abscissae, which is monotone and odd.
pub fn cubic_leading(x: f64, t: f64) -> f64 {
    if t > 0.0 {
        let xs = (2.0 * t).powf(1.5) / 3.0;
        if x.abs() <= xs {
            // At X = ±X*, U = ∓2√(2T) with slope −1/(3T); the matching cubic is odd.
            let r = 2.0 * (2.0 * t).sqrt();
            let slope = -1.0 / (3.0 * t);
            let b = (slope * xs + r) / 2.0;
            let a = -r - b;
            let z = x / xs;
            return z * (a + b * z * z);
        }
    }
    // U³ + pU + q = 0 with p = −6T, q = 6X has a single real root here.
    let p = -6.0 * t;
    let q = 6.0 * x;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let mut u = if disc >= 0.0 {
        let s = disc.sqrt();
        // Pick the non-cancelling combination for the larger term.
        let a = if q >= 0.0 { cbrt(-q / 2.0 - s) } else { cbrt(-q / 2.0 + s) };
        if a == 0.0 {
            0.0
        } else {
            a - p / (3.0 * a)
        }
    } else {
        -cbrt(6.0 * x)
    };
    for _ in 0..3 {
        let f = u * u * u + p * u + q;
        let df = 3.0 * u * u + p;
        if df == 0.0 {
            break;
        }
        u -= f / df;
    }
    u
}

/// Pointwise residual `X − T U + U³/6 + U_X²/24 + U U_XX/12 + U_XXXX/240`.
pub fn pi2_residual(x: f64, t: f64, u: f64, ux: f64, uxx: f64, uxxxx: f64) -> f64 {
    x - t * u + u * u * u / 6.0 + ux * ux / 24.0 + u * uxx / 12.0 + uxxxx / 240.0
}

/// Taylor weights for derivatives `0..=m` at `z` from the nodes `xs`.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Node set and finite-difference operators of order 1, 2 and 4.
#[derive(Clone, Debug)]
pub struct Pi2Grid {
    pub x: Vec<f64>,
    start: Vec<usize>,
    d1: Vec<[f64; STENCIL]>,
    d2: Vec<[f64; STENCIL]>,
    d4: Vec<[f64; STENCIL]>,
}

impl Pi2Grid {
    /// Nodes equidistributing the density `floor + 1/(1 + (X/s)²)`.
    pub fn clustered(x_max: f64, n: usize, s: f64, floor: f64, edge: f64) -> Result<Self> {
        if n < 2 * STENCIL {
            return Err(Error::InvalidParameter(format!("need at least {} nodes, got {n}", 2 * STENCIL)));
        }
        if !(x_max > 0.0 && s > 0.0 && floor > 0.0 && edge > 0.0) {
            return Err(Error::InvalidParameter("grid parameters must be positive".into()));
        }
        let cum = |x: f64| {
            floor * x + s * (x / s).atan() + edge * (((x + x_max) / edge).atan() - ((x_max - x) / edge).atan())
        };
        let density = |x: f64| {
            floor
                + 1.0 / (1.0 + (x / s).powi(2))
                + 1.0 / (1.0 + ((x + x_max) / edge).powi(2))
                + 1.0 / (1.0 + ((x_max - x) / edge).powi(2))
        };
        let total = cum(x_max);
        let mut x: Vec<f64> = (0..n)
            .map(|j| {
                let target = total * (2.0 * j as f64 / (n - 1) as f64 - 1.0);
                let (mut lo, mut hi) = (-x_max, x_max);
                while hi - lo > 1e-14 * x_max {
                    let mid = 0.5 * (lo + hi);
                    if cum(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let x = 0.5 * (lo + hi);
                // One Newton correction sharpens the bisection result.
                let x = x - (cum(x) - target) / density(x);
                x.clamp(-x_max, x_max)
            })
            .collect();
        x[0] = -x_max;
        for j in 0..n / 2 {
            x[n - 1 - j] = -x[j];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        Ok(Self::from_nodes(x))
    }

    pub fn from_nodes(x: Vec<f64>) -> Self {
        let n = x.len();
        let mut start = Vec::with_capacity(n);
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        let mut d4 = Vec::with_capacity(n);
        for i in 0..n {
            let s = i.saturating_sub(STENCIL / 2).min(n - STENCIL);
            let w = fornberg_weights(x[i], &x[s..s + STENCIL], 4);
            let row = |k: usize| -> [f64; STENCIL] {
                let mut r = [0.0; STENCIL];
                r.copy_from_slice(&w[k]);
                r
            };
            start.push(s);
            d1.push(row(1));
            d2.push(row(2));
            d4.push(row(4));
        }
        Pi2Grid { x, start, d1, d2, d4 }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Derivative weights sum to zero, so differences `u_k − u_i` are summed
    /// instead of raw values; this keeps the round-off of the fourth
    /// derivative on fine clusters well below the Newton tolerance.
    fn apply(&self, w: &[[f64; STENCIL]], u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let s = self.start[i];
                w[i].iter().zip(&u[s..s + STENCIL]).map(|(a, b)| a * (b - u[i])).sum()
            })
            .collect()
    }

    pub fn d1(&self, u: &[f64]) -> Vec<f64> {
        self.apply(&self.d1, u)
    }

    pub fn d2(&self, u: &[f64]) -> Vec<f64> {
        self.apply(&self.d2, u)
    }

    pub fn d4(&self, u: &[f64]) -> Vec<f64> {
        self.apply(&self.d4, u)
    }
}

/// Banded matrix with partial-pivoting LU, LAPACK `gbtrf` layout.
struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major, `2kl + ku + 1` slots per row; entry `(i, j)` sits at
    /// slot `j + kl − i`, leaving `kl` extra slots above for pivot fill.
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl Banded {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            a: vec![0.0; n * w],
            piv: Vec::new(),
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    /// Column offset of `(i, j)` within row `i`.
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl) - i
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku {
            return 0.0;
        }
        self.a[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] = v;
    }

    /// In-place factorization; row swaps may widen the upper band to `kl + ku`.
    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        self.piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::NonConvergence {
                    what: format!("banded LU: singular pivot in column {k}"),
                    residuals: vec![],
                });
            }
            self.piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.get(k, j), self.get(p, j));
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / d;
                if l == 0.0 {
                    continue;
                }
                self.set(i, k, l);
                for j in k + 1..=jmax {
                    let v = self.get(i, j) - l * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.get(i, k) * b[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + kl + ku).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=jmax {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
    }
}

/// A converged solve at one `T`.
#[derive(Clone, Debug)]
pub struct Pi2Solution {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_t: Vec<f64>,
    pub u_tt: Vec<f64>,
    /// Sup-norm of the interior residual.
    pub residual: f64,
    pub newton_iterations: usize,
    pub x_max: f64,
    pub nodes: usize,
    /// Step lengths accepted by the line search, per Newton iteration.
    pub damping: Vec<f64>,
    /// `|U − asymptotic|` at `X = −X_max/2` and `X = +X_max/2`.
    pub boundary_mismatch: (f64, f64),
    /// The two mismatches differ by more than a factor of 10.
    pub asymmetric: bool,
}

/// Smooth odd profile `−6X (36X² + 576)^{−1/3}` with the leading far-field
/// behaviour, and its exact derivatives at the nodes. Newton works on the
/// deviation from it, so rounding of the stored unknowns is set by the
/// deviation and not by `|U| ≈ (6 X_max)^{1/3}`.
struct Background {
    g: [Vec<f64>; 4],
}

impl Background {
    fn new(x: &[f64]) -> Self {
        let mut g: [Vec<f64>; 4] = Default::default();
        for &x0 in x {
            let z = Jet::variable(x0, 4);
            let q = (z.square() * 36.0 + 576.0).powf(-1.0 / 3.0);
            let d = (z * q * -6.0).derivatives();
            for (slot, k) in g.iter_mut().zip([0, 1, 2, 4]) {
                slot.push(d[k]);
            }
        }
        Background { g }
    }
}

struct System<'a> {
    grid: &'a Pi2Grid,
    bg: &'a Background,
    t: f64,
}

impl System<'_> {
    /// `U` and its `X`-derivatives of orders 1, 2, 4 from the deviation `w`.
    fn fields(&self, w: &[f64]) -> [Vec<f64>; 4] {
        let g = self.grid;
        let add = |a: Vec<f64>, b: &[f64]| a.into_iter().zip(b).map(|(p, q)| p + q).collect::<Vec<f64>>();
        [
            add(w.to_vec(), &self.bg.g[0]),
            add(g.d1(w), &self.bg.g[1]),
            add(g.d2(w), &self.bg.g[2]),
            add(g.d4(w), &self.bg.g[3]),
        ]
    }

    fn residual(&self, w: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.len();
        let [u, ux, uxx, u4] = self.fields(w);
        let mut r = vec![0.0; n];
        for i in 2..n - 2 {
            r[i] = pi2_residual(g.x[i], self.t, u[i], ux[i], uxx[i], u4[i]);
        }
        let (gl, dgl) = asymptotic(g.x[0], self.t);
        let (gr, dgr) = asymptotic(g.x[n - 1], self.t);
        r[0] = u[0] - gl;
        r[1] = ux[0] - dgl;
        r[n - 2] = ux[n - 1] - dgr;
        r[n - 1] = u[n - 1] - gr;
        r
    }

    /// Jacobian of [`System::residual`]; boundary rows use the given
    /// right-hand side convention (value and slope rows).
    fn jacobian(&self, w: &[f64]) -> Banded {
        let g = self.grid;
        let n = g.len();
        let [u, ux, uxx, _] = self.fields(w);
        let mut m = Banded::new(n, BAND, BAND);
        m.add(0, 0, 1.0);
        m.add(n - 1, n - 1, 1.0);
        for (row, node) in [(1, 0), (n - 2, n - 1)] {
            let s = g.start[node];
            for k in 0..STENCIL {
                m.add(row, s + k, g.d1[node][k]);
            }
        }
        for i in 2..n - 2 {
            let s = g.start[i];
            m.add(i, i, -self.t + u[i] * u[i] / 2.0 + uxx[i] / 12.0);
            for k in 0..STENCIL {
                let w = ux[i] / 12.0 * g.d1[i][k] + u[i] / 12.0 * g.d2[i][k] + g.d4[i][k] / 240.0;
                m.add(i, s + k, w);
            }
        }
        m
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn interior_sup(r: &[f64]) -> f64 {
    sup(&r[2..r.len() - 2])
}

fn newton(sys: &System, mut u: Vec<f64>, opts: &Pi2Options) -> Result<(Vec<f64>, usize, Vec<f64>, f64)> {
    let t = sys.t;
    let mut r = sys.residual(&u);
    let mut damping = Vec::new();
    let mut history = vec![sup(&r)];
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    for it in 0..opts.max_newton {
        let rs = sup(&r);
        if rs <= opts.tol {
            return Ok((u, it, damping, rs));
        }
        if rs < best * 0.5 {
            best = rs;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= 4 && rs < 1e3 * opts.tol {
                return Err(Error::Accuracy {
                    target: opts.tol,
                    achieved: rs,
                });
            }
        }
        let mut jac = sys.jacobian(&u);
        jac.factor()?;
        let mut du: Vec<f64> = r.iter().map(|v| -v).collect();
        jac.solve(&mut du);
        let r0 = norm2(&r);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + lambda * b).collect();
            let rt = sys.residual(&trial);
            let rn = norm2(&rt);
            if rn.is_finite() && rn <= (1.0 - 1e-4 * lambda) * r0 {
                u = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
            if lambda < 2f64.powi(-20) {
                damping.push(lambda);
                let rs = sup(&r);
                // Failure right at the round-off floor is a plateau, not divergence.
                if rs < 1e3 * opts.tol {
                    return Err(Error::Accuracy {
                        target: opts.tol,
                        achieved: rs,
                    });
                }
                return Err(Error::NonConvergence {
                    what: format!("PI2 Newton at T = {t} (line search failed, damping trace {damping:?})"),
                    residuals: history,
                });
            }
        }
        damping.push(lambda);
        history.push(sup(&r));
    }
    let rs = sup(&r);
    if rs <= opts.tol {
        return Ok((u, opts.max_newton, damping, rs));
    }
    Err(Error::NonConvergence {
        what: format!("PI2 Newton at T = {t} (damping trace {damping:?})"),
        residuals: history,
    })
}

/// `U_T` from `J U_T = U` and `U_TT` from `J U_TT = 2U_T − (U U_T² + U_XT²/12 + U_T U_XXT/6)`.
fn t_derivatives(sys: &System, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = sys.grid;
    let n = grid.len();
    let mut jac = sys.jacobian(w);
    let u = &sys.fields(w)[0];
    jac.factor()?;
    let k = 2f64.powf(2.0 / 3.0);
    let bc = |x: f64| -k / cbrt(3.0 * x);
    let bc_x = |x: f64| k / cbrt(3.0 * x).powi(4);
    let mut b = u.to_vec();
    b[0] = bc(grid.x[0]);
    b[1] = bc_x(grid.x[0]);
    b[n - 2] = bc_x(grid.x[n - 1]);
    b[n - 1] = bc(grid.x[n - 1]);
    // Interior rows: ∂_T of the residual is −U + J U_T.
    jac.solve(&mut b);
    let ut = b;
    let (utx, utxx) = (grid.d1(&ut), grid.d2(&ut));
    let mut c: Vec<f64> = (0..n)
        .map(|i| 2.0 * ut[i] - (u[i] * ut[i] * ut[i] + utx[i] * utx[i] / 12.0 + ut[i] * utxx[i] / 6.0))
        .collect();
    c[0] = 0.0;
    c[1] = 0.0;
    c[n - 2] = 0.0;
    c[n - 1] = 0.0;
    jac.solve(&mut c);
    Ok((ut, c))
}

fn finish(sys: &System, w: Vec<f64>, iters: usize, damping: Vec<f64>, opts: &Pi2Options) -> Result<Pi2Solution> {
    let (grid, t) = (sys.grid, sys.t);
    let res = interior_sup(&sys.residual(&w));
    let (u_t, u_tt) = t_derivatives(sys, &w)?;
    let u: Vec<f64> = w.iter().zip(&sys.bg.g[0]).map(|(a, b)| a + b).collect();
    let probe = |x0: f64| {
        let i = grid.x.partition_point(|&x| x < x0).min(grid.len() - 1);
        (u[i] - asymptotic(grid.x[i], t).0).abs()
    };
    let (l, r) = (probe(-opts.x_max / 2.0), probe(opts.x_max / 2.0));
    let asymmetric = l.max(r) > 10.0 * l.min(r).max(f64::MIN_POSITIVE);
    Ok(Pi2Solution {
        t,
        x: grid.x.clone(),
        u,
        u_t,
        u_tt,
        residual: res,
        newton_iterations: iters,
        x_max: opts.x_max,
        nodes: grid.len(),
        damping,
        boundary_mismatch: (l, r),
        asymmetric,
    })
}

fn check_options(opts: &Pi2Options) -> Result<()> {
    if opts.x_max < 100.0 {
        return Err(Error::InvalidParameter(format!("X_max must be at least 100, got {}", opts.x_max)));
    }
    if !(opts.tol > 0.0) || !(opts.continuation_step > 0.0) || !(opts.table_spacing > 0.0) {
        return Err(Error::InvalidParameter("tolerance and step sizes must be positive".into()));
    }
    Ok(())
}

pub fn pi2_grid(opts: &Pi2Options) -> Result<Pi2Grid> {
    Pi2Grid::clustered(opts.x_max, opts.nodes, opts.cluster_width, opts.density_floor, opts.edge_width)
}

/// Solves at one `T`. For `|T| > 0.5` the solution is continued from
/// `T = 0` in steps no larger than `continuation_step`, each predicted by
/// a second-order Taylor step in `T`.
pub fn pi2_solve(t: f64, opts: &Pi2Options) -> Result<Pi2Solution> {
    check_options(opts)?;
    let grid = pi2_grid(opts)?;
    let bg = Background::new(&grid.x);
    let sys = |t: f64| System { grid: &grid, bg: &bg, t };
    let guess = |t: f64| -> Vec<f64> { grid.x.iter().zip(&bg.g[0]).map(|(&x, g)| cubic_leading(x, t) - g).collect() };
    if t.abs() <= 0.5 {
        let (w, it, damping, _) = newton(&sys(t), guess(t), opts)?;
        return finish(&sys(t), w, it, damping, opts);
    }
    let steps = (t.abs() / opts.continuation_step).ceil() as usize;
    let h = t / steps as f64;
    let (mut w, mut total, mut damping, _) = newton(&sys(0.0), guess(0.0), opts)?;
    let mut tk = 0.0;
    for k in 1..=steps {
        let (ut, utt) = t_derivatives(&sys(tk), &w)?;
        let next: Vec<f64> = (0..w.len()).map(|i| w[i] + h * ut[i] + 0.5 * h * h * utt[i]).collect();
        tk = if k == steps { t } else { h * k as f64 };
        let (v, it, d, _) = newton(&sys(tk), next, opts)?;
        w = v;
        total += it;
        damping.extend(d);
    }
    finish(&sys(t), w, total, damping, opts)
}

/// Solutions at several `T` plus an interpolant in `(X, T)`: quintic
/// Hermite in both directions, from values and first and second
/// derivatives. Outside `[−X_max, X_max]` the two-term asymptotics is used.
#[derive(Clone, Debug)]
pub struct Pi2Table {
    pub solutions: Vec<Pi2Solution>,
    grid: Pi2Grid,
    /// First and second `X`-derivatives of `U`, `U_T`, `U_TT` per solution.
    dx: Vec<[[Vec<f64>; 2]; 3]>,
}

pub fn pi2_tabulate(t_values: &[f64], opts: &Pi2Options) -> Result<Pi2Table> {
    if t_values.is_empty() {
        return Err(Error::InvalidParameter("empty T list".into()));
    }
    let mut req = t_values.to_vec();
    req.sort_by(f64::total_cmp);
    req.dedup();
    let mut ts = vec![req[0]];
    for w in req.windows(2) {
        let m = ((w[1] - w[0]) / opts.table_spacing).ceil().max(1.0) as usize;
        ts.extend((1..=m).map(|j| if j == m { w[1] } else { w[0] + (w[1] - w[0]) * j as f64 / m as f64 }));
    }
    let sols: Result<Vec<Pi2Solution>> = ts.par_iter().map(|&t| pi2_solve(t, opts)).collect();
    Pi2Table::from_solutions(sols?)
}

fn hermite5(h: f64, s: f64, a: [f64; 3], b: [f64; 3]) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 0.5 * (s3 - 2.0 * s4 + s5);
    a[0] * h0 + h * a[1] * h1 + h * h * a[2] * h2 + b[0] * h3 + h * b[1] * h4 + h * h * b[2] * h5
}

impl Pi2Table {
    pub fn from_solutions(mut solutions: Vec<Pi2Solution>) -> Result<Self> {
        if solutions.is_empty() {
            return Err(Error::InvalidParameter("no PI2 solutions".into()));
        }
        solutions.sort_by(|a, b| a.t.total_cmp(&b.t));
        let x = solutions[0].x.clone();
        if solutions.iter().any(|s| s.x != x) {
            return Err(Error::InvalidParameter("PI2 solutions use different node sets".into()));
        }
        let grid = Pi2Grid::from_nodes(x);
        let dx = solutions
            .iter()
            .map(|s| [&s.u, &s.u_t, &s.u_tt].map(|v| [grid.d1(v), grid.d2(v)]))
            .collect();
        Ok(Pi2Table { solutions, grid, dx })
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.solutions[0].t, self.solutions[self.solutions.len() - 1].t)
    }

    pub fn x_max(&self) -> f64 {
        self.solutions[0].x_max
    }

    /// Hermite interpolation in `X` of field `f` (0: U, 1: U_T, 2: U_TT) of solution `k`.
    fn at_x(&self, k: usize, f: usize, x: f64) -> f64 {
        let xs = &self.grid.x;
        let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1) - 1;
        let s = &self.solutions[k];
        let vals = match f {
            0 => &s.u,
            1 => &s.u_t,
            _ => &s.u_tt,
        };
        let [d1, d2] = &self.dx[k][f];
        let h = xs[i + 1] - xs[i];
        let j = i + 1;
        hermite5(h, (x - xs[i]) / h, [vals[i], d1[i], d2[i]], [vals[j], d1[j], d2[j]])
    }

    /// `U(X; T)`. Inside the `T`-range of the table; `|X| > X_max` uses the asymptotics.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let (t0, t1) = self.t_range();
        let tol = 1e-12 * t0.abs().max(t1.abs()).max(1.0);
        if t < t0 - tol || t > t1 + tol {
            return Err(Error::OutOfWindow(format!("T = {t} outside tabulated range [{t0}, {t1}]")));
        }
        let xm = self.x_max();
        if x.abs() > xm {
            return Ok(asymptotic(x, t).0);
        }
        if self.solutions.len() == 1 {
            return Ok(self.at_x(0, 0, x));
        }
        let ts: Vec<f64> = self.solutions.iter().map(|s| s.t).collect();
        let k = ts.partition_point(|&v| v <= t).clamp(1, ts.len() - 1) - 1;
        let h = ts[k + 1] - ts[k];
        let s = ((t - ts[k]) / h).clamp(0.0, 1.0);
        let a = [self.at_x(k, 0, x), self.at_x(k, 1, x), self.at_x(k, 2, x)];
        let b = [self.at_x(k + 1, 0, x), self.at_x(k + 1, 1, x), self.at_x(k + 1, 2, x)];
        Ok(hermite5(h, s, a, b))
    }

    /// Writes the versioned text format: `#`-prefixed header lines, then one
    /// block per `T` with columns `X U U_T U_TT` in 17-significant-digit
    /// scientific notation.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let s0 = &self.solutions[0];
        writeln!(out, "# pi2-table v1").unwrap();
        let ts: Vec<String> = self.solutions.iter().map(|s| format!("{:.16e}", s.t)).collect();
        writeln!(out, "# t_values {}", ts.join(" ")).unwrap();
        writeln!(out, "# x_max {:.16e}", s0.x_max).unwrap();
        writeln!(out, "# nodes {}", s0.nodes).unwrap();
        let rs: Vec<String> = self.solutions.iter().map(|s| format!("{:.16e}", s.residual)).collect();
        writeln!(out, "# residuals {}", rs.join(" ")).unwrap();
        for s in &self.solutions {
            writeln!(out, "# block T {:.16e} newton {}", s.t, s.newton_iterations).unwrap();
            writeln!(out, "# X U U_T U_TT").unwrap();
            for i in 0..s.x.len() {
                writeln!(out, "{:.16e} {:.16e} {:.16e} {:.16e}", s.x[i], s.u[i], s.u_t[i], s.u_tt[i]).unwrap();
            }
        }
        crate::io::write_atomic(path, out.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let perr = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            msg,
        };
        if text.lines().next() != Some("# pi2-table v1") {
            return Err(perr("missing `# pi2-table v1` header".into()));
        }
        let mut x_max = None;
        let mut residuals: Vec<f64> = Vec::new();
        let mut sols: Vec<Pi2Solution> = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("line {}: {e}", ln + 1)));
            if let Some(rest) = line.strip_prefix("# ") {
                let mut it = rest.split_whitespace();
                match it.next() {
                    Some("x_max") => x_max = Some(num(it.next().unwrap_or(""))?),
                    Some("residuals") => residuals = it.map(num).collect::<Result<_>>()?,
                    Some("block") => {
                        let t = num(it.nth(1).unwrap_or(""))?;
                        let newton = it.nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
                        sols.push(Pi2Solution {
                            t,
                            x: vec![],
                            u: vec![],
                            u_t: vec![],
                            u_tt: vec![],
                            residual: residuals.get(sols.len()).copied().unwrap_or(f64::NAN),
                            newton_iterations: newton,
                            x_max: x_max.ok_or_else(|| perr("x_max missing before first block".into()))?,
                            nodes: 0,
                            damping: vec![],
                            boundary_mismatch: (f64::NAN, f64::NAN),
                            asymmetric: false,
                        });
                    }
                    _ => {}
                }
                continue;
            }
            let s = sols.last_mut().ok_or_else(|| perr(format!("line {}: data before block header", ln + 1)))?;
            let v: Vec<f64> = line.split_whitespace().map(num).collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(perr(format!("line {}: expected 4 columns, got {}", ln + 1, v.len())));
            }
            s.x.push(v[0]);
            s.u.push(v[1]);
            s.u_t.push(v[2]);
            s.u_tt.push(v[3]);
        }
        for s in sols.iter_mut() {
            s.nodes = s.x.len();
        }
        Pi2Table::from_solutions(sols)
    }
}
