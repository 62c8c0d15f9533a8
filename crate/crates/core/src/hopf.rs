//! Dispersionless solutions of `u_t + a(u) u_x = 0` by characteristics and the
//! point of gradient catastrophe.
//!
//! The solution is `u = φ(ξ)` with `x = ξ + t a(φ(ξ))`, or equivalently
//! `x = t a(u) + Φ(u)` on a monotone branch `Φ = φ^{-1}`.

use crate::error::{Error, Result};
use crate::jet::{Jet, SmoothFn};

/// Inverse of the initial data on one monotone piece.
#[derive(Clone, Debug)]
pub struct InverseBranch {
    pub label: String,
    pub inverse: SmoothFn,
    /// Open interval of u-values covered by the branch.
    pub u_range: (f64, f64),
    /// Interval of x on which `φ` is monotone and inverted by `inverse`.
    pub x_range: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct InitialData {
    pub label: String,
    pub phi: SmoothFn,
    pub branches: Vec<InverseBranch>,
    /// `[inf φ, sup φ]`.
    pub value_range: (f64, f64),
}

impl InitialData {
    /// `φ(x) = sech² x` with `Φ(u) = ±ln((1 + √(1−u))/√u)`.
    pub fn sech2() -> Self {
        let plus = SmoothFn::new("ln((1+sqrt(1-u))/sqrt(u))", |j| {
            let s = (1.0 - *j).sqrt();
            ((s + 1.0) / j.sqrt()).ln()
        });
        let minus = plus.scale(-1.0);
        InitialData {
            label: "sech2".into(),
            phi: SmoothFn::new("sech^2", |j| j.cosh().powi(-2)),
            branches: vec![
                InverseBranch {
                    label: "x>0".into(),
                    inverse: plus,
                    u_range: (0.0, 1.0),
                    x_range: (0.0, f64::INFINITY),
                },
                InverseBranch {
                    label: "x<0".into(),
                    inverse: minus,
                    u_range: (0.0, 1.0),
                    x_range: (f64::NEG_INFINITY, 0.0),
                },
            ],
            value_range: (0.0, 1.0),
        }
    }

    /// Branch whose x-interval contains `xi`.
    pub fn branch_at(&self, xi: f64) -> Option<usize> {
        self.branches
            .iter()
            .position(|b| xi >= b.x_range.0 && xi <= b.x_range.1)
    }
}

/// Range `[min a, max a]` over the values of the data.
fn speed_range(a: &SmoothFn, data: &InitialData) -> (f64, f64) {
    let (lo, hi) = data.value_range;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in 0..=400 {
        let v = a.eval(lo + (hi - lo) * i as f64 / 400.0);
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// A solved characteristic: `u = φ(ξ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopfPoint {
    pub u: f64,
    pub xi: f64,
    pub iterations: usize,
    /// The Newton fallback was used.
    pub newton: bool,
}

pub const DEFAULT_HOPF_TOL: f64 = 1e-14;
const MAX_FIXED_POINT: usize = 400;

/// Solve `u = φ(x − t a(u))`. Fixed-point iteration while the contraction
/// factor `|t a'(u) φ'(ξ)|` stays below 0.9, then safeguarded Newton on the
/// foot `ξ` of the characteristic.
pub fn hopf_solve(a: &SmoothFn, data: &InitialData, x: f64, t: f64, tol: f64) -> Result<HopfPoint> {
    if t == 0.0 {
        return Ok(HopfPoint {
            u: data.phi.eval(x),
            xi: x,
            iterations: 0,
            newton: false,
        });
    }
    let mut u = data.phi.eval(x);
    let mut xi = x;
    let mut prev_step = f64::INFINITY;
    let mut stalls = 0;
    for it in 1..=MAX_FIXED_POINT {
        let aj = a.apply(&Jet::variable(u, 1));
        xi = x - t * aj.value();
        let pj = data.phi.apply(&Jet::variable(xi, 1));
        let u_new = pj.value();
        let contraction = (t * aj.derivative(1) * pj.derivative(1)).abs();
        let step = (u_new - u).abs();
        u = u_new;
        if step <= tol * u.abs().max(1.0) {
            let (lo, hi) = bracket(a, data, x, t);
            if folded(&foot_residual(a, data, x, t), lo, hi) {
                return Err(Error::MultivaluedRegion { x, t, lo, hi });
            }
            return Ok(HopfPoint {
                u,
                xi: x - t * a.eval(u),
                iterations: it,
                newton: false,
            });
        }
        if contraction >= 0.9 {
            break;
        }
        if step >= prev_step {
            stalls += 1;
            if stalls > 3 {
                break;
            }
        }
        prev_step = step;
    }
    newton_on_foot(a, data, x, t, xi, tol)
}

/// More than one sign change of `F(ξ) = ξ + t a(φ(ξ)) − x` on the bracket
/// means the characteristics through `x` have crossed.
fn folded(f: &impl Fn(f64) -> (f64, f64), lo: f64, hi: f64) -> bool {
    let samples = 128;
    let mut changes = 0;
    let mut last = f(lo).0;
    for i in 1..=samples {
        let v = f(lo + (hi - lo) * i as f64 / samples as f64).0;
        if v != 0.0 && last != 0.0 && (v > 0.0) != (last > 0.0) {
            changes += 1;
        }
        if v != 0.0 {
            last = v;
        }
    }
    changes > 1
}

fn foot_residual<'a>(a: &'a SmoothFn, data: &'a InitialData, x: f64, t: f64) -> impl Fn(f64) -> (f64, f64) + 'a {
    move |xi: f64| {
        let pj = data.phi.apply(&Jet::variable(xi, 1));
        let aj = a.apply(&Jet::variable(pj.value(), 1));
        (
            xi + t * aj.value() - x,
            1.0 + t * aj.derivative(1) * pj.derivative(1),
        )
    }
}

fn bracket(a: &SmoothFn, data: &InitialData, x: f64, t: f64) -> (f64, f64) {
    let (amin, amax) = speed_range(a, data);
    if t > 0.0 {
        (x - t * amax, x - t * amin)
    } else {
        (x - t * amin, x - t * amax)
    }
}

fn newton_on_foot(a: &SmoothFn, data: &InitialData, x: f64, t: f64, guess: f64, tol: f64) -> Result<HopfPoint> {
    let (mut lo, mut hi) = bracket(a, data, x, t);
    let (blo, bhi) = (lo, hi);
    let f = foot_residual(a, data, x, t);
    if folded(&f, lo, hi) {
        return Err(Error::MultivaluedRegion { x, t, lo: blo, hi: bhi });
    }
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        // F is increasing in the single-valued regime; anything else means folding.
        if flo == 0.0 || fhi == 0.0 {
            let xi = if flo == 0.0 { lo } else { hi };
            let u = data.phi.eval(xi);
            return Ok(HopfPoint { u, xi, iterations: 0, newton: true });
        }
        return Err(Error::MultivaluedRegion { x, t, lo: blo, hi: bhi });
    }
    let mut xi = guess.clamp(lo, hi);
    let mut history = Vec::new();
    for it in 1..=200 {
        let (fv, df) = f(xi);
        history.push(fv.abs());
        if fv == 0.0 {
            return finish(data, xi, it, x, t, blo, bhi, df);
        }
        if fv < 0.0 {
            lo = xi;
        } else {
            hi = xi;
        }
        let newton = xi - fv / df;
        let next = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let dx = (next - xi).abs();
        xi = next;
        if dx <= tol * (1.0 + xi.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + xi.abs()) {
            let (_, df) = f(xi);
            return finish(data, xi, it, x, t, blo, bhi, df);
        }
    }
    Err(Error::NonConvergence {
        what: format!("characteristic foot at x = {x}, t = {t}"),
        residuals: history,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(data: &InitialData, xi: f64, it: usize, x: f64, t: f64, lo: f64, hi: f64, df: f64) -> Result<HopfPoint> {
    if df < 0.0 {
        return Err(Error::MultivaluedRegion { x, t, lo, hi });
    }
    Ok(HopfPoint {
        u: data.phi.eval(xi),
        xi,
        iterations: it,
        newton: true,
    })
}

/// `hopf_solve` at every entry of `xs`.
pub fn hopf_solve_grid(a: &SmoothFn, data: &InitialData, xs: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    xs.iter().map(|&x| hopf_solve(a, data, x, t, tol).map(|p| p.u)).collect()
}

/// Local Taylor expansion of the solution in `x` at fixed `t`.
#[derive(Clone, Copy, Debug)]
pub struct HopfJet {
    pub point: HopfPoint,
    /// `u(x + δx, t)` as a jet in `δx`.
    pub jet: Jet,
    /// `t a'(u) + Φ'(u)`, the inverse of `u_x`.
    pub denominator: f64,
}

impl HopfJet {
    pub fn u_x(&self) -> f64 {
        self.jet.derivative(1)
    }

    pub fn u_xx(&self) -> f64 {
        self.jet.derivative(2)
    }

    pub fn u_xxx(&self) -> f64 {
        self.jet.derivative(3)
    }
}

/// Derivatives of `u(x, t)` up to `order` by implicit differentiation of
/// `x = ξ + t a(φ(ξ))`. Fails near a caustic, `|t a' + Φ'| < 1e-13`.
pub fn hopf_jet(a: &SmoothFn, data: &InitialData, x: f64, t: f64, order: usize) -> Result<HopfJet> {
    let point = hopf_solve(a, data, x, t, DEFAULT_HOPF_TOL)?;
    let order = order.max(1);
    let v = Jet::variable(point.xi, order);
    let phi = data.phi.apply(&v);
    let xmap = v + a.apply(&phi).scale(t);
    let d = xmap.coeff(1);
    let dphi = phi.coeff(1);
    // t a' + Φ' = (1 + t a' φ')/φ'; infinite where φ' = 0
    let denominator = if dphi != 0.0 { d / dphi } else { f64::INFINITY };
    if denominator.abs() < 1e-13 || d == 0.0 {
        return Err(Error::NearCaustic { x, t, denominator });
    }
    let mut shift = xmap;
    shift = shift.offset(-shift.value());
    let dxi = shift.invert_series();
    let jet = Jet::compose_poly(phi.coeffs(), &dxi);
    Ok(HopfJet { point, jet, denominator })
}

/// `(u_x, u_xx, u_xxx)` at `(x, t)`.
pub fn hopf_derivatives(a: &SmoothFn, data: &InitialData, x: f64, t: f64) -> Result<(f64, f64, f64)> {
    let j = hopf_jet(a, data, x, t, 3)?;
    Ok((j.u_x(), j.u_xx(), j.u_xxx()))
}

/// Point of gradient catastrophe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalPoint {
    pub x_c: f64,
    pub t_c: f64,
    pub u_c: f64,
    /// `k = −(a'''(u_c) t_c + Φ'''(u_c))/6`.
    pub k: f64,
    /// Breakup strength in the limit normalization
    /// `lim (x − x_c)/(u − u_c)³ = −k_limit/6` along `t = t_c`; equals `6k`.
    pub k_limit: f64,
    /// The same quantity estimated from difference quotients of `x(u)`.
    pub k_limit_estimate: f64,
    pub branch: usize,
    /// Residuals of `x = t a + Φ`, `t a' + Φ' = 0`, `t a'' + Φ'' = 0`.
    pub residuals: [f64; 3],
}

fn derivs(f: &SmoothFn, u: f64, n: usize) -> Vec<f64> {
    f.derivs(u, n)
}

/// Solve `t a'(u) + Φ'(u) = 0`, `t a''(u) + Φ''(u) = 0` for `(u_c, t_c)`
/// on the branch with the earliest positive breakup time, then
/// `x_c = t_c a(u_c) + Φ(u_c)`.
pub fn critical_point(a: &SmoothFn, data: &InitialData) -> Result<CriticalPoint> {
    let mut best: Option<CriticalPoint> = None;
    let mut failures = Vec::new();
    for (bi, br) in data.branches.iter().enumerate() {
        let phi_inv = &br.inverse;
        let (lo, hi) = br.u_range;
        let g = |u: f64| {
            let ad = derivs(a, u, 2);
            let pd = derivs(phi_inv, u, 2);
            -ad[2] * pd[1] / ad[1] + pd[2]
        };
        let m = 4000;
        let pad = 1e-6 * (hi - lo);
        let us: Vec<f64> = (0..=m)
            .map(|i| lo + pad + (hi - lo - 2.0 * pad) * i as f64 / m as f64)
            .collect();
        let gs: Vec<f64> = us.iter().map(|&u| g(u)).collect();
        for i in 0..m {
            if !(gs[i].is_finite() && gs[i + 1].is_finite()) || (gs[i] > 0.0) == (gs[i + 1] > 0.0) {
                continue;
            }
            // bisection on g, then Newton on the 2x2 system
            let (mut l, mut r) = (us[i], us[i + 1]);
            let gl = gs[i];
            for _ in 0..60 {
                let mid = 0.5 * (l + r);
                if (g(mid) > 0.0) == (gl > 0.0) {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            let mut u = 0.5 * (l + r);
            let mut t = {
                let ad = derivs(a, u, 1);
                -derivs(phi_inv, u, 1)[1] / ad[1]
            };
            let mut res = Vec::new();
            let mut ok = false;
            for _ in 0..50 {
                let ad = derivs(a, u, 3);
                let pd = derivs(phi_inv, u, 3);
                let r1 = ad[1] * t + pd[1];
                let r2 = ad[2] * t + pd[2];
                res.push(r1.abs().max(r2.abs()));
                let j11 = ad[2] * t + pd[2];
                let j12 = ad[1];
                let j21 = ad[3] * t + pd[3];
                let j22 = ad[2];
                let det = j11 * j22 - j12 * j21;
                if det == 0.0 {
                    break;
                }
                let du = (r1 * j22 - r2 * j12) / det;
                let dt = (j11 * r2 - j21 * r1) / det;
                u -= du;
                t -= dt;
                if du.abs() < 1e-15 * u.abs().max(1.0) && dt.abs() < 1e-15 * t.abs().max(1.0) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                let ad = derivs(a, u, 2);
                let pd = derivs(phi_inv, u, 2);
                let worst = (ad[1] * t + pd[1]).abs().max((ad[2] * t + pd[2]).abs());
                ok = worst < 1e-10;
                if !ok {
                    failures.push(res);
                    continue;
                }
            }
            if !(t > 0.0) || !(u > lo && u < hi) {
                continue;
            }
            let ad = derivs(a, u, 3);
            let pd = derivs(phi_inv, u, 3);
            let x_c = t * ad[0] + pd[0];
            let k = -(ad[3] * t + pd[3]) / 6.0;
            let residuals = [0.0, ad[1] * t + pd[1], ad[2] * t + pd[2]];
            let cp = CriticalPoint {
                x_c,
                t_c: t,
                u_c: u,
                k,
                k_limit: 6.0 * k,
                k_limit_estimate: limit_strength(a, phi_inv, u, t, x_c),
                branch: bi,
                residuals,
            };
            if best.is_none_or(|b| cp.t_c < b.t_c) {
                best = Some(cp);
            }
        }
    }
    let cp = match best {
        Some(cp) => cp,
        None if !failures.is_empty() => {
            return Err(Error::NonConvergence {
                what: "critical point Newton iteration".into(),
                residuals: failures.concat(),
            })
        }
        None => {
            return Err(Error::Genericity(
                "no gradient catastrophe at positive time on any branch".into(),
            ))
        }
    };
    if cp.k == 0.0 || !cp.k.is_finite() {
        return Err(Error::Genericity(format!("breakup strength k = {}", cp.k)));
    }
    let a1 = a.deriv(cp.u_c, 1);
    if a1 * cp.k <= 0.0 {
        return Err(Error::Genericity(format!("a'(u_c) k = {} is not positive", a1 * cp.k)));
    }
    Ok(cp)
}

/// `−6 lim (x − x_c)/(u − u_c)³` at `t = t_c` from symmetric difference
/// quotients with one Richardson step.
fn limit_strength(a: &SmoothFn, phi_inv: &SmoothFn, u_c: f64, t_c: f64, x_c: f64) -> f64 {
    let q = |h: f64| {
        let xp = t_c * a.eval(u_c + h) + phi_inv.eval(u_c + h);
        let xm = t_c * a.eval(u_c - h) + phi_inv.eval(u_c - h);
        -6.0 * 0.5 * ((xp - x_c) / h.powi(3) + (xm - x_c) / (-h).powi(3))
    };
    let h = 1e-2 * u_c.abs().max(1e-3);
    let (q1, q2) = (q(h), q(h / 2.0));
    (4.0 * q2 - q1) / 3.0
}

/// `u_x` along the curve `x_c(t) = x_c + a(u_c)(t − t_c)` evaluated with the
/// closed-form derivative (helper for blow-up rate studies).
pub fn slope_along_critical_line(a: &SmoothFn, data: &InitialData, cp: &CriticalPoint, t: f64) -> Result<f64> {
    let x = cp.x_c + a.eval(cp.u_c) * (t - cp.t_c);
    Ok(hopf_jet(a, data, x, t, 1)?.u_x())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_u() -> SmoothFn {
        SmoothFn::monomial(6.0, 1)
    }

    #[test]
    fn inverse_branches_round_trip() {
        let d = InitialData::sech2();
        for b in &d.branches {
            for &u in &[0.01, 0.3, 0.7, 0.999] {
                let x = b.inverse.eval(u);
                assert!((d.phi.eval(x) - u).abs() < 1e-12);
                assert!(x >= b.x_range.0 && x <= b.x_range.1);
            }
        }
    }

    #[test]
    fn time_zero_is_data() {
        let d = InitialData::sech2();
        for &x in &[-3.0, 0.0, 0.4, 2.0] {
            assert_eq!(hopf_solve(&six_u(), &d, x, 0.0, 1e-14).unwrap().u, d.phi.eval(x));
            let (ux, _, _) = hopf_derivatives(&six_u(), &d, x, 0.0).unwrap();
            assert!((ux - d.phi.deriv(x, 1)).abs() < 1e-15);
        }
    }

    #[test]
    fn implicit_relation_holds() {
        let d = InitialData::sech2();
        let a = six_u();
        for i in 0..=40 {
            let x = -4.0 + 0.2 * i as f64;
            let p = hopf_solve(&a, &d, x, 0.2, 1e-14).unwrap();
            assert!((x - 0.2 * a.eval(p.u) - p.xi).abs() < 1e-12);
            assert!((d.phi.eval(p.xi) - p.u).abs() < 1e-13);
        }
    }

    #[test]
    fn multivalued_after_breakup() {
        let d = InitialData::sech2();
        let a = six_u();
        // t = 0.4 > t_c: characteristics have crossed near x ≈ 2
        let mut found = false;
        for i in 0..200 {
            let x = 1.0 + 0.01 * i as f64;
            if let Err(Error::MultivaluedRegion { .. }) = hopf_solve(&a, &d, x, 0.4, 1e-14) {
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn kdv_critical_point() {
        let d = InitialData::sech2();
        let cp = critical_point(&six_u(), &d).unwrap();
        assert!((cp.u_c - 2.0 / 3.0).abs() < 1e-12);
        assert!((cp.t_c - 3f64.powf(1.5) / 24.0).abs() < 1e-12);
        assert!((cp.k - 3f64.powf(4.5) / 96.0).abs() < 1e-10);
        assert!((cp.k_limit_estimate / cp.k_limit - 1.0).abs() < 1e-6);
        assert_eq!(cp.branch, 0);
    }

    #[test]
    fn sinh_critical_point_residuals() {
        let d = InitialData::sech2();
        let a = SmoothFn::new("6 sinh", |j| j.sinh().scale(6.0));
        let cp = critical_point(&a, &d).unwrap();
        let phi = &d.branches[cp.branch].inverse;
        let r0 = cp.x_c - cp.t_c * a.eval(cp.u_c) - phi.eval(cp.u_c);
        let r1 = cp.t_c * a.deriv(cp.u_c, 1) + phi.deriv(cp.u_c, 1);
        let r2 = cp.t_c * a.deriv(cp.u_c, 2) + phi.deriv(cp.u_c, 2);
        assert!(r0.abs() < 1e-10 && r1.abs() < 1e-10 && r2.abs() < 1e-10);
    }
}
