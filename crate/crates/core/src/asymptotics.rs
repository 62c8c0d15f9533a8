//! Approximations of the dispersive solution built from the dispersionless one.
//!
//! Near the point of gradient catastrophe the solution is approximated by the
//! rescaled PI2 profile
//!
//! ```text
//! u ≈ u_c + α ε^{2/7} U((x − x_c − a₀(t − t_c)) / (β ε^{6/7}); (t − t_c) / (γ ε^{4/7}))
//! ```
//!
//! and before it by the quasitriviality transformation of the Hopf solution,
//! `u = v + ε²[(c/2)(v_xxx/v_x − v_xx²/v_x²) + c′v_xx + c″v_x²/2]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hopf::{hopf_jet, hopf_solve, CriticalPoint, InitialData, DEFAULT_HOPF_TOL};
use crate::jet::{Jet, SmoothFn};
use crate::models::ModelSpec;
use crate::pi2::Pi2Table;
use crate::spectral::RealField;

/// Smallest admissible `|v_x|` for the quasitriviality formulas.
pub const DEFAULT_VX_FLOOR: f64 = 1e-6;
/// Trust window half-widths in the scaled PI2 variables.
pub const WINDOW_X_SCALED: f64 = 3.0;
pub const WINDOW_T_SCALED: f64 = 2.0;

/// Constants of the universality formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiscaleConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a0: f64,
    pub a0_prime: f64,
    pub b1_0: f64,
    /// Breakup strength `k = −6 lim (x − x_c)/(u − u_c)³` along `t = t_c`.
    pub k: f64,
    pub x_c: f64,
    pub t_c: f64,
    pub u_c: f64,
}

impl MultiscaleConstants {
    pub fn from_values(x_c: f64, t_c: f64, u_c: f64, a0: f64, a0_prime: f64, b1_0: f64, k: f64) -> Result<Self> {
        if b1_0 == 0.0 || !b1_0.is_finite() {
            return Err(Error::DegenerateDispersion(b1_0));
        }
        if !(a0_prime * k > 0.0) {
            return Err(Error::Genericity(format!("a'(u_c) k = {} must be positive", a0_prime * k)));
        }
        if !(b1_0 / a0_prime > 0.0) {
            return Err(Error::Genericity(format!(
                "b1(u_c)/a'(u_c) = {} must be positive for real positive constants",
                b1_0 / a0_prime
            )));
        }
        let r = 1.0 / 7.0;
        Ok(MultiscaleConstants {
            alpha: (12.0 * b1_0 / (a0_prime * k * k)).powf(r),
            beta: (1728.0 * k * b1_0.powi(3) / a0_prime.powi(3)).powf(r),
            gamma: (144.0 * k.powi(3) * b1_0 * b1_0 / a0_prime.powi(9)).powf(r),
            a0,
            a0_prime,
            b1_0,
            k,
            x_c,
            t_c,
            u_c,
        })
    }

    /// Relative defects of the three seventh-power identities.
    pub fn identity_defects(&self) -> [f64; 3] {
        let (b, a1, k) = (self.b1_0, self.a0_prime, self.k);
        let rel = |lhs: f64, rhs: f64| (lhs - rhs).abs() / rhs.abs();
        [
            rel(self.alpha.powi(7), 12.0 * b / (a1 * k * k)),
            rel(self.beta.powi(7), 1728.0 * k * b.powi(3) / a1.powi(3)),
            rel(self.gamma.powi(7), 144.0 * k.powi(3) * b * b / a1.powi(9)),
        ]
    }

    /// The PI2 arguments `(X, T)` of `(x, t)`.
    pub fn scaled(&self, x: f64, t: f64, eps: f64) -> (f64, f64) {
        let xx = (x - self.x_c - self.a0 * (t - self.t_c)) / (self.beta * eps.powf(6.0 / 7.0));
        let tt = (t - self.t_c) / (self.gamma * eps.powf(4.0 / 7.0));
        (xx, tt)
    }
}

pub fn multiscale_constants(model: &ModelSpec, cp: &CriticalPoint) -> Result<MultiscaleConstants> {
    let u = cp.u_c;
    MultiscaleConstants::from_values(
        cp.x_c,
        cp.t_c,
        u,
        model.a.eval(u),
        model.a.deriv(u, 1),
        model.b1.eval(u),
        cp.k_limit,
    )
}

/// Region `|x − x_c − a₀(t − t_c)| ≤ x_half`, `|t − t_c| ≤ t_half`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrustWindow {
    pub x_half: f64,
    pub t_half: f64,
}

impl TrustWindow {
    /// Keeps the PI2 arguments within `|X| ≤ 3`, `|T| ≤ 2`.
    pub fn default_for(mc: &MultiscaleConstants, eps: f64) -> Self {
        TrustWindow {
            x_half: WINDOW_X_SCALED * mc.beta * eps.powf(6.0 / 7.0),
            t_half: WINDOW_T_SCALED * mc.gamma * eps.powf(4.0 / 7.0),
        }
    }

    pub fn contains(&self, mc: &MultiscaleConstants, x: f64, t: f64) -> bool {
        let tol = 1e-12;
        (x - mc.x_c - mc.a0 * (t - mc.t_c)).abs() <= self.x_half * (1.0 + tol)
            && (t - mc.t_c).abs() <= self.t_half * (1.0 + tol)
    }

    /// The `x`-interval of the window at time `t`.
    pub fn x_range(&self, mc: &MultiscaleConstants, t: f64) -> (f64, f64) {
        let centre = mc.x_c + mc.a0 * (t - mc.t_c);
        (centre - self.x_half, centre + self.x_half)
    }
}

pub fn multiscale_eval(
    x: f64,
    t: f64,
    eps: f64,
    mc: &MultiscaleConstants,
    tab: &Pi2Table,
    window: &TrustWindow,
) -> Result<f64> {
    if !window.contains(mc, x, t) {
        return Err(Error::OutOfWindow(format!("(x, t) = ({x}, {t}) outside the trust window {window:?}")));
    }
    let (xx, tt) = mc.scaled(x, t, eps);
    Ok(mc.u_c + mc.alpha * eps.powf(2.0 / 7.0) * tab.eval(xx, tt)?)
}

pub fn multiscale_grid(
    xs: &[f64],
    t: f64,
    eps: f64,
    mc: &MultiscaleConstants,
    tab: &Pi2Table,
    window: &TrustWindow,
) -> Result<Vec<f64>> {
    xs.par_iter().map(|&x| multiscale_eval(x, t, eps, mc, tab, window)).collect()
}

/// `(c/2)(v₃/v₁ − v₂²/v₁²) + c′v₂ + c″v₁²/2` from `v = [v, v_x, v_xx, v_xxx]`
/// and `c = [c, c′, c″]` at `v`.
pub fn transform_bracket(v: [f64; 4], c: [f64; 3]) -> f64 {
    let [_, v1, v2, v3] = v;
    0.5 * c[0] * (v3 / v1 - v2 * v2 / (v1 * v1)) + c[1] * v2 + 0.5 * c[2] * v1 * v1
}

/// The bracket as a jet in `x`, from the `x`-jet of `v`; loses three orders.
pub fn transform_bracket_jet(v: &Jet, c: &SmoothFn) -> Jet {
    let v1 = v.differentiate();
    let v2 = v1.differentiate();
    let v3 = v2.differentiate();
    let n = v3.len();
    let (v0, v1, v2) = (v.truncate(n), v1.truncate(n), v2.truncate(n));
    let c0 = c.apply(&v0);
    let c1 = c.derivative(1).apply(&v0);
    let c2 = c.derivative(2).apply(&v0);
    c0 * (v3 / v1 - v2.square() / v1.square()) * 0.5 + c1 * v2 + c2 * v1.square() * 0.5
}

fn check_floor(x: f64, vx: f64, floor: f64) -> Result<()> {
    if !(vx.abs() >= floor) {
        return Err(Error::NearCritical { x, vx });
    }
    Ok(())
}

/// Transformation of a sampled background, with spectral derivatives,
/// returned as `(x, u)` on the nodes of `[lo, hi]`.
pub fn quasitriv_transform(
    v: &RealField,
    c: &SmoothFn,
    eps: f64,
    window: (f64, f64),
    floor: f64,
) -> Result<Vec<(f64, f64)>> {
    let d = v.derivatives(3)?;
    let xs = v.grid.nodes();
    let mut out = Vec::new();
    for (j, &x) in xs.iter().enumerate() {
        if x < window.0 || x > window.1 {
            continue;
        }
        let vj = [d[0].values[j], d[1].values[j], d[2].values[j], d[3].values[j]];
        check_floor(x, vj[1], floor)?;
        let cj = c.derivs(vj[0], 2);
        out.push((x, vj[0] + eps * eps * transform_bracket(vj, [cj[0], cj[1], cj[2]])));
    }
    if out.is_empty() {
        return Err(Error::EmptyWindow { lo: window.0, hi: window.1 });
    }
    Ok(out)
}

/// `ṽ ≈ v + ε²w`: the Hopf solution for the data
/// `φ − ε²[(c/2)(φ‴/φ′ − φ″²/φ′²) + c′φ″ + c″φ′²/2]`, linearized in ε².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectedHopf {
    pub v: f64,
    pub w: f64,
    pub value: f64,
    /// Foot of the characteristic through `(x, t)`.
    pub xi: f64,
}

/// With `x = Φ(v) + t a(v)` and the inverse data perturbed by
/// `ε² D(Φ(v)) Φ′(v)`, the first-order change of the root is
/// `w = −D(ξ) / (1 + t a′(v) φ′(ξ))`, where `D` is the data bracket at the
/// foot `ξ`.
pub fn corrected_hopf(a: &SmoothFn, data: &InitialData, c: &SmoothFn, x: f64, t: f64, eps: f64) -> Result<CorrectedHopf> {
    let p = hopf_solve(a, data, x, t, DEFAULT_HOPF_TOL)?;
    corrected_at_foot(a, data, c, x, t, eps, p.xi, DEFAULT_VX_FLOOR)
}

#[allow(clippy::too_many_arguments)]
fn corrected_at_foot(
    a: &SmoothFn,
    data: &InitialData,
    c: &SmoothFn,
    x: f64,
    t: f64,
    eps: f64,
    xi: f64,
    floor: f64,
) -> Result<CorrectedHopf> {
    let phi = data.phi.derivs(xi, 3);
    check_floor(xi, phi[1], floor)?;
    let cj = c.derivs(phi[0], 2);
    let d = transform_bracket([phi[0], phi[1], phi[2], phi[3]], [cj[0], cj[1], cj[2]]);
    let denominator = 1.0 + t * a.deriv(phi[0], 1) * phi[1];
    if denominator.abs() < 1e-10 {
        return Err(Error::NearCaustic { x, t, denominator });
    }
    let w = -d / denominator;
    Ok(CorrectedHopf {
        v: phi[0],
        w,
        value: phi[0] + eps * eps * w,
        xi,
    })
}

/// One point of the quasitriviality solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiTrivSample {
    pub x: f64,
    /// Hopf solution.
    pub v: f64,
    /// Correction from the modified data.
    pub w: f64,
    /// Transformation bracket at `v`.
    pub bracket: f64,
    /// `v + ε²w + ε²·bracket`.
    pub u: f64,
}

#[derive(Clone, Debug)]
pub struct QuasiTrivData {
    pub t: f64,
    pub eps: f64,
    pub samples: Vec<QuasiTrivSample>,
}

impl QuasiTrivData {
    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.u).collect()
    }

    pub fn hopf(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.v).collect()
    }
}

/// Quasitriviality solution with the same initial data as the PDE. The
/// derivatives of `v` come from the characteristics, not from a grid.
pub fn quasitriv_solution(
    a: &SmoothFn,
    data: &InitialData,
    c: &SmoothFn,
    xs: &[f64],
    t: f64,
    eps: f64,
) -> Result<QuasiTrivData> {
    let samples: Result<Vec<QuasiTrivSample>> = xs
        .par_iter()
        .map(|&x| {
            let hj = hopf_jet(a, data, x, t, 3)?;
            let v = hj.jet.derivatives();
            check_floor(x, v[1], DEFAULT_VX_FLOOR)?;
            let cj = c.derivs(v[0], 2);
            let bracket = transform_bracket([v[0], v[1], v[2], v[3]], [cj[0], cj[1], cj[2]]);
            let corr = corrected_at_foot(a, data, c, x, t, eps, hj.point.xi, DEFAULT_VX_FLOOR)?;
            Ok(QuasiTrivSample {
                x,
                v: v[0],
                w: corr.w,
                bracket,
                u: v[0] + eps * eps * (corr.w + bracket),
            })
        })
        .collect();
    Ok(QuasiTrivData { t, eps, samples: samples? })
}

/// Leading `ε⁴` coefficient of the residual of the transformed Hopf solution
/// in `u_t + uu_x + ε²∂_x(c u_xx + c′u_x²/2) = 0`, from
/// `v = [v, v_x, …, ∂⁶v]` and `c = [c, c′, …, c⁽⁵⁾]` at `v`.
pub fn discrepancy_leading(v: [f64; 7], c: [f64; 6]) -> f64 {
    let [_, v1, v2, v3, v4, v5, v6] = v;
    let [c0, c1, c2, c3, c4, c5] = c;
    let cc = 23.0 * v2.powi(5) / (2.0 * v1.powi(5)) - 115.0 * v2.powi(3) * v3 / (4.0 * v1.powi(4))
        + 39.0 * v2 * v2 * v4 / (4.0 * v1.powi(3))
        + 57.0 * v2 * v3 * v3 / (4.0 * v1.powi(3))
        - 5.0 * v2 * v5 / (2.0 * v1 * v1)
        - 19.0 * v3 * v4 / (4.0 * v1 * v1)
        + v6 / (2.0 * v1);
    let cc1 = -35.0 * v2.powi(4) / (4.0 * v1.powi(3)) + 19.0 * v2 * v2 * v3 / (v1 * v1) - 7.0 * v2 * v4 / v1
        - 23.0 * v3 * v3 / (4.0 * v1)
        + 3.5 * v5;
    let cc2 = 1.5 * v2.powi(3) / v1 + 6.5 * v1 * v4 + 3.0 * v2 * v3;
    let cc3 = 7.5 * v1 * v1 * v3 + 8.0 * v1 * v2 * v2;
    let c1c1 = 1.5 * v2.powi(3) / v1 + 4.0 * v1 * v4 + 0.5 * v2 * v3;
    let c1c2 = 10.5 * v1 * v1 * v3 + 10.0 * v1 * v2 * v2;
    c0 * c0 * cc
        + c0 * c1 * cc1
        + c0 * c2 * cc2
        + c0 * c3 * cc3
        + 5.5 * c0 * c4 * v1.powi(3) * v2
        + 0.5 * c0 * c5 * v1.powi(5)
        + c1 * c1 * c1c1
        + c1 * c2 * c1c2
        + 9.0 * c1 * c3 * v1.powi(3) * v2
        + c1 * c4 * v1.powi(5)
        + 5.0 * c2 * c2 * v1.powi(3) * v2
        + 1.25 * c2 * c3 * v1.powi(5)
}

/// [`discrepancy_leading`] along the Hopf solution at time `t`.
pub fn discrepancy_field(a: &SmoothFn, data: &InitialData, c: &SmoothFn, xs: &[f64], t: f64) -> Result<Vec<f64>> {
    xs.par_iter()
        .map(|&x| {
            let d = hopf_jet(a, data, x, t, 6)?.jet.derivatives();
            check_floor(x, d[1], DEFAULT_VX_FLOOR)?;
            let cj = c.derivs(d[0], 5);
            Ok(discrepancy_leading(
                [d[0], d[1], d[2], d[3], d[4], d[5], d[6]],
                [cj[0], cj[1], cj[2], cj[3], cj[4], cj[5]],
            ))
        })
        .collect()
}
