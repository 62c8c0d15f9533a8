//! Catalog of the dispersive conservation laws `u_t + ∂_x φ(u, εu_x, …) = 0`.
//!
//! Each model is stored as a flux `φ = φ_lin + φ_nl`. The linear,
//! constant-coefficient part enters the exponential propagator through
//! [`ModelSpec::linear_symbol`]; the remainder is evaluated pointwise in
//! physical space. All models are Hamiltonian, `φ = δH/δu`.
//!
//! | kind | equation |
//! |------|----------|
//! | `GenKdV{n}` | `u_t + 6uⁿu_x + ε²u_xxx = 0` |
//! | `SinhKdV` | `u_t + 6 sinh(u) u_x + ε²u_xxx = 0` |
//! | `Kawahara{α,β}` | `u_t + 6uu_x + αε²u_xxx + βε⁴u_xxxxx = 0` |
//! | `NonlinearDispersion{c,p}` | `u_t + uu_x + ε²∂_x(c u_xx + c'u_x²/2) + ε⁴∂_x(2p u_xxxx + 4p'u_xxx u_x + 3p'u_xx² + 2p''u_xx u_x²) = 0` |
//! | `KdV2Family{α}` | `u_t + 30u²u_x + 10αε²(uu_xxx + 2u_x u_xx) + ε⁴u_xxxxx = 0` |

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianDensity;
use crate::jet::{Jet, SmoothFn};
use crate::spectral::{
    plans, RealField, ResolutionReport, SpectralCoeffs, DEFAULT_TAIL_FRACTION,
};

/// Default u-range on which invariants and `a' ≠ 0` are checked.
pub const DEFAULT_WORKING_RANGE: (f64, f64) = (0.05, 1.05);

#[derive(Clone, Debug)]
pub enum ModelKind {
    GenKdV { n: u32 },
    SinhKdV,
    Kawahara { alpha: f64, beta: f64 },
    NonlinearDispersion { c: SmoothFn, p: SmoothFn },
    KdV2Family { alpha: f64 },
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Stable identifier used to key propagator caches and output files.
    pub id: String,
    /// Transport speed of the dispersionless limit `u_t + a(u) u_x = 0`.
    pub a: SmoothFn,
    pub c: SmoothFn,
    pub p: SmoothFn,
    /// Coefficient of `ε² u_xx` inside `∂_x`, equal to `c a'`.
    pub b1: SmoothFn,
    pub working_range: (f64, f64),
}

/// One row of [`ModelSpec::invariants_cp`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpSample {
    pub u: f64,
    pub c: f64,
    pub p: f64,
}

/// Right-hand side with the resolution status of the input.
#[derive(Clone, Debug)]
pub struct RhsEval {
    pub field: RealField,
    pub resolution: ResolutionReport,
}

impl RhsEval {
    /// The input met the warning-level tail criterion (`1e-8`).
    pub fn resolved(&self) -> bool {
        self.resolution.ok
    }
}

fn sample_range(range: (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn build_model(kind: ModelKind) -> Result<ModelSpec> {
    build_model_on(kind, DEFAULT_WORKING_RANGE)
}

pub fn build_model_on(kind: ModelKind, working_range: (f64, f64)) -> Result<ModelSpec> {
    if !(working_range.0 < working_range.1) {
        return Err(Error::InvalidParameter(format!(
            "working range [{}, {}] is empty",
            working_range.0, working_range.1
        )));
    }
    let (id, a, c, p) = match &kind {
        ModelKind::GenKdV { n } => {
            if *n < 1 {
                return Err(Error::InvalidParameter("GenKdV requires n >= 1".into()));
            }
            let n = *n as i32;
            let a = SmoothFn::monomial(6.0, n);
            let (a1, a2) = (a.derivative(1), a.derivative(2));
            let c = SmoothFn::new(format!("1/a'[6u^{n}]"), move |j| a1.apply(j).recip());
            let a1 = a.derivative(1);
            let p = SmoothFn::new(format!("-3a''/(10a'^3)[6u^{n}]"), move |j| {
                a2.apply(j) * a1.apply(j).powi(-3) * (-0.3)
            });
            (format!("genkdv-{n}"), a, c, p)
        }
        ModelKind::SinhKdV => {
            let a = SmoothFn::new("6 sinh u", |j| j.sinh().scale(6.0));
            let (a1, a2) = (a.derivative(1), a.derivative(2));
            let c = SmoothFn::new("1/(6 cosh u)", move |j| a1.apply(j).recip());
            let a1 = a.derivative(1);
            let p = SmoothFn::new("-3a''/(10a'^3)[6 sinh]", move |j| {
                a2.apply(j) * a1.apply(j).powi(-3) * (-0.3)
            });
            ("sinhkdv".to_string(), a, c, p)
        }
        ModelKind::Kawahara { alpha, beta } => {
            if !alpha.is_finite() || !beta.is_finite() {
                return Err(Error::InvalidParameter("Kawahara parameters must be finite".into()));
            }
            if *beta == 0.0 {
                return Err(Error::InvalidParameter("Kawahara requires beta != 0".into()));
            }
            (
                format!("kawahara-{alpha}-{beta}"),
                SmoothFn::monomial(6.0, 1),
                SmoothFn::constant(alpha / 6.0),
                SmoothFn::constant(beta / 12.0),
            )
        }
        ModelKind::NonlinearDispersion { c, p } => {
            for u in sample_range(working_range, 101) {
                let cj = c.derivs(u, 2);
                let pj = p.derivs(u, 2);
                if cj.iter().chain(&pj).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "c or p (or a derivative) is not finite at u = {u}"
                    )));
                }
            }
            (
                format!("nonlinear-dispersion[{};{}]", c.label(), p.label()),
                SmoothFn::identity(),
                c.clone(),
                p.clone(),
            )
        }
        ModelKind::KdV2Family { alpha } => {
            if !alpha.is_finite() {
                return Err(Error::InvalidParameter("KdV2 alpha must be finite".into()));
            }
            let s = (1.0 - alpha * alpha) / 120.0;
            (
                format!("kdv2-{alpha}"),
                SmoothFn::monomial(30.0, 2),
                SmoothFn::constant(alpha / 6.0),
                SmoothFn::new(format!("{s}/u"), move |j| j.recip().scale(s)),
            )
        }
    };
    for u in sample_range(working_range, 101) {
        let d = a.deriv(u, 1);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "a'(u) must be finite and nonzero on the working range; fails at u = {u}"
            )));
        }
    }
    let b1 = {
        let (c, a1) = (c.clone(), a.derivative(1));
        SmoothFn::new(format!("c*a'[{id}]"), move |j| c.apply(j) * a1.apply(j))
    };
    Ok(ModelSpec {
        kind,
        id,
        a,
        c,
        p,
        b1,
        working_range,
    })
}

/// Derivatives `∂_x^m u` for `m = 0..=max` in physical space.
pub fn physical_derivatives(u_hat: &SpectralCoeffs, max: u32) -> Vec<Vec<f64>> {
    (0..=max)
        .map(|m| {
            let mut d = u_hat.clone();
            d.differentiate(m);
            d.to_physical().values
        })
        .collect()
}

impl ModelSpec {
    pub fn has_stiff_linear_part(&self) -> bool {
        !matches!(self.kind, ModelKind::NonlinearDispersion { .. })
    }

    /// Symbol of the linear flux part: `φ_lin^ = s(k) û`.
    fn linear_flux_symbol(&self, k: f64, eps: f64) -> f64 {
        let (e2, e4) = (eps * eps, eps.powi(4));
        match self.kind {
            ModelKind::GenKdV { .. } | ModelKind::SinhKdV => -e2 * k * k,
            ModelKind::Kawahara { alpha, beta } => -alpha * e2 * k * k + beta * e4 * k.powi(4),
            ModelKind::NonlinearDispersion { .. } => 0.0,
            ModelKind::KdV2Family { .. } => e4 * k.powi(4),
        }
    }

    /// Growth rate `L(k)` of the stiff linear part, `û_t = L(k) û + N̂(û)`.
    pub fn linear_symbol(&self, k: f64, eps: f64) -> Complex64 {
        Complex64::new(0.0, -k) * self.linear_flux_symbol(k, eps)
    }

    /// Number of x-derivatives the nonlinear flux needs.
    fn nonlinear_order(&self) -> u32 {
        match self.kind {
            ModelKind::GenKdV { .. } | ModelKind::SinhKdV | ModelKind::Kawahara { .. } => 0,
            ModelKind::KdV2Family { .. } => 2,
            ModelKind::NonlinearDispersion { .. } => 4,
        }
    }

    /// Pointwise nonlinear flux given `d[m][j] = ∂_x^m u (x_j)`.
    fn flux_nonlinear(&self, d: &[Vec<f64>], eps: f64) -> Vec<f64> {
        let e2 = eps * eps;
        let e4 = e2 * e2;
        let n = d[0].len();
        match &self.kind {
            ModelKind::GenKdV { n: p } => {
                let s = 6.0 / (*p as f64 + 1.0);
                d[0].iter().map(|&u| s * u.powi(*p as i32 + 1)).collect()
            }
            ModelKind::SinhKdV => d[0].iter().map(|&u| 6.0 * (u.cosh() - 1.0)).collect(),
            ModelKind::Kawahara { .. } => d[0].iter().map(|&u| 3.0 * u * u).collect(),
            ModelKind::KdV2Family { alpha } => (0..n)
                .map(|j| {
                    let (u, ux, uxx) = (d[0][j], d[1][j], d[2][j]);
                    10.0 * u * u * u + 10.0 * alpha * e2 * (u * uxx + 0.5 * ux * ux)
                })
                .collect(),
            ModelKind::NonlinearDispersion { c, p } => (0..n)
                .map(|j| {
                    let (u, ux, uxx, uxxx, uxxxx) = (d[0][j], d[1][j], d[2][j], d[3][j], d[4][j]);
                    let v = Jet::variable(u, 2);
                    let cj = c.apply(&v);
                    let pj = p.apply(&v);
                    let (c0, c1) = (cj.value(), cj.derivative(1));
                    let (p0, p1, p2) = (pj.value(), pj.derivative(1), pj.derivative(2));
                    0.5 * u * u
                        + e2 * (c0 * uxx + 0.5 * c1 * ux * ux)
                        + e4 * (2.0 * p0 * uxxxx
                            + 4.0 * p1 * uxxx * ux
                            + 3.0 * p1 * uxx * uxx
                            + 2.0 * p2 * uxx * ux * ux)
                })
                .collect(),
        }
    }

    /// `N̂(û) = −ik · F[φ_nl(u)]`, Nyquist zeroed.
    pub fn nonlinear_hat(&self, u_hat: &SpectralCoeffs, eps: f64) -> Vec<Complex64> {
        let d = physical_derivatives(u_hat, self.nonlinear_order());
        let flux = self.flux_nonlinear(&d, eps);
        let grid = u_hat.grid;
        let mut buf: Vec<Complex64> = flux.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plans(grid.len()).forward(&mut buf);
        for (j, c) in buf.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, -grid.wavenumber(j));
        }
        buf[grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        buf
    }

    /// `L û + N̂(û)`.
    pub fn rhs_hat(&self, u_hat: &SpectralCoeffs, eps: f64) -> Vec<Complex64> {
        let mut out = self.nonlinear_hat(u_hat, eps);
        let grid = u_hat.grid;
        for (j, o) in out.iter_mut().enumerate() {
            *o += self.linear_symbol(grid.wavenumber(j), eps) * u_hat.coeffs[j];
        }
        out
    }

    /// Full flux `φ(u)` with every term evaluated in physical space.
    pub fn flux(&self, u: &RealField, eps: f64) -> Result<RealField> {
        u.ensure_valid()?;
        let hat = u.to_spectral();
        let order = self.nonlinear_order().max(match self.kind {
            ModelKind::NonlinearDispersion { .. } => 0,
            ModelKind::GenKdV { .. } | ModelKind::SinhKdV => 2,
            _ => 4,
        });
        let d = physical_derivatives(&hat, order);
        let mut flux = self.flux_nonlinear(&d, eps);
        let (e2, e4) = (eps * eps, eps.powi(4));
        for (j, f) in flux.iter_mut().enumerate() {
            *f += match self.kind {
                ModelKind::GenKdV { .. } | ModelKind::SinhKdV => e2 * d[2][j],
                ModelKind::Kawahara { alpha, beta } => alpha * e2 * d[2][j] + beta * e4 * d[4][j],
                ModelKind::KdV2Family { .. } => e4 * d[4][j],
                ModelKind::NonlinearDispersion { .. } => 0.0,
            };
        }
        RealField::new(u.grid, flux)
    }

    /// `u_t = −∂_x φ(u)`, evaluated monolithically.
    pub fn rhs(&self, u: &RealField, eps: f64) -> Result<RhsEval> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
        }
        let flux = self.flux(u, eps)?;
        let field = flux.derivative(1)?.map(|v| -v);
        let resolution = u
            .to_spectral()
            .resolution_ok(DEFAULT_TAIL_FRACTION, crate::spectral::DEFAULT_RESOLUTION_THRESHOLD)?;
        Ok(RhsEval { field, resolution })
    }

    /// `rhs(u) − L u` in physical space.
    pub fn rhs_nonlinear(&self, u: &RealField, eps: f64) -> Result<RealField> {
        u.ensure_valid()?;
        let hat = u.to_spectral();
        let n = self.nonlinear_hat(&hat, eps);
        Ok(SpectralCoeffs { grid: u.grid, coeffs: n }.to_physical())
    }

    /// Linear part `L u` in physical space.
    pub fn rhs_linear(&self, u: &RealField, eps: f64) -> Result<RealField> {
        u.ensure_valid()?;
        let mut hat = u.to_spectral();
        let grid = u.grid;
        for (j, c) in hat.coeffs.iter_mut().enumerate() {
            *c *= self.linear_symbol(grid.wavenumber(j), eps);
        }
        hat.coeffs[grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        Ok(hat.to_physical())
    }

    /// Linearized principal symbol with coefficients frozen at the field mean;
    /// exact for constant-coefficient models, a preconditioner otherwise.
    pub fn frozen_symbol(&self, u: &RealField, eps: f64) -> Vec<Complex64> {
        let grid = u.grid;
        match &self.kind {
            ModelKind::NonlinearDispersion { c, p } => {
                let n = u.values.len() as f64;
                let cbar = u.values.iter().map(|&v| c.eval(v)).sum::<f64>() / n;
                let pbar = u.values.iter().map(|&v| p.eval(v)).sum::<f64>() / n;
                let (e2, e4) = (eps * eps, eps.powi(4));
                (0..grid.len())
                    .map(|j| {
                        let k = grid.wavenumber(j);
                        Complex64::new(0.0, e2 * cbar * k.powi(3) - 2.0 * e4 * pbar * k.powi(5))
                    })
                    .collect()
            }
            _ => (0..grid.len())
                .map(|j| self.linear_symbol(grid.wavenumber(j), eps))
                .collect(),
        }
    }

    /// Hamiltonian density `h` with `φ = δH/δu`.
    pub fn density(&self) -> HamiltonianDensity {
        let tag = format!("H[{}]", self.id);
        match &self.kind {
            ModelKind::GenKdV { n } => {
                let m = *n as i32;
                let s = 6.0 / ((m + 1) * (m + 2)) as f64;
                HamiltonianDensity::new(tag)
                    .term(SmoothFn::monomial(s, m + 2), [0, 0, 0])
                    .term(SmoothFn::constant(-0.5), [2, 0, 0])
            }
            ModelKind::SinhKdV => HamiltonianDensity::new(tag)
                .term(SmoothFn::new("6(sinh u - u)", |j| (j.sinh() - *j).scale(6.0)), [0, 0, 0])
                .term(SmoothFn::constant(-0.5), [2, 0, 0]),
            ModelKind::Kawahara { alpha, beta } => HamiltonianDensity::new(tag)
                .term(SmoothFn::monomial(1.0, 3), [0, 0, 0])
                .term(SmoothFn::constant(-0.5 * alpha), [2, 0, 0])
                .term(SmoothFn::constant(0.5 * beta), [0, 2, 0]),
            ModelKind::NonlinearDispersion { c, p } => HamiltonianDensity::new(tag)
                .term(SmoothFn::monomial(1.0 / 6.0, 3), [0, 0, 0])
                .term(c.scale(-0.5), [2, 0, 0])
                .term(p.clone(), [0, 2, 0]),
            ModelKind::KdV2Family { alpha } => HamiltonianDensity::new(tag)
                .term(SmoothFn::monomial(2.5, 4), [0, 0, 0])
                .term(SmoothFn::monomial(-5.0 * alpha, 1), [2, 0, 0])
                .term(SmoothFn::constant(0.5), [0, 2, 0]),
        }
    }

    /// Conserved energy. For the generalized KdV family this is
    /// `E = ∫[ε²u_x²/2 − 6u^(n+2)/((n+1)(n+2))] dx`, i.e. `−H`; for the
    /// other models it is `H` itself.
    pub fn energy(&self, u: &RealField, eps: f64) -> Result<f64> {
        let h = crate::hamiltonian::functional_value(&self.density(), u, eps)?;
        Ok(match self.kind {
            ModelKind::GenKdV { .. } | ModelKind::SinhKdV => -h,
            _ => h,
        })
    }

    /// Tabulate `(u, c(u), p(u))`; fails where `a'(u)` vanishes.
    pub fn invariants_cp(&self, u_samples: &[f64]) -> Result<Vec<CpSample>> {
        u_samples
            .iter()
            .map(|&u| {
                let a1 = self.a.deriv(u, 1);
                if a1 == 0.0 {
                    return Err(Error::SingularInvariant { u });
                }
                Ok(CpSample {
                    u,
                    c: self.c.eval(u),
                    p: self.p.eval(u),
                })
            })
            .collect()
    }

    /// Coefficients `b_0 … b_10` of the model written in the general ε⁴ template.
    pub fn template_coefficients(&self) -> crate::hamiltonian::TemplateCoefficients {
        use crate::hamiltonian::TemplateCoefficients as T;
        match &self.kind {
            ModelKind::GenKdV { .. } | ModelKind::SinhKdV => T::zero().with(1, SmoothFn::constant(1.0)),
            ModelKind::Kawahara { alpha, beta } => T::zero()
                .with(1, SmoothFn::constant(*alpha))
                .with(6, SmoothFn::constant(*beta)),
            ModelKind::NonlinearDispersion { c, p } => T::zero()
                .with(1, c.clone())
                .with(2, c.derivative(1).scale(0.5))
                .with(6, p.scale(2.0))
                .with(7, p.derivative(1).scale(4.0))
                .with(8, p.derivative(1).scale(3.0))
                .with(9, p.derivative(2).scale(2.0)),
            ModelKind::KdV2Family { alpha } => T::zero()
                .with(1, SmoothFn::monomial(10.0 * alpha, 1))
                .with(2, SmoothFn::constant(5.0 * alpha))
                .with(6, SmoothFn::constant(1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{check_coefficients, euler_lagrange};
    use crate::spectral::PeriodicGrid;
    use std::f64::consts::PI;

    fn sech2() -> RealField {
        PeriodicGrid::new(8.0 * PI, 1024).unwrap().sample(|x| 1.0 / x.cosh().powi(2))
    }

    fn all_models() -> Vec<ModelSpec> {
        vec![
            build_model(ModelKind::GenKdV { n: 1 }).unwrap(),
            build_model(ModelKind::GenKdV { n: 3 }).unwrap(),
            build_model(ModelKind::SinhKdV).unwrap(),
            build_model(ModelKind::Kawahara { alpha: 1.0, beta: -1.0 }).unwrap(),
            build_model(ModelKind::NonlinearDispersion {
                c: SmoothFn::monomial(1.0, 2),
                p: SmoothFn::new("0.1 u^3", |j| j.powi(3).scale(0.1)),
            })
            .unwrap(),
            build_model(ModelKind::KdV2Family { alpha: 0.5 }).unwrap(),
        ]
    }

    #[test]
    fn catalog_invariants() {
        let kdv = build_model(ModelKind::GenKdV { n: 1 }).unwrap();
        let t = kdv.invariants_cp(&[0.2, 0.9]).unwrap();
        assert!(t.iter().all(|s| (s.c - 1.0 / 6.0).abs() < 1e-15 && s.p == 0.0));
        let kaw = build_model(ModelKind::Kawahara { alpha: 1.0, beta: -1.0 }).unwrap();
        let s = kaw.invariants_cp(&[0.4]).unwrap()[0];
        assert_eq!((s.c, s.p), (1.0 / 6.0, -1.0 / 12.0));
        let k2 = build_model(ModelKind::KdV2Family { alpha: 0.5 }).unwrap();
        assert!((k2.invariants_cp(&[1.0]).unwrap()[0].p - 0.00625).abs() < 1e-16);
        let k1 = build_model(ModelKind::KdV2Family { alpha: 1.0 }).unwrap();
        assert_eq!(k1.p.eval(0.3), 0.0);
        // b1 = c a'
        assert!((k2.b1.eval(0.7) - 10.0 * 0.5 * 0.7).abs() < 1e-14);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(build_model(ModelKind::GenKdV { n: 0 }).is_err());
        assert!(build_model(ModelKind::Kawahara { alpha: 1.0, beta: 0.0 }).is_err());
        let m = build_model_on(ModelKind::GenKdV { n: 2 }, (-0.5, 0.5));
        assert!(m.is_err());
        let kdv = build_model(ModelKind::GenKdV { n: 2 }).unwrap();
        assert!(matches!(kdv.invariants_cp(&[0.0]), Err(Error::SingularInvariant { .. })));
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = PeriodicGrid::new(8.0 * PI, 64).unwrap();
        let u = g.sample(|_| 0.7);
        for m in all_models() {
            assert!(m.rhs(&u, 0.1).unwrap().field.sup_norm() < 1e-12, "{}", m.id);
        }
    }

    #[test]
    fn split_equals_monolithic_and_conserves_mass() {
        let u = sech2();
        for m in all_models() {
            let full = m.rhs(&u, 0.3).unwrap().field;
            let lin = m.rhs_linear(&u, 0.3).unwrap();
            let nl = m.rhs_nonlinear(&u, 0.3).unwrap();
            let split = lin.zip_map(&nl, |a, b| a + b);
            let d = full.zip_map(&split, |a, b| a - b).sup_norm();
            assert!(d < 1e-10, "{}: {d}", m.id);
            let scale = full.map(f64::abs).integral();
            assert!(full.integral().abs() < 1e-12 * scale, "{}", m.id);
        }
    }

    #[test]
    fn rhs_is_minus_dx_of_variational_derivative() {
        let u = sech2();
        let eps = 0.3;
        for m in all_models() {
            let el = euler_lagrange(&m.density(), &u, eps).unwrap();
            let from_h = el.derivative(1).unwrap().map(|v| -v);
            let rhs = m.rhs(&u, eps).unwrap().field;
            let d = rhs.zip_map(&from_h, |a, b| a - b).sup_norm();
            assert!(d < 1e-8, "{}: {d}", m.id);
        }
    }

    #[test]
    fn nonlinear_dispersion_matches_direct_assembly() {
        // c = u², p = 0: u_t = -(u u_x + ε²∂_x(u² u_xx + u u_x²))
        let u = sech2();
        let eps = 0.1;
        let m = build_model(ModelKind::NonlinearDispersion {
            c: SmoothFn::monomial(1.0, 2),
            p: SmoothFn::zero(),
        })
        .unwrap();
        let d: Vec<RealField> = (1..=3).map(|k| u.derivative(k).unwrap()).collect();
        let direct: Vec<f64> = (0..u.values.len())
            .map(|j| {
                let (v, vx, vxx, vxxx) = (u.values[j], d[0].values[j], d[1].values[j], d[2].values[j]);
                // ∂_x(v² v_xx + v v_x²) = 2v v_x v_xx + v² v_xxx + v_x³ + 2 v v_x v_xx
                -(v * vx + eps * eps * (4.0 * v * vx * vxx + v * v * vxxx + vx.powi(3)))
            })
            .collect();
        let rhs = m.rhs(&u, eps).unwrap().field;
        let diff = rhs
            .values
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn template_coefficients_are_hamiltonian() {
        let samples: Vec<f64> = (0..21).map(|i| 0.1 + 0.05 * i as f64).collect();
        for m in all_models() {
            let r = check_coefficients(&m.template_coefficients(), &samples);
            assert!(r.worst() < 1e-12, "{}: {:?}", m.id, r.violations);
        }
    }

    #[test]
    fn energy_sign_and_zero() {
        let g4 = build_model(ModelKind::GenKdV { n: 4 }).unwrap();
        let u = sech2();
        assert!(g4.energy(&u, 0.01).unwrap() < 0.0);
        let z = RealField::zeros(u.grid);
        assert_eq!(g4.energy(&z, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn kawahara_linear_phase() {
        let g = PeriodicGrid::new(8.0 * PI, 64).unwrap();
        let (alpha, beta, eps) = (1.0, 1.0, 0.5);
        let m = build_model(ModelKind::Kawahara { alpha, beta }).unwrap();
        // u_t = -α ε² u_xxx - β ε⁴ u_xxxxx: cos(kx) → cos(kx + ωt), ω = αε²k³ − βε⁴k⁵
        let k = PI / g.half_width();
        let u = g.sample(|x| (k * x).cos());
        let lu = m.rhs_linear(&u, eps).unwrap();
        let omega = alpha * eps * eps * k.powi(3) - beta * eps.powi(4) * k.powi(5);
        for j in 0..g.len() {
            let x = g.node(j);
            assert!((lu.values[j] + omega * (k * x).sin()).abs() < 1e-14);
        }
    }
}
