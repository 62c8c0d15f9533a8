//! Local Hamiltonian functionals `H = ∫ h(u, εu_x, ε²u_xx, ε³u_xxx) dx`, their
//! variational derivatives and Poisson brackets `{H, F} = ∫ δH/δu ∂_x δF/δu dx`.
//!
//! Densities are finite sums of monomials `coef(u) u_x^a u_xx^b u_xxx^c`; each
//! monomial carries the weight `ε^(a + 2b + 3c)`, so the ε-dependence of any
//! density is fixed by its differential structure.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::jet::{Jet, SmoothFn};
use crate::spectral::RealField;

/// One term `coef(u) * u_x^a * u_xx^b * u_xxx^c`.
#[derive(Clone, Debug)]
pub struct Monomial {
    pub coef: SmoothFn,
    pub powers: [u32; 3],
}

impl Monomial {
    pub fn eps_order(&self) -> u32 {
        self.powers[0] + 2 * self.powers[1] + 3 * self.powers[2]
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianDensity {
    tag: String,
    terms: Vec<Monomial>,
}

fn ipow(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

impl HamiltonianDensity {
    pub fn new(tag: impl Into<String>) -> Self {
        HamiltonianDensity {
            tag: tag.into(),
            terms: Vec::new(),
        }
    }

    /// Append `coef(u) u_x^a u_xx^b u_xxx^c`.
    pub fn term(mut self, coef: SmoothFn, powers: [u32; 3]) -> Self {
        self.terms.push(Monomial { coef, powers });
        self
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn concat(&self, other: &HamiltonianDensity, tag: impl Into<String>) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        HamiltonianDensity {
            tag: tag.into(),
            terms,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        HamiltonianDensity {
            tag: format!("{s}*{}", self.tag),
            terms: self
                .terms
                .iter()
                .map(|m| Monomial {
                    coef: m.coef.scale(s),
                    powers: m.powers,
                })
                .collect(),
        }
    }

    /// Highest x-derivative of `u` the density depends on.
    pub fn differential_order(&self) -> usize {
        self.terms
            .iter()
            .map(|m| {
                if m.powers[2] > 0 {
                    3
                } else if m.powers[1] > 0 {
                    2
                } else if m.powers[0] > 0 {
                    1
                } else {
                    0
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// Split into homogeneous pieces by power of ε.
    pub fn by_eps_order(&self) -> BTreeMap<u32, HamiltonianDensity> {
        let mut out: BTreeMap<u32, HamiltonianDensity> = BTreeMap::new();
        for m in &self.terms {
            let p = m.eps_order();
            out.entry(p)
                .or_insert_with(|| HamiltonianDensity::new(format!("{}[eps^{p}]", self.tag)))
                .terms
                .push(m.clone());
        }
        out
    }

    /// `h(u, u_x, u_xx, u_xxx; ε)`.
    pub fn eval(&self, jet: [f64; 4], eps: f64) -> f64 {
        let [u, ux, uxx, uxxx] = jet;
        self.terms
            .iter()
            .map(|m| {
                let [a, b, c] = m.powers;
                m.coef.eval(u)
                    * eps.powi(m.eps_order() as i32)
                    * ipow(ux, a)
                    * ipow(uxx, b)
                    * ipow(uxxx, c)
            })
            .sum()
    }

    /// Analytic partials `(∂h/∂u, ∂h/∂u_x, ∂h/∂u_xx, ∂h/∂u_xxx)`.
    pub fn partials(&self, jet: [f64; 4], eps: f64) -> [f64; 4] {
        let [u, ux, uxx, uxxx] = jet;
        let mut out = [0.0; 4];
        let var = Jet::variable(u, 1);
        for m in &self.terms {
            let cj = m.coef.apply(&var);
            let (c0, c1) = (cj.value(), cj.derivative(1));
            let w = eps.powi(m.eps_order() as i32);
            let [a, b, c] = m.powers;
            let px = ipow(ux, a);
            let pxx = ipow(uxx, b);
            let pxxx = ipow(uxxx, c);
            out[0] += w * c1 * px * pxx * pxxx;
            if a > 0 {
                out[1] += w * c0 * a as f64 * ipow(ux, a - 1) * pxx * pxxx;
            }
            if b > 0 {
                out[2] += w * c0 * px * b as f64 * ipow(uxx, b - 1) * pxxx;
            }
            if c > 0 {
                out[3] += w * c0 * px * pxx * c as f64 * ipow(uxxx, c - 1);
            }
        }
        out
    }
}

fn field_jets(u: &RealField) -> Result<Vec<RealField>> {
    u.ensure_valid()?;
    u.derivatives(3)
}

/// Pointwise density values on the grid.
pub fn density_field(h: &HamiltonianDensity, u: &RealField, eps: f64) -> Result<RealField> {
    let d = field_jets(u)?;
    let values = (0..u.values.len())
        .map(|j| h.eval([d[0].values[j], d[1].values[j], d[2].values[j], d[3].values[j]], eps))
        .collect();
    RealField::new(u.grid, values)
}

/// `H(u) = ∫ h dx` by periodic trapezoid quadrature.
pub fn functional_value(h: &HamiltonianDensity, u: &RealField, eps: f64) -> Result<f64> {
    Ok(density_field(h, u, eps)?.integral())
}

/// Variational derivative
/// `∂h/∂u − ∂_x ∂h/∂u_x + ∂_x² ∂h/∂u_xx − ∂_x³ ∂h/∂u_xxx`
/// with spectral `∂_x`.
pub fn euler_lagrange(h: &HamiltonianDensity, u: &RealField, eps: f64) -> Result<RealField> {
    let d = field_jets(u)?;
    let n = u.values.len();
    let mut parts = vec![vec![0.0; n]; 4];
    for j in 0..n {
        let p = h.partials([d[0].values[j], d[1].values[j], d[2].values[j], d[3].values[j]], eps);
        for (slot, v) in parts.iter_mut().zip(p) {
            slot[j] = v;
        }
    }
    let order = h.differential_order();
    // Horner form: P0 − ∂(P1 − ∂(P2 − ∂P3))
    let mut acc = RealField::new(u.grid, parts[order].clone())?;
    for level in (0..order).rev() {
        let dacc = acc.derivative(1)?;
        let values = parts[level]
            .iter()
            .zip(&dacc.values)
            .map(|(p, q)| p - q)
            .collect();
        acc = RealField::new(u.grid, values)?;
    }
    Ok(acc)
}

/// `∫ (δH/δu) ∂_x (δF/δu) dx`.
pub fn poisson_bracket(
    h_h: &HamiltonianDensity,
    h_f: &HamiltonianDensity,
    u: &RealField,
    eps: f64,
) -> Result<f64> {
    let eh = euler_lagrange(h_h, u, eps)?;
    let ef = euler_lagrange(h_f, u, eps)?;
    bracket_of_gradients(&eh, &ef)
}

fn bracket_of_gradients(eh: &RealField, ef: &RealField) -> Result<f64> {
    let dfx = ef.derivative(1)?;
    Ok(eh.zip_map(&dfx, |a, b| a * b).integral())
}

/// Bracket `{H, F}(u)` resolved into powers of ε: `Σ_s ε^s C_s`.
#[derive(Clone, Debug)]
pub struct BracketExpansion {
    pub coefficients: BTreeMap<u32, f64>,
}

impl BracketExpansion {
    pub fn compute(h_h: &HamiltonianDensity, h_f: &HamiltonianDensity, u: &RealField) -> Result<Self> {
        let gh: Vec<(u32, RealField)> = h_h
            .by_eps_order()
            .into_iter()
            .map(|(p, d)| euler_lagrange(&d, u, 1.0).map(|e| (p, e)))
            .collect::<Result<_>>()?;
        let gf: Vec<(u32, RealField)> = h_f
            .by_eps_order()
            .into_iter()
            .map(|(p, d)| euler_lagrange(&d, u, 1.0).map(|e| (p, e)))
            .collect::<Result<_>>()?;
        let mut coefficients = BTreeMap::new();
        for (p, ep) in &gh {
            for (q, eq) in &gf {
                *coefficients.entry(p + q).or_insert(0.0) += bracket_of_gradients(ep, eq)?;
            }
        }
        Ok(BracketExpansion { coefficients })
    }

    pub fn value(&self, eps: f64) -> f64 {
        self.coefficients
            .iter()
            .map(|(&s, &c)| eps.powi(s as i32) * c)
            .sum()
    }
}

/// Density of the commuting Hamiltonian `H_f` built from the invariants `c`, `p`:
///
/// `f − ε²/2 c f''' u_x² + ε⁴[(p f''' + 3/10 c² f⁗) u_xx²
///  − 1/6((3cc''f⁗ + 3cc'f⁽⁵⁾ + c²f⁽⁶⁾)/4 + p'f⁗ + p f⁽⁵⁾) u_x⁴]`.
pub fn hf_density(f: &SmoothFn, c: &SmoothFn, p: &SmoothFn) -> HamiltonianDensity {
    let (f2, c2) = (f.clone(), c.clone());
    let (f4, c4, p4) = (f.clone(), c.clone(), p.clone());
    let (fx, cx, px) = (f.clone(), c.clone(), p.clone());
    HamiltonianDensity::new(format!("H_f[{}]", f.label()))
        .term(f.clone(), [0, 0, 0])
        .term(
            SmoothFn::new("-c f3/2", move |j| {
                let fd = derivative_jets(&f2, j, 3);
                -0.5 * c2.apply(j) * fd[3]
            }),
            [2, 0, 0],
        )
        .term(
            SmoothFn::new("p f3 + 3/10 c^2 f4", move |j| {
                let fd = derivative_jets(&f4, j, 4);
                let cc = c4.apply(j);
                p4.apply(j) * fd[3] + 0.3 * cc * cc * fd[4]
            }),
            [0, 2, 0],
        )
        .term(
            SmoothFn::new("ux^4 coefficient", move |j| {
                let cd = derivative_jets(&cx, j, 2);
                let pd = derivative_jets(&px, j, 1);
                let fd = derivative_jets(&fx, j, 6);
                let inner = (3.0 * cd[0] * cd[2] * fd[4]
                    + 3.0 * cd[0] * cd[1] * fd[5]
                    + cd[0] * cd[0] * fd[6])
                    / 4.0
                    + pd[1] * fd[4]
                    + pd[0] * fd[5];
                inner * (-1.0 / 6.0)
            }),
            [4, 0, 0],
        )
}

/// `[g(J), g'(J), ..., g^(kmax)(J)]` from one Taylor evaluation of `g`.
pub fn derivative_jets(g: &SmoothFn, j: &Jet, kmax: usize) -> Vec<Jet> {
    let n = j.len();
    let u0 = j.value();
    let full = g.apply(&Jet::variable(u0, n - 1 + kmax));
    let h = j.offset(-u0);
    (0..=kmax)
        .map(|k| {
            let poly: Vec<f64> = (0..n)
                .map(|m| {
                    let rising: f64 = ((m + 1)..=(m + k)).map(|v| v as f64).product();
                    full.coeff(m + k) * rising
                })
                .collect();
            Jet::compose_poly(&poly, &h)
        })
        .collect()
}

/// The ε⁶ completion of the invariants `(c, p)`:
/// `H = ∫[u³/6 − ε²c u_x²/2 + ε⁴p u_xx² − ε⁶(α u_xxx² + β u_xx³)]` together with the
/// coefficients of the commuting densities `H_f`.
#[derive(Clone, Debug)]
pub struct Order6Extension {
    pub c: SmoothFn,
    pub p: SmoothFn,
    pub alpha: SmoothFn,
    pub beta: SmoothFn,
}

/// `α = (80 p²/c − 67 p c' + 33 c p' + 12 c c'² − 9 c² c'') / 28`.
pub fn obstruction_alpha(c: &SmoothFn, p: &SmoothFn) -> SmoothFn {
    let (c, p) = (c.clone(), p.clone());
    SmoothFn::new("alpha", move |j| {
        let cd = derivative_jets(&c, j, 2);
        let pd = derivative_jets(&p, j, 1);
        let (c0, c1, c2) = (cd[0], cd[1], cd[2]);
        (80.0 * pd[0] * pd[0] / c0 - 67.0 * pd[0] * c1 + 33.0 * c0 * pd[1] + 12.0 * c0 * c1 * c1
            - 9.0 * c0 * c0 * c2)
            / 28.0
    })
}

/// Build the extension; fails when `c` vanishes somewhere on `u_samples`
/// (no 9-integrable completion exists for `c ≡ 0`).
pub fn order6_extension(
    c: &SmoothFn,
    p: &SmoothFn,
    beta: &SmoothFn,
    u_samples: &[f64],
) -> Result<Order6Extension> {
    for &u in u_samples {
        let cv = c.eval(u);
        if cv.abs() < 1e-12 {
            return Err(Error::Obstruction(format!(
                "c({u}) = {cv:e}: the order-6 perturbation cannot be included into a 9-integrable family"
            )));
        }
    }
    Ok(Order6Extension {
        c: c.clone(),
        p: p.clone(),
        alpha: obstruction_alpha(c, p),
        beta: beta.clone(),
    })
}

struct Ctx {
    c: Vec<Jet>,
    p: Vec<Jet>,
    a: Vec<Jet>,
    b: Jet,
    f: Vec<Jet>,
}

impl Order6Extension {
    fn ctx(&self, f: &SmoothFn, j: &Jet) -> Ctx {
        Ctx {
            c: derivative_jets(&self.c, j, 5),
            p: derivative_jets(&self.p, j, 4),
            a: derivative_jets(&self.alpha, j, 2),
            b: self.beta.apply(j),
            f: derivative_jets(f, j, 9),
        }
    }

    /// Cubic Hamiltonian density of the extension, i.e. the `f = u³/6` member.
    pub fn hamiltonian(&self) -> HamiltonianDensity {
        let (c, p) = (self.c.clone(), self.p.clone());
        let (alpha, beta) = (self.alpha.scale(-1.0), self.beta.scale(-1.0));
        HamiltonianDensity::new("order-6 H")
            .term(SmoothFn::monomial(1.0 / 6.0, 3), [0, 0, 0])
            .term(c.scale(-0.5), [2, 0, 0])
            .term(p, [0, 2, 0])
            .term(alpha, [0, 0, 2])
            .term(beta, [0, 3, 0])
    }

    pub fn alpha_f(&self, f: &SmoothFn) -> SmoothFn {
        let me = self.clone();
        let f = f.clone();
        SmoothFn::new("alpha_f", move |j| {
            let x = me.ctx(&f, j);
            let (c, cp) = (x.c[0], x.c[1]);
            x.a[0] * x.f[3]
                + (8.0 / 7.0 * c * x.p[0] + 3.0 / 70.0 * c * c * cp) * x.f[4]
                + 9.0 / 70.0 * c * c * c * x.f[5]
        })
    }

    pub fn beta_f(&self, f: &SmoothFn) -> SmoothFn {
        let me = self.clone();
        let f = f.clone();
        SmoothFn::new("beta_f", move |j| {
            let x = me.ctx(&f, j);
            let (c, c1, c2) = (x.c[0], x.c[1], x.c[2]);
            let (p, p1) = (x.p[0], x.p[1]);
            x.b * x.f[3]
                - (1.5 * x.a[0]
                    + (253.0 * p * c1 + 169.0 * c * p1) / 168.0
                    + c * c1 * c1 / 35.0
                    + 5.0 / 56.0 * c * c * c2)
                    * x.f[4]
                - (29.0 / 21.0 * c * p + 31.0 / 70.0 * c * c * c1) * x.f[5]
                - c * c * c * x.f[6] / 7.0
        })
    }

    pub fn gamma_f(&self, f: &SmoothFn) -> SmoothFn {
        let me = self.clone();
        let f = f.clone();
        SmoothFn::new("gamma_f", move |j| {
            let x = me.ctx(&f, j);
            let (c, c1, c2, c3) = (x.c[0], x.c[1], x.c[2], x.c[3]);
            let (p, p1, p2) = (x.p[0], x.p[1], x.p[2]);
            let (a, a1) = (x.a[0], x.a[1]);
            (3.0 / 7.0 * x.b - 6.0 / 7.0 * a1
                + 3.0 / 35.0 * (c1 * c1 * c1 - c * c * c3 - 3.0 * c * c1 * c2)
                + c1 * p1
                - 47.0 / 14.0 * p * c2
                - c * p2)
                * x.f[4]
                - (2.0 * a
                    + 37.0 / 14.0 * p * c1
                    + 3.0 / 35.0 * (c * c1 * c1 + 11.0 * c * c * c2)
                    + 8.0 / 7.0 * c * p1)
                    * x.f[5]
                - 1.0 / 14.0 * (23.0 * c * p + 9.0 * c * c * c1) * x.f[6]
                - 3.0 / 20.0 * c * c * c * x.f[7]
        })
    }

    pub fn delta_f(&self, f: &SmoothFn) -> SmoothFn {
        let me = self.clone();
        let f = f.clone();
        SmoothFn::new("delta_f", move |j| {
            let x = me.ctx(&f, j);
            let (c, c1, c2, c3, c4, c5) = (x.c[0], x.c[1], x.c[2], x.c[3], x.c[4], x.c[5]);
            let (p, p1, p2, p3, p4) = (x.p[0], x.p[1], x.p[2], x.p[3], x.p[4]);
            let (a, a1, a2) = (x.a[0], x.a[1], x.a[2]);
            (0.1 * p1 * c3
                + (10.0 * c * c2 * c3 + 7.0 * c * c1 * c4 + c * c * c5) / 40.0
                + 2.0 / 15.0 * p * c4
                + 1.0 / 60.0 * c * p4)
                * x.f[4]
                + (a2 / 15.0
                    + 0.2 * p1 * c2
                    + 3.0 / 40.0 * c * c2 * c2
                    + 0.3 * p * c3
                    + c * c1 * c3 / 10.0
                    + c * p3 / 15.0
                    + c * c * c4 / 15.0)
                    * x.f[5]
                + (2.0 / 15.0 * a1
                    + 2.0 / 15.0 * c1 * p1
                    + p * c2 / 3.0
                    + (7.0 * c * c1 * c2 + 3.0 * c * c * c3) / 40.0
                    + 0.1 * c * p2)
                    * x.f[6]
                + (a / 15.0 + p * c1 / 6.0 + c * c1 * c1 / 16.0 + 0.1 * c * p1 + 3.0 / 40.0 * c * c * c2)
                    * x.f[7]
                + (c * p / 20.0 + 3.0 / 80.0 * c * c * c1) * x.f[8]
                + c * c * c / 240.0 * x.f[9]
        })
    }

    /// `H_f` through ε⁶: the ε⁴-accurate density plus
    /// `−ε⁶[α_f u_xxx² + β_f u_xx³ + γ_f u_xx² u_x² + δ_f u_x⁶]`.
    pub fn commuting_density(&self, f: &SmoothFn) -> HamiltonianDensity {
        let base = hf_density(f, &self.c, &self.p);
        let ext = HamiltonianDensity::new("eps^6")
            .term(self.alpha_f(f).scale(-1.0), [0, 0, 2])
            .term(self.beta_f(f).scale(-1.0), [0, 3, 0])
            .term(self.gamma_f(f).scale(-1.0), [2, 2, 0])
            .term(self.delta_f(f).scale(-1.0), [6, 0, 0]);
        base.concat(&ext, format!("H_f^(6)[{}]", f.label()))
    }
}

/// Coefficients `b_0 … b_10` of the general ε⁴ conservation law
/// `u_t + a u_x + ε ∂_x(b_0 u_x) + ε²∂_x(b_1 u_xx + b_2 u_x²) + ε³∂_x(b_3 u_xxx + b_4 u_xx u_x + b_5 u_x³)
///  + ε⁴∂_x(b_6 u_xxxx + b_7 u_xxx u_x + b_8 u_xx² + b_9 u_xx u_x² + b_10 u_x⁴) = 0`.
#[derive(Clone, Debug)]
pub struct TemplateCoefficients {
    pub b: [SmoothFn; 11],
}

impl TemplateCoefficients {
    pub fn zero() -> Self {
        TemplateCoefficients {
            b: std::array::from_fn(|_| SmoothFn::zero()),
        }
    }

    pub fn with(mut self, index: usize, f: SmoothFn) -> Self {
        self.b[index] = f;
        self
    }
}

#[derive(Clone, Debug)]
pub struct RelationViolation {
    pub relation: &'static str,
    pub max_violation: f64,
}

#[derive(Clone, Debug)]
pub struct CoefficientReport {
    pub violations: Vec<RelationViolation>,
    pub tolerance: f64,
}

impl CoefficientReport {
    pub fn passed(&self) -> bool {
        self.violations.iter().all(|v| v.max_violation <= self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.violations.iter().map(|v| v.max_violation).fold(0.0, f64::max)
    }
}

/// Pointwise check of the Hamiltonian constraints on the template coefficients:
/// `b0 = 0, b2 = b1'/2, b3 = 0, b5 = b4'/3, b7 = 2 b6', b8 = 3/2 b6'` and
/// `b10 = (b9' − b6''')/4`.
///
/// The last relation follows from writing the ε⁴ flux as `δ/δu ∫(A u_xx² + B u_x⁴)`
/// with `b6 = 2A`, `b9 = 2A'' − 12B`, `b10 = −3B'`; the `b6'''` term vanishes
/// whenever `b6` is at most quadratic in `u`.
pub fn check_coefficients(tc: &TemplateCoefficients, u_samples: &[f64]) -> CoefficientReport {
    let b = &tc.b;
    let relations: [(&'static str, Box<dyn Fn(f64) -> f64>); 7] = [
        ("b0 = 0", Box::new(|u| b[0].eval(u))),
        ("b2 = b1'/2", Box::new(|u| b[2].eval(u) - 0.5 * b[1].deriv(u, 1))),
        ("b3 = 0", Box::new(|u| b[3].eval(u))),
        ("b5 = b4'/3", Box::new(|u| b[5].eval(u) - b[4].deriv(u, 1) / 3.0)),
        ("b7 = 2 b6'", Box::new(|u| b[7].eval(u) - 2.0 * b[6].deriv(u, 1))),
        ("b8 = 3/2 b6'", Box::new(|u| b[8].eval(u) - 1.5 * b[6].deriv(u, 1))),
        (
            "b10 = (b9' - b6''')/4",
            Box::new(|u| b[10].eval(u) - 0.25 * (b[9].deriv(u, 1) - b[6].deriv(u, 3))),
        ),
    ];
    let violations = relations
        .iter()
        .map(|(name, r)| RelationViolation {
            relation: name,
            max_violation: u_samples.iter().map(|&u| r(u).abs()).fold(0.0, f64::max),
        })
        .collect();
    CoefficientReport {
        violations,
        tolerance: 1e-12,
    }
}

/// Result of a bracket-scaling sweep.
#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub eps: Vec<f64>,
    pub brackets: Vec<f64>,
    pub fit: Option<crate::diagnostics::FitResult>,
    /// Set when the bracket at the largest ε is below `1e-14` in magnitude.
    pub indistinguishable_from_zero: bool,
    pub expansion: BracketExpansion,
}

/// Evaluate `|{H_f, H_g}(u_test)|` over `eps_list` and fit its log-log slope.
pub fn bracket_scaling(
    h_f: &HamiltonianDensity,
    h_g: &HamiltonianDensity,
    eps_list: &[f64],
    u_test: &RealField,
) -> Result<ScalingReport> {
    let expansion = BracketExpansion::compute(h_f, h_g, u_test)?;
    let brackets: Vec<f64> = eps_list.iter().map(|&e| expansion.value(e).abs()).collect();
    let largest = eps_list
        .iter()
        .zip(&brackets)
        .fold((0.0, 0.0), |acc, (&e, &b)| if e > acc.0 { (e, b) } else { acc });
    let zero = largest.1 < 1e-14;
    let fit = if zero {
        None
    } else {
        Some(crate::diagnostics::loglog_fit(eps_list, &brackets)?)
    };
    Ok(ScalingReport {
        eps: eps_list.to_vec(),
        brackets,
        fit,
        indistinguishable_from_zero: zero,
        expansion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PeriodicGrid;
    use std::f64::consts::PI;

    fn test_field() -> RealField {
        let g = PeriodicGrid::new(PI, 64).unwrap();
        g.sample(|x| 0.5 + 0.3 * x.sin() + 0.05 * (2.0 * x).cos())
    }

    #[test]
    fn cubic_density_gradient() {
        let u = test_field();
        let h = HamiltonianDensity::new("u^3/6").term(SmoothFn::monomial(1.0 / 6.0, 3), [0, 0, 0]);
        let e = euler_lagrange(&h, &u, 0.1).unwrap();
        for (a, b) in e.values.iter().zip(&u.values) {
            assert!((a - b * b / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dispersive_density_gradient_matches_hand_formula() {
        let u = test_field();
        let eps = 0.1;
        let c = SmoothFn::new("c", |j| j.square() * 0.5 + 0.2);
        let h = HamiltonianDensity::new("-c ux^2/2").term(c.scale(-0.5), [2, 0, 0]);
        let e = euler_lagrange(&h, &u, eps).unwrap();
        let ux = u.derivative(1).unwrap();
        let uxx = u.derivative(2).unwrap();
        for j in 0..u.values.len() {
            let v = u.values[j];
            let hand = eps * eps * ((0.5 * v * v + 0.2) * uxx.values[j] + 0.5 * v * ux.values[j].powi(2));
            assert!((e.values[j] - hand).abs() < 1e-12);
        }
    }

    #[test]
    fn total_derivative_has_zero_gradient() {
        let u = test_field();
        // ∂_x(u u_x) = u_x² + u u_xx
        let h = HamiltonianDensity::new("d(u ux)")
            .term(SmoothFn::constant(1.0), [2, 0, 0])
            .term(SmoothFn::identity(), [0, 1, 0]);
        let e = euler_lagrange(&h, &u, 0.3).unwrap();
        assert!(e.sup_norm() < 1e-10);
    }

    #[test]
    fn partials_match_finite_differences() {
        let h = hf_density(
            &SmoothFn::monomial(1.0 / 24.0, 4),
            &SmoothFn::new("c", |j| j.exp() * 0.2),
            &SmoothFn::new("p", |j| j.square() * 0.1),
        );
        let x = [0.7, -0.4, 1.3, 0.0];
        let eps = 0.4;
        let p = h.partials(x, eps);
        for i in 0..3 {
            let d = 1e-5;
            let (mut lo, mut hi) = (x, x);
            lo[i] -= d;
            hi[i] += d;
            let fd = (h.eval(hi, eps) - h.eval(lo, eps)) / (2.0 * d);
            assert!((fd - p[i]).abs() <= 1e-6 * p[i].abs().max(1e-3), "partial {i}: {fd} vs {}", p[i]);
        }
    }

    #[test]
    fn hf_reduces_to_cubic_hamiltonian() {
        let c = SmoothFn::new("c", |j| j.sin_cos().0 + 2.0);
        let p = SmoothFn::new("p", |j| j.cosh());
        let h = hf_density(&SmoothFn::monomial(1.0 / 6.0, 3), &c, &p);
        for &u in &[0.2f64, 0.9] {
            let x = [u, 0.3, -0.8, 0.0];
            let direct = u.powi(3) / 6.0 - 0.5 * c.eval(u) * 0.09 + p.eval(u) * 0.64;
            assert!((h.eval(x, 1.0) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn alpha_values() {
        let one = SmoothFn::constant(1.0);
        let a = obstruction_alpha(&one, &SmoothFn::zero());
        assert_eq!(a.eval(0.3), 0.0);
        let a = obstruction_alpha(&one, &one);
        assert!((a.eval(0.3) - 20.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn obstruction_for_vanishing_c() {
        let r = order6_extension(&SmoothFn::zero(), &SmoothFn::constant(1.0), &SmoothFn::zero(), &[0.5]);
        assert!(matches!(r, Err(Error::Obstruction(_))));
    }

    #[test]
    fn cubic_member_of_extension_is_the_hamiltonian() {
        let c = SmoothFn::new("c", |j| j.exp());
        let p = SmoothFn::new("p", |j| j.square());
        let ext = order6_extension(&c, &p, &SmoothFn::constant(0.3), &[0.5]).unwrap();
        let f = SmoothFn::monomial(1.0 / 6.0, 3);
        for &u in &[0.3, 0.8] {
            assert!((ext.alpha_f(&f).eval(u) - ext.alpha.eval(u)).abs() < 1e-13);
            assert!((ext.beta_f(&f).eval(u) - 0.3).abs() < 1e-13);
            assert!(ext.gamma_f(&f).eval(u).abs() < 1e-13);
            assert!(ext.delta_f(&f).eval(u).abs() < 1e-13);
        }
    }

    #[test]
    fn kdv_template_passes_and_counterexample_fails() {
        let samples: Vec<f64> = (0..11).map(|i| 0.1 * i as f64).collect();
        let kdv = TemplateCoefficients::zero().with(1, SmoothFn::constant(1.0));
        assert!(check_coefficients(&kdv, &samples).passed());
        let bad = TemplateCoefficients::zero().with(1, SmoothFn::identity());
        let r = check_coefficients(&bad, &samples);
        assert!(!r.passed());
        assert!((r.violations[1].max_violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quartic_order_relation_includes_third_derivative_of_b6() {
        // δ/δu ∫ p u_xx² with p = u³ has b6 = 2p, b9 = 2p'', b10 = 0 and is Hamiltonian by construction.
        let samples: Vec<f64> = (1..11).map(|i| 0.1 * i as f64).collect();
        let p = SmoothFn::monomial(1.0, 3);
        let tc = TemplateCoefficients::zero()
            .with(6, p.scale(2.0))
            .with(7, p.derivative(1).scale(4.0))
            .with(8, p.derivative(1).scale(3.0))
            .with(9, p.derivative(2).scale(2.0));
        let r = check_coefficients(&tc, &samples);
        assert!(r.passed(), "{:?}", r.violations);
        // the relation b10 = b9'/4 alone would demand b10 = p'''/2 = 3
        assert!((0.25 * tc.b[9].deriv(0.5, 1) - 3.0).abs() < 1e-12);
    }
}
