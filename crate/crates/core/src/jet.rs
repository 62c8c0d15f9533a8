//! Truncated Taylor series ("jets") and smooth scalar functions built on them.
//!
//! A [`Jet`] stores normalized Taylor coefficients `t_k = f^(k)(x0) / k!` of a
//! quantity around an expansion point. Arithmetic and the elementary functions
//! propagate the coefficients exactly (up to rounding), so any closure written
//! against `Jet` doubles as an analytic derivative oracle. [`SmoothFn`] wraps
//! such closures: model fluxes `a(u)`, invariants `c(u)`, `p(u)`, initial data
//! and its inverse branches are all `SmoothFn`s.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

/// Maximum number of Taylor coefficients carried by a jet.
pub const JET_CAP: usize = 24;

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; JET_CAP],
    n: usize,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs()).finish()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

impl Jet {
    /// Constant with `len` coefficients.
    pub fn constant(value: f64, len: usize) -> Self {
        assert!((1..=JET_CAP).contains(&len), "jet length {len} out of range");
        let mut c = [0.0; JET_CAP];
        c[0] = value;
        Jet { c, n: len }
    }

    /// The independent variable `x0 + dx` truncated after `order`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Jet::constant(x0, order + 1);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        let mut j = Jet::constant(0.0, coeffs.len());
        j.c[..coeffs.len()].copy_from_slice(coeffs);
        j
    }

    /// Jet whose entries are derivatives `d^k f`, converted to Taylor form.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let mut j = Jet::constant(0.0, derivs.len());
        for (k, d) in derivs.iter().enumerate() {
            j.c[k] = d / factorial(k);
        }
        j
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn order(&self) -> usize {
        self.n - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.n]
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k < self.n {
            self.c[k]
        } else {
            0.0
        }
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    /// All derivatives `f, f', ..., f^(order)`.
    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.derivative(k)).collect()
    }

    /// Jet of the derivative; loses one order.
    pub fn differentiate(&self) -> Jet {
        let n = self.n.max(2) - 1;
        let mut out = Jet::constant(0.0, n);
        for k in 0..n {
            out.c[k] = (k + 1) as f64 * self.coeff(k + 1);
        }
        out
    }

    pub fn truncate(&self, len: usize) -> Jet {
        let mut out = *self;
        out.n = len.min(self.n).max(1);
        for v in out.c[out.n..].iter_mut() {
            *v = 0.0;
        }
        out
    }

    fn with_len(len: usize) -> Jet {
        Jet::constant(0.0, len)
    }

    fn common_len(&self, other: &Jet) -> usize {
        self.n.min(other.n)
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = *self;
        for v in out.c[..out.n].iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn offset(&self, s: f64) -> Jet {
        let mut out = *self;
        out.c[0] += s;
        out
    }

    pub fn recip(&self) -> Jet {
        Jet::constant(1.0, self.n) / *self
    }

    pub fn square(&self) -> Jet {
        *self * *self
    }

    pub fn exp(&self) -> Jet {
        let n = self.n;
        let mut e = Jet::with_len(n);
        e.c[0] = self.c[0].exp();
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * e.c[k - j];
            }
            e.c[k] = s / k as f64;
        }
        e
    }

    pub fn ln(&self) -> Jet {
        let n = self.n;
        let a0 = self.c[0];
        let mut l = Jet::with_len(n);
        l.c[0] = a0.ln();
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..k {
                s += j as f64 * l.c[j] * self.c[k - j];
            }
            l.c[k] = (self.c[k] - s / k as f64) / a0;
        }
        l
    }

    /// Real power `a^r`; requires a positive constant term unless `r` is integral.
    pub fn powf(&self, r: f64) -> Jet {
        if r.fract() == 0.0 && r.abs() < 64.0 {
            return self.powi(r as i32);
        }
        let n = self.n;
        let a0 = self.c[0];
        let mut p = Jet::with_len(n);
        p.c[0] = a0.powf(r);
        for k in 1..n {
            let mut s = 0.0;
            for j in 1..=k {
                s += ((r + 1.0) * j as f64 - k as f64) * self.c[j] * p.c[k - j];
            }
            p.c[k] = s / (k as f64 * a0);
        }
        p
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powi(&self, e: i32) -> Jet {
        if e < 0 {
            return self.powi(-e).recip();
        }
        let mut result = Jet::constant(1.0, self.n);
        let mut base = *self;
        let mut e = e as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            e >>= 1;
        }
        result
    }

    /// `(sinh, cosh)` computed jointly.
    pub fn sinh_cosh(&self) -> (Jet, Jet) {
        let n = self.n;
        let mut s = Jet::with_len(n);
        let mut c = Jet::with_len(n);
        s.c[0] = self.c[0].sinh();
        c.c[0] = self.c[0].cosh();
        for k in 1..n {
            let (mut ss, mut cc) = (0.0, 0.0);
            for j in 1..=k {
                let w = j as f64 * self.c[j];
                ss += w * c.c[k - j];
                cc += w * s.c[k - j];
            }
            s.c[k] = ss / k as f64;
            c.c[k] = cc / k as f64;
        }
        (s, c)
    }

    pub fn sinh(&self) -> Jet {
        self.sinh_cosh().0
    }

    pub fn cosh(&self) -> Jet {
        self.sinh_cosh().1
    }

    /// `(sin, cos)` computed jointly.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.n;
        let mut s = Jet::with_len(n);
        let mut c = Jet::with_len(n);
        s.c[0] = self.c[0].sin();
        c.c[0] = self.c[0].cos();
        for k in 1..n {
            let (mut ss, mut cc) = (0.0, 0.0);
            for j in 1..=k {
                let w = j as f64 * self.c[j];
                ss += w * c.c[k - j];
                cc -= w * s.c[k - j];
            }
            s.c[k] = ss / k as f64;
            c.c[k] = cc / k as f64;
        }
        (s, c)
    }

    /// Evaluate the polynomial `sum_k poly[k] * h^k` where `h` must have zero constant term.
    pub fn compose_poly(poly: &[f64], h: &Jet) -> Jet {
        let mut acc = Jet::constant(0.0, h.n);
        for &p in poly.iter().rev() {
            acc = (acc * *h).offset(p);
        }
        acc
    }

    /// Invert a series `s(d) = s1 d + s2 d^2 + ...` (constant term ignored):
    /// returns `d(y)` with `s(d(y)) = y` to the common order.
    pub fn invert_series(&self) -> Jet {
        let n = self.n;
        let s1 = self.c[1];
        let y = Jet::variable(0.0, n - 1);
        let mut tail = *self;
        tail.c[0] = 0.0;
        tail.c[1] = 0.0;
        let mut d = y.scale(1.0 / s1);
        for _ in 1..n {
            let corr = Jet::compose_poly(tail.coeffs(), &d);
            d = (y - corr).scale(1.0 / s1);
        }
        d
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let n = self.common_len(&o);
        let mut out = Jet::with_len(n);
        for k in 0..n {
            out.c[k] = self.c[k] + o.c[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let n = self.common_len(&o);
        let mut out = Jet::with_len(n);
        for k in 0..n {
            out.c[k] = self.c[k] - o.c[k];
        }
        out
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let n = self.common_len(&o);
        let mut out = Jet::with_len(n);
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * o.c[k - j];
            }
            out.c[k] = s;
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let n = self.common_len(&o);
        let mut q = Jet::with_len(n);
        let b0 = o.c[0];
        for k in 0..n {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= o.c[j] * q.c[k - j];
            }
            q.c[k] = s / b0;
        }
        q
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, s: f64) -> Jet {
        self.offset(s)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, s: f64) -> Jet {
        self.offset(-s)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, s: f64) -> Jet {
        self.scale(1.0 / s)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j.offset(self)
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        (-j).offset(self)
    }
}

type JetClosure = dyn Fn(&Jet) -> Jet + Send + Sync;

/// A smooth scalar function `R -> R` with exact Taylor propagation.
#[derive(Clone)]
pub struct SmoothFn {
    label: Arc<str>,
    f: Arc<JetClosure>,
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothFn({})", self.label)
    }
}

impl SmoothFn {
    pub fn new(label: impl Into<String>, f: impl Fn(&Jet) -> Jet + Send + Sync + 'static) -> Self {
        let label: String = label.into();
        SmoothFn {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn constant(value: f64) -> Self {
        SmoothFn::new(format!("{value}"), move |j| Jet::constant(value, j.len()))
    }

    pub fn zero() -> Self {
        SmoothFn::constant(0.0)
    }

    pub fn identity() -> Self {
        SmoothFn::new("u", |j| *j)
    }

    /// `scale * u^n`.
    pub fn monomial(scale: f64, n: i32) -> Self {
        SmoothFn::new(format!("{scale}*u^{n}"), move |j| j.powi(n).scale(scale))
    }

    /// Polynomial `sum_k coeffs[k] u^k`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let label = format!("poly{coeffs:?}");
        SmoothFn::new(label, move |j| {
            let mut acc = Jet::constant(0.0, j.len());
            for &c in coeffs.iter().rev() {
                acc = (acc * *j).offset(c);
            }
            acc
        })
    }

    pub fn apply(&self, j: &Jet) -> Jet {
        (self.f)(j)
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.apply(&Jet::constant(u, 1)).value()
    }

    /// `f, f', ..., f^(order)` at `u`.
    pub fn derivs(&self, u: f64, order: usize) -> Vec<f64> {
        self.apply(&Jet::variable(u, order)).derivatives()
    }

    /// `k`-th derivative at `u`.
    pub fn deriv(&self, u: f64, k: usize) -> f64 {
        self.apply(&Jet::variable(u, k)).derivative(k)
    }

    /// The function `f^(k)` as a new smooth function.
    pub fn derivative(&self, k: usize) -> SmoothFn {
        if k == 0 {
            return self.clone();
        }
        let base = self.clone();
        SmoothFn::new(format!("d{k}[{}]", self.label), move |j| {
            let n = j.len();
            let u0 = j.value();
            let full = base.apply(&Jet::variable(u0, n - 1 + k));
            // Taylor coefficients of f^(k) around u0: f^(k+m)(u0)/m!
            let poly: Vec<f64> = (0..n)
                .map(|m| {
                    let rising: f64 = ((m + 1)..=(m + k)).map(|v| v as f64).product();
                    full.coeff(m + k) * rising
                })
                .collect();
            let h = j.offset(-u0);
            Jet::compose_poly(&poly, &h)
        })
    }

    pub fn compose(&self, inner: &SmoothFn) -> SmoothFn {
        let (a, b) = (self.clone(), inner.clone());
        SmoothFn::new(format!("{}∘{}", self.label, inner.label), move |j| a.apply(&b.apply(j)))
    }

    pub fn add(&self, o: &SmoothFn) -> SmoothFn {
        let (a, b) = (self.clone(), o.clone());
        SmoothFn::new(format!("({}+{})", self.label, o.label), move |j| a.apply(j) + b.apply(j))
    }

    pub fn mul(&self, o: &SmoothFn) -> SmoothFn {
        let (a, b) = (self.clone(), o.clone());
        SmoothFn::new(format!("({}*{})", self.label, o.label), move |j| a.apply(j) * b.apply(j))
    }

    pub fn scale(&self, s: f64) -> SmoothFn {
        let a = self.clone();
        SmoothFn::new(format!("{s}*{}", self.label), move |j| a.apply(j).scale(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_functions_match_closed_form_derivatives() {
        let x = 0.37;
        let j = Jet::variable(x, 5);
        let e = j.exp();
        for k in 0..6 {
            assert!((e.derivative(k) - x.exp()).abs() < 1e-13);
        }
        let l = j.ln();
        assert!((l.derivative(1) - 1.0 / x).abs() < 1e-12);
        assert!((l.derivative(3) - 2.0 / x.powi(3)).abs() < 1e-10);
        let s = j.sqrt();
        assert!((s.derivative(2) + 0.25 * x.powf(-1.5)).abs() < 1e-12);
        let (sh, ch) = j.sinh_cosh();
        assert!((sh.derivative(3) - x.cosh()).abs() < 1e-13);
        assert!((ch.derivative(4) - x.cosh()).abs() < 1e-12);
        let (sn, cs) = j.sin_cos();
        assert!((sn.derivative(2) + x.sin()).abs() < 1e-13);
        assert!((cs.derivative(3) - x.sin()).abs() < 1e-13);
    }

    #[test]
    fn powi_handles_negative_base() {
        let j = Jet::variable(-0.5, 3);
        let p = j.powi(3);
        assert!((p.value() + 0.125).abs() < 1e-15);
        assert!((p.derivative(1) - 0.75).abs() < 1e-14);
        assert!((p.derivative(2) + 3.0).abs() < 1e-14);
        assert!((p.derivative(3) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_operator_nests() {
        let f = SmoothFn::new("sinh", |j| j.sinh());
        let f3 = f.derivative(3);
        let u = 0.8;
        assert!((f3.eval(u) - u.cosh()).abs() < 1e-12);
        assert!((f3.deriv(u, 2) - u.cosh()).abs() < 1e-11);
        let f5 = f3.derivative(2);
        assert!((f5.deriv(u, 1) - u.sinh()).abs() < 1e-10);
    }

    #[test]
    fn series_inversion_round_trips() {
        // s(d) = sinh(d) has inverse asinh(y) = y - y^3/6 + 3 y^5/40
        let s = Jet::variable(0.0, 7).sinh();
        let d = s.invert_series();
        assert!((d.coeff(1) - 1.0).abs() < 1e-15);
        assert!((d.coeff(3) + 1.0 / 6.0).abs() < 1e-14);
        assert!((d.coeff(5) - 3.0 / 40.0).abs() < 1e-14);
        assert!((d.coeff(7) + 5.0 / 112.0).abs() < 1e-13);
    }
}
