//! Periodic grids, discrete Fourier transforms and spectral differentiation.
//!
//! Normalization: the forward transform is unnormalized,
//! `c_m = sum_j u_j exp(-2 pi i j m / N)`, and the inverse carries `1/N`.
//! With this convention the discrete Parseval identity reads
//!
//! ```text
//! (2L/N) * sum_j u_j^2 = (2L/N^2) * sum_m |c_m|^2
//! ```
//!
//! Coefficients are stored in FFT order: index `j < N/2` holds mode `m = j`,
//! index `j >= N/2` holds `m = j - N`; index `N/2` is the Nyquist mode `-N/2`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    half_width: f64,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and at least 16, got {n}"
            )));
        }
        Ok(PeriodicGrid { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + self.spacing() * j as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Integer mode number stored at FFT index `j`.
    pub fn mode(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        PI / self.half_width * self.mode(j) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Largest resolved wavenumber `pi N / (2L)`.
    pub fn max_wavenumber(&self) -> f64 {
        PI / self.half_width * (self.n / 2) as f64
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: *self,
            values: (0..self.n).map(|j| f(self.node(j))).collect(),
        }
    }
}

/// Forward/inverse plans for one transform size, shared across threads.
pub struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    pub fn forward(&self, buf: &mut [Complex64]) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        self.forward.process_with_scratch(buf, &mut scratch);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        self.inverse.process_with_scratch(buf, &mut scratch);
        let s = 1.0 / buf.len() as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Plan cache keyed by transform size. Plans are immutable once built.
pub fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Samples `u(x_j)` of a periodic function.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(RealField { grid, values })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        RealField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.values.len() == self.grid.len() && self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_valid(&self) -> Result<()> {
        if self.values.len() != self.grid.len() {
            return Err(Error::InvalidField("sample count does not match grid".into()));
        }
        if let Some(j) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value at node {j} (x = {})",
                self.grid.node(j)
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> RealField {
        RealField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic trapezoid rule, spectrally accurate for smooth periodic data.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn to_spectral(&self) -> SpectralCoeffs {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plans(self.grid.len()).forward(&mut buf);
        SpectralCoeffs {
            grid: self.grid,
            coeffs: buf,
        }
    }

    /// Spectral `m`-th derivative, `m <= 6`.
    pub fn derivative(&self, m: u32) -> Result<RealField> {
        if m > 6 {
            return Err(Error::InvalidParameter(format!("derivative order {m} exceeds 6")));
        }
        self.ensure_valid()?;
        if m == 0 {
            return Ok(self.clone());
        }
        let mut c = self.to_spectral();
        c.differentiate(m);
        Ok(c.to_physical())
    }

    /// Derivatives of orders `0..=max_order` sharing one forward transform.
    pub fn derivatives(&self, max_order: u32) -> Result<Vec<RealField>> {
        self.ensure_valid()?;
        let c = self.to_spectral();
        Ok((0..=max_order)
            .map(|m| {
                let mut d = c.clone();
                d.differentiate(m);
                d.to_physical()
            })
            .collect())
    }
}

/// Discrete Fourier coefficients in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    pub grid: PeriodicGrid,
    pub coeffs: Vec<Complex64>,
}

/// Outcome of a spectral-tail check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionReport {
    pub ok: bool,
    /// Tail maximum divided by the overall maximum modulus.
    pub tail_relative: f64,
    pub max_modulus: f64,
}

impl SpectralCoeffs {
    pub fn to_physical(&self) -> RealField {
        let mut buf = self.coeffs.clone();
        plans(self.grid.len()).inverse(&mut buf);
        RealField {
            grid: self.grid,
            values: buf.iter().map(|c| c.re).collect(),
        }
    }

    /// Multiply by `(i k)^m`, zeroing the Nyquist mode for odd `m`.
    pub fn differentiate(&mut self, m: u32) {
        if m == 0 {
            return;
        }
        let grid = self.grid;
        for (j, c) in self.coeffs.iter_mut().enumerate() {
            *c *= ik_power(grid.wavenumber(j), m);
        }
        if m % 2 == 1 {
            self.coeffs[grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        }
    }

    /// `(2L/N^2) * sum |c_m|^2`, equal to the grid L2 norm squared.
    pub fn parseval_sum(&self) -> f64 {
        let n = self.grid.len() as f64;
        2.0 * self.grid.half_width() / (n * n) * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let n = self.grid.len();
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm())).max(f64::MIN_POSITIVE);
        (1..n)
            .map(|j| (self.coeffs[j] - self.coeffs[n - j].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// Zero every mode with `|m| > N/3`.
    pub fn dealias_two_thirds(&mut self) {
        let n = self.grid.len() as i64;
        let cutoff = n / 3;
        for j in 0..self.coeffs.len() {
            if self.grid.mode(j).abs() > cutoff {
                self.coeffs[j] = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Spectral-tail test on the top `tail_fraction` of `|k|`.
    pub fn resolution_ok(&self, tail_fraction: f64, threshold: f64) -> Result<ResolutionReport> {
        if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail fraction must lie in (0,1), got {tail_fraction}"
            )));
        }
        if !(threshold > 0.0) {
            return Err(Error::InvalidParameter(format!("threshold must be positive, got {threshold}")));
        }
        let half = (self.grid.len() / 2) as f64;
        let cut = ((1.0 - tail_fraction) * half).ceil() as i64;
        let mut max_all = 0.0f64;
        let mut max_tail = 0.0f64;
        for (j, c) in self.coeffs.iter().enumerate() {
            let a = c.norm();
            max_all = max_all.max(a);
            if self.grid.mode(j).abs() >= cut {
                max_tail = max_tail.max(a);
            }
        }
        if max_all == 0.0 {
            return Ok(ResolutionReport {
                ok: true,
                tail_relative: 0.0,
                max_modulus: 0.0,
            });
        }
        let rel = max_tail / max_all;
        Ok(ResolutionReport {
            ok: rel <= threshold,
            tail_relative: rel,
            max_modulus: max_all,
        })
    }

    /// Moduli `|c_m|` for modes `m = 0..N/2-1` paired with their wavenumbers.
    pub fn positive_spectrum(&self) -> Vec<(f64, f64)> {
        (0..self.grid.len() / 2)
            .map(|j| (self.grid.wavenumber(j), self.coeffs[j].norm()))
            .collect()
    }

    /// Trigonometric interpolant at arbitrary points. The Nyquist mode
    /// enters as a cosine so the result is real and matches the samples.
    pub fn eval_at(&self, xs: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let l = self.grid.half_width();
        let half = n / 2;
        xs.par_iter()
            .map(|&x| {
                let th = PI * (x + l) / l;
                let z = Complex64::new(th.cos(), th.sin());
                let mut w = z;
                let mut s = 0.0;
                for m in 1..half {
                    if m % 64 == 0 {
                        // Re-anchor the recurrence to keep the phase error flat.
                        let a = th * m as f64;
                        w = Complex64::new(a.cos(), a.sin());
                    }
                    s += (self.coeffs[m] * w).re;
                    w *= z;
                }
                let nyq = self.coeffs[half].re * (th * half as f64).cos();
                (self.coeffs[0].re + 2.0 * s + nyq) / n as f64
            })
            .collect()
    }
}

/// `(i k)^m` as a complex number.
pub fn ik_power(k: f64, m: u32) -> Complex64 {
    let mag = k.powi(m as i32);
    match m % 4 {
        0 => Complex64::new(mag, 0.0),
        1 => Complex64::new(0.0, mag),
        2 => Complex64::new(-mag, 0.0),
        _ => Complex64::new(0.0, -mag),
    }
}

/// Default spectral-resolution tail fraction.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;
/// Default spectral-resolution threshold relative to the largest coefficient.
pub const DEFAULT_RESOLUTION_THRESHOLD: f64 = 1e-8;
