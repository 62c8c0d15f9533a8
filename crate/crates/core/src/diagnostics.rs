//! Fits and monitors: log-log regression, windowed norms, L∞ histories and
//! Fourier-decay singularity fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{RealField, SpectralCoeffs};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of the fitted data.
    pub r: f64,
    /// Standard deviation of the slope estimate.
    pub sigma: f64,
    pub points: usize,
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "fit input lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r = if syy > 0.0 {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let sigma = (sse.max(0.0) / (nf - 2.0) / sxx).sqrt();
    Ok(FitResult {
        slope,
        intercept,
        r,
        sigma,
        points: n,
    })
}

/// Fit `log10 err = intercept + slope log10 eps`.
pub fn loglog_fit(eps: &[f64], err: &[f64]) -> Result<FitResult> {
    let mut lx = Vec::with_capacity(eps.len());
    let mut ly = Vec::with_capacity(err.len());
    for (i, (&e, &r)) in eps.iter().zip(err).enumerate() {
        if !(e > 0.0) {
            return Err(Error::NonPositive { index: i, value: e });
        }
        if !(r > 0.0) {
            return Err(Error::NonPositive { index: i, value: r });
        }
        lx.push(e.log10());
        ly.push(r.log10());
    }
    linear_fit(&lx, &ly)
}

fn window_indices(f: &RealField, lo: f64, hi: f64) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..f.grid.len())
        .filter(|&j| {
            let x = f.grid.node(j);
            x >= lo && x <= hi
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyWindow { lo, hi });
    }
    Ok(idx)
}

/// `max |f − g|` over grid nodes in `[lo, hi]`.
pub fn windowed_sup_diff(f: &RealField, g: &RealField, lo: f64, hi: f64) -> Result<f64> {
    if f.values.len() != g.values.len() {
        return Err(Error::InvalidField("fields live on different grids".into()));
    }
    let idx = window_indices(f, lo, hi)?;
    Ok(idx
        .into_iter()
        .map(|j| (f.values[j] - g.values[j]).abs())
        .fold(0.0, f64::max))
}

/// Discrete `L²` norm of `f − g` over the nodes in `[lo, hi]`, i.e.
/// `(Δx Σ |f_j − g_j|²)^{1/2}`.
pub fn windowed_l2_diff(f: &RealField, g: &RealField, lo: f64, hi: f64) -> Result<f64> {
    if f.values.len() != g.values.len() {
        return Err(Error::InvalidField("fields live on different grids".into()));
    }
    let h = f.grid.spacing();
    let idx = window_indices(f, lo, hi)?;
    Ok((h * idx.into_iter().map(|j| (f.values[j] - g.values[j]).powi(2)).sum::<f64>()).sqrt())
}

/// Sup-norm of `values[j]` restricted to the nodes of `window`.
pub fn windowed_sup(f: &RealField, lo: f64, hi: f64) -> Result<f64> {
    let idx = window_indices(f, lo, hi)?;
    Ok(idx.into_iter().map(|j| f.values[j].abs()).fold(0.0, f64::max))
}

/// Fit of `ln|v_k| ≈ ln C − (μ+1) ln k − δ k`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub mu: f64,
    pub delta: f64,
    pub log_c: f64,
    /// RMS of the residuals in natural-log units.
    pub rms_residual: f64,
    pub points: usize,
    /// Residuals oscillate beyond the threshold: more than one singularity
    /// contributes at comparable distance.
    pub multi_singularity: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct DecayFitOptions {
    pub skip_lowest: usize,
    pub floor: f64,
    pub k_max: Option<f64>,
    pub residual_threshold: f64,
}

impl Default for DecayFitOptions {
    fn default() -> Self {
        DecayFitOptions {
            skip_lowest: 8,
            floor: 1e-13,
            k_max: None,
            residual_threshold: 0.25,
        }
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Least-squares singularity fit on positive wavenumbers. Modes with index
/// below `skip_lowest` or modulus below `floor × max` are excluded.
pub fn fourier_decay_fit(c: &SpectralCoeffs, opts: DecayFitOptions) -> Result<DecayFit> {
    let spectrum = c.positive_spectrum();
    let scale = c.grid.len() as f64;
    let max = spectrum.iter().map(|p| p.1).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = spectrum
        .iter()
        .enumerate()
        .filter(|(m, (k, v))| {
            *m >= opts.skip_lowest
                && *k > 0.0
                && *v > opts.floor * max
                && opts.k_max.is_none_or(|km| *k <= km)
        })
        .map(|(_, &(k, v))| (k, (v / scale).ln()))
        .collect();
    fit_decay_points(&pts, opts.residual_threshold)
}

/// Same model fitted to explicit `(k, ln|v_k|)` samples.
pub fn fit_decay_points(pts: &[(f64, f64)], residual_threshold: f64) -> Result<DecayFit> {
    if pts.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: pts.len(),
        });
    }
    // basis: 1, ln k, k
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(k, y) in pts {
        let row = [1.0, k.ln(), k];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let sol = solve3(ata, atb).ok_or_else(|| Error::InvalidParameter("degenerate decay fit".into()))?;
    let rms = (pts
        .iter()
        .map(|&(k, y)| (y - sol[0] - sol[1] * k.ln() - sol[2] * k).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    Ok(DecayFit {
        mu: -sol[1] - 1.0,
        delta: -sol[2],
        log_c: sol[0],
        rms_residual: rms,
        points: pts.len(),
        multi_singularity: rms > residual_threshold,
    })
}

/// Time series of `max |u|`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LinfHistory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl LinfHistory {
    pub fn from_snapshots<'a>(snaps: impl IntoIterator<Item = (f64, &'a RealField)>) -> Self {
        let mut h = LinfHistory::default();
        for (t, u) in snaps {
            h.times.push(t);
            h.values.push(u.sup_norm());
        }
        h
    }

    /// Samples with `t ≥ t0`.
    pub fn after(&self, t0: f64) -> LinfHistory {
        let mut h = LinfHistory::default();
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if t >= t0 {
                h.times.push(t);
                h.values.push(v);
            }
        }
        h
    }

    pub fn is_flat(&self, tol: f64) -> bool {
        match self.values.first() {
            None => true,
            Some(&v0) => self.values.iter().all(|v| (v - v0).abs() <= tol * v0.abs().max(1.0)),
        }
    }

    /// Growth detector: over each trailing window of `window` samples the
    /// running maximum strictly increases from the first to the last sample.
    pub fn monotone_growth(&self, window: usize) -> bool {
        let w = window.max(2);
        if self.values.len() < w {
            return false;
        }
        let mut running = Vec::with_capacity(self.values.len());
        let mut m = f64::NEG_INFINITY;
        for &v in &self.values {
            m = m.max(v);
            running.push(m);
        }
        running.windows(w).all(|s| s[w - 1] > s[0])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::PeriodicGrid;

    #[test]
    fn exact_power_law() {
        let eps: Vec<f64> = (0..7).map(|i| 10f64.powf(-1.0 - 0.25 * i as f64)).collect();
        let err: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        let f = loglog_fit(&eps, &err).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r - 1.0).abs() < 1e-12);
        assert!(f.sigma < 1e-10);
        let err: Vec<f64> = eps.iter().map(|e| e.powf(2.0 / 7.0)).collect();
        assert!((loglog_fit(&eps, &err).unwrap().slope - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_rejected() {
        let r = loglog_fit(&[0.1, 0.01, 0.001], &[1.0, 0.0, 2.0]);
        assert!(matches!(r, Err(Error::NonPositive { index: 1, .. })));
        assert!(matches!(
            loglog_fit(&[0.1, 0.01], &[1.0, 2.0]),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn windowed_l2_of_a_constant_gap() {
        let g = PeriodicGrid::new(1.0, 64).unwrap();
        let f = g.sample(|x| x);
        let h = g.sample(|x| x + 0.5);
        // 17 nodes in [0, 0.5] at spacing 1/32
        let d = windowed_l2_diff(&f, &h, 0.0, 0.5).unwrap();
        assert!((d - 0.5 * (17.0f64 / 32.0).sqrt()).abs() < 1e-14);
        assert!(windowed_l2_diff(&f, &h, 2.0, 3.0).is_err());
    }

    #[test]
    fn synthetic_decay() {
        let pts: Vec<(f64, f64)> = (10..200)
            .map(|m| {
                let k = 0.125 * m as f64;
                (k, (2.0 * k.powi(-2) * (-0.5 * k).exp()).ln())
            })
            .collect();
        let f = fit_decay_points(&pts, 0.25).unwrap();
        assert!((f.mu - 1.0).abs() < 1e-9);
        assert!((f.delta - 0.5).abs() < 1e-10);
        assert!(!f.multi_singularity);
    }

    #[test]
    fn sech2_strip_width() {
        let g = PeriodicGrid::new(8.0 * std::f64::consts::PI, 1024).unwrap();
        let u = g.sample(|x| 1.0 / x.cosh().powi(2));
        let f = fourier_decay_fit(&u.to_spectral(), DecayFitOptions::default()).unwrap();
        let half = std::f64::consts::FRAC_PI_2;
        assert!((f.delta - half).abs() < 0.05 * half, "delta {}", f.delta);
        assert!((f.mu + 2.0).abs() < 0.1, "mu {}", f.mu);
    }

    #[test]
    fn window_ops() {
        let g = PeriodicGrid::new(4.0, 64).unwrap();
        let f = g.sample(|x| (-(x - 1.0).powi(2) * 4.0).exp());
        let z = RealField::zeros(g);
        assert_eq!(windowed_sup_diff(&f, &f, -1.0, 2.0).unwrap(), 0.0);
        assert!((windowed_sup_diff(&f, &z, 0.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            windowed_sup_diff(&f, &z, 0.01, 0.02),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn growth_detector() {
        let h = LinfHistory {
            times: (0..6).map(|i| i as f64).collect(),
            values: vec![1.0, 1.2, 1.1, 1.5, 1.7, 2.0],
        };
        assert!(h.monotone_growth(3));
        let flat = LinfHistory {
            times: vec![0.0, 1.0, 2.0],
            values: vec![1.0; 3],
        };
        assert!(flat.is_flat(0.0));
        assert!(!flat.monotone_growth(2));
    }
}
