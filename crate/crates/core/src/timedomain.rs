//! Frequency-to-time conversion of Green's function spectra.
//!
//! The inverse transform is the discrete Fourier series
//!
//! ```text
//! c(t_j) = e^{αt_j} / T · Σ_m G(α + iω_m) e^{iω_m t_j},   t_j = jT/N
//! ```
//!
//! with Hermitian completion of the one-sided spectrum. A positive `α`
//! (see [`FrequencyGrid::damping`]) damps the periodic images that a
//! finite window otherwise folds back onto the response.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analytic::{FrequencyGrid, Spectrum};
use crate::error::{Error, Result};

/// Fraction of the window, at its end, inspected by the tail check.
const TAIL_FRACTION: f64 = 0.05;
/// Tail level (relative to the peak) above which the window is flagged.
const TAIL_LIMIT: f64 = 0.01;

/// Real concentration series per released molecule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalCir {
    /// Sample times in s.
    pub times: Vec<f64>,
    /// Concentration in 1/μm³.
    pub values: Vec<f64>,
    pub grid: FrequencyGrid,
    /// Largest imaginary part left by the inverse transform, relative to
    /// the largest magnitude.
    pub imaginary_residual: f64,
    /// Set when the last part of the window still carries more than 1 % of
    /// the peak, i.e. the window is probably too short.
    pub tail_warning: bool,
}

impl TemporalCir {
    /// Linear interpolation at time `t` (clamped to the grid).
    pub fn at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.values, t)
    }
}

/// Linear interpolation on an increasing grid, clamped at the ends.
pub fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let i = times.partition_point(|&x| x <= t) - 1;
    let w = (t - times[i]) / (times[i + 1] - times[i]);
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Inverse transform of a one-sided spectrum on its grid.
pub fn inverse_transform(spectrum: &Spectrum) -> Result<TemporalCir> {
    let grid = spectrum.grid;
    grid.validate()?;
    let n = grid.samples;
    let half = n / 2;
    if spectrum.values.len() != half + 1 {
        return Err(Error::Domain(format!(
            "spectrum has {} bins, grid expects {}",
            spectrum.values.len(),
            half + 1
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = spectrum.values[0];
    for m in 1..half {
        buf[m] = spectrum.values[m];
        buf[n - m] = spectrum.values[m].conj();
    }
    buf[half] = Complex64::new(spectrum.values[half].re, 0.0);

    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);

    let alpha = grid.shift();
    let dt = grid.dt();
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut max_im = 0.0f64;
    let mut max_abs = 0.0f64;
    for (j, v) in buf.iter().enumerate() {
        let t = j as f64 * dt;
        let f = (alpha * t).exp() / grid.window;
        times.push(t);
        values.push(v.re * f);
        max_im = max_im.max((v.im * f).abs());
        max_abs = max_abs.max((v * f).norm());
    }
    let imaginary_residual = if max_abs > 0.0 { max_im / max_abs } else { 0.0 };
    let tail_warning = tail_exceeds(&values);
    Ok(TemporalCir {
        times,
        values,
        grid,
        imaginary_residual,
        tail_warning,
    })
}

fn tail_exceeds(values: &[f64]) -> bool {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return false;
    }
    let start = ((1.0 - TAIL_FRACTION) * values.len() as f64).floor() as usize;
    values[start..].iter().any(|v| v.abs() > TAIL_LIMIT * peak)
}

/// Peak value, peak time and full width at half maximum of a response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakMetrics {
    pub peak: f64,
    pub peak_time: f64,
    /// Full width at half maximum in s.
    pub fwhm: f64,
    /// The half-maximum level was not crossed on one side within the
    /// series; `fwhm` then extends to the end of the data.
    pub fwhm_truncated: bool,
}

/// Peak metrics of a sampled series.
///
/// The peak is the largest sample, refined by a parabola through it and its
/// neighbours when it is interior; the FWHM uses linear interpolation of the
/// half-maximum crossings.
pub fn peak_metrics(times: &[f64], values: &[f64]) -> Result<PeakMetrics> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Degenerate("peak metrics need at least two samples".into()));
    }
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(vmax.is_finite() && vmax > 0.0) || vmax == vmin {
        return Err(Error::Degenerate("response is flat or non-positive".into()));
    }
    let (mut peak, mut peak_time) = (vmax, times[imax]);
    if imax > 0 && imax + 1 < values.len() {
        let (a, b, c) = (values[imax - 1], values[imax], values[imax + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            let shift = 0.5 * (a - c) / denom;
            if shift.abs() <= 1.0 {
                let h = if shift >= 0.0 {
                    times[imax + 1] - times[imax]
                } else {
                    times[imax] - times[imax - 1]
                };
                peak_time = times[imax] + shift * h;
                peak = b - 0.25 * (a - c) * shift;
            }
        }
    }

    let half = 0.5 * vmax;
    let mut truncated = false;
    let mut left = times[0];
    match (0..imax).rev().find(|&i| values[i] < half) {
        Some(i) => {
            let w = (half - values[i]) / (values[i + 1] - values[i]);
            left = times[i] + w * (times[i + 1] - times[i]);
        }
        None => {
            if imax > 0 {
                truncated = true;
            }
        }
    }
    let mut right = *times.last().unwrap();
    match (imax + 1..values.len()).find(|&i| values[i] < half) {
        Some(i) => {
            let w = (values[i - 1] - half) / (values[i - 1] - values[i]);
            right = times[i - 1] + w * (times[i] - times[i - 1]);
        }
        None => truncated = true,
    }
    Ok(PeakMetrics {
        peak,
        peak_time,
        fwhm: right - left,
        fwhm_truncated: truncated,
    })
}

impl TemporalCir {
    pub fn peak_metrics(&self) -> Result<PeakMetrics> {
        peak_metrics(&self.times, &self.values)
    }
}

/// Free-space peak time `d²/(6D)` of the 3-D diffusion kernel.
pub fn free_peak_time(distance: f64, diffusion: f64) -> f64 {
    distance * distance / (6.0 * diffusion)
}

/// Free-space diffusion kernel `exp(-d²/4Dt)/(4πDt)^{3/2}`.
pub fn free_kernel(distance: f64, diffusion: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    (-distance * distance / (4.0 * diffusion * t)).exp()
        / (4.0 * std::f64::consts::PI * diffusion * t).powf(1.5)
}
