//! Batched evaluation over a uniform frequency grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::series::{GreensFunction, SeriesControl};
use crate::error::{Error, Result};
use crate::medium::{LayerStack, SourceSpec, Spherical};

/// Relative size of the absolute convergence floor used during sweeps,
/// measured against each probe's value at the lowest grid frequency.
const FLOOR_FRACTION: f64 = 1e-13;

/// Default `α·T`: images are suppressed by `e^{-10}` while round-off is
/// amplified by at most `e^{10}` at the end of the window.
pub const DEFAULT_DAMPING: f64 = 10.0;

/// Uniform one-sided grid `s_m = α + i·2πm/T`, `m = 0 ..= samples/2`.
///
/// `damping` is the dimensionless product `α·T`. A positive damping
/// evaluates the spectrum slightly off the Fourier axis so that the
/// periodic images introduced by the discrete inverse transform are
/// suppressed by `e^{-αT}`; the inverse transform multiplies by `e^{αt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    /// Window length `T` in s.
    pub window: f64,
    /// Number of time samples `N_t` (even).
    pub samples: usize,
    /// `α·T`, dimensionless.
    pub damping: f64,
}

impl FrequencyGrid {
    pub fn new(window: f64, samples: usize, damping: f64) -> Result<Self> {
        let g = FrequencyGrid {
            window,
            samples,
            damping,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::Domain(format!("window must be positive, got {}", self.window)));
        }
        if self.samples < 8 || self.samples % 2 != 0 {
            return Err(Error::Domain(format!(
                "sample count must be even and at least 8, got {}",
                self.samples
            )));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::Domain(format!("damping must be >= 0, got {}", self.damping)));
        }
        Ok(())
    }

    /// Real shift `α` in 1/s.
    pub fn shift(&self) -> f64 {
        self.damping / self.window
    }

    /// Number of one-sided bins, `samples/2 + 1`.
    pub fn bins(&self) -> usize {
        self.samples / 2 + 1
    }

    pub fn omega(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.window
    }

    pub fn laplace(&self, m: usize) -> Complex64 {
        Complex64::new(self.shift(), self.omega(m))
    }

    pub fn dt(&self) -> f64 {
        self.window / self.samples as f64
    }
}

/// What a spectrum is evaluated for.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    /// Weighted sum `Σ w·G(x)` over observation points (a single point,
    /// or a quadrature rule over a receiver volume).
    Points(Vec<(Spherical, f64)>),
    /// Weighted sum `Σ w·c̄(r)` of the angular mean `c̄(r) = t_0(r)/(4π)`;
    /// with weights `4πr²·w_GL` this integrates the field over a shell.
    AngularMean(Vec<(f64, f64)>),
}

impl Probe {
    pub fn point(x: Spherical) -> Self {
        Probe::Points(vec![(x, 1.0)])
    }
}

/// One frequency-domain value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSample {
    pub omega: f64,
    /// Laplace variable at which the value was computed.
    pub s: Complex64,
    pub value: Complex64,
}

/// One-sided spectrum of one probe on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: FrequencyGrid,
    /// Values for `m = 0 ..= samples/2`, emission phase included.
    pub values: Vec<Complex64>,
}

impl Spectrum {
    pub fn samples(&self) -> Vec<SpectralSample> {
        self.values
            .iter()
            .enumerate()
            .map(|(m, &value)| SpectralSample {
                omega: self.grid.omega(m),
                s: self.grid.laplace(m),
                value,
            })
            .collect()
    }

    /// Two-sided samples for `m = -(N/2 - 1) ..= N/2`, negative
    /// frequencies filled by conjugation.
    pub fn hermitian_extension(&self) -> Vec<SpectralSample> {
        let one = self.samples();
        let half = self.grid.samples / 2;
        let mut out = Vec::with_capacity(self.grid.samples);
        for m in (1..half).rev() {
            let p = one[m];
            out.push(SpectralSample {
                omega: -p.omega,
                s: p.s.conj(),
                value: p.value.conj(),
            });
        }
        out.extend(one);
        out
    }

    pub fn scaled(&self, a: f64) -> Spectrum {
        Spectrum {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }
}

/// Whether `s = 0` leaves some layer without a decay rate.
fn dc_degenerate(stack: &LayerStack) -> bool {
    (0..stack.layer_count()).any(|i| stack.degradation(i) == 0.0)
}

fn evaluate_probe(g: &mut GreensFunction, probe: &Probe, floor: f64) -> Result<Complex64> {
    let control = SeriesControl {
        abs_floor: floor,
        ..SeriesControl::default()
    };
    g.set_control(control);
    match probe {
        Probe::Points(points) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, w) in points {
                acc += g.evaluate(x)? * *w;
            }
            Ok(acc)
        }
        Probe::AngularMean(nodes) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(r, w) in nodes {
                acc += g.radial(0, r)?.0 * (w / (4.0 * PI));
            }
            Ok(acc)
        }
    }
}

fn check_inputs(stack: &LayerStack, source: &SourceSpec, probes: &[Probe], grid: &FrequencyGrid) -> Result<()> {
    source.validate(stack)?;
    grid.validate()?;
    for probe in probes {
        if let Probe::Points(points) = probe {
            for (x, _) in points {
                if x.distance(&source.position) <= 1e-12 * x.r.max(source.position.r).max(1.0) {
                    return Err(Error::ObservationAtSource);
                }
            }
        }
    }
    Ok(())
}

/// First bin evaluated directly; bin 0 may be extrapolated.
fn first_direct_bin(stack: &LayerStack, grid: &FrequencyGrid) -> usize {
    if grid.shift() == 0.0 && dc_degenerate(stack) {
        1
    } else {
        0
    }
}

fn probe_floors(
    stack: &LayerStack,
    source: &SourceSpec,
    probes: &[Probe],
    grid: &FrequencyGrid,
) -> Result<Vec<f64>> {
    let m0 = first_direct_bin(stack, grid);
    let mut g = GreensFunction::new(stack, source.position, grid.laplace(m0))?;
    probes
        .iter()
        .map(|p| Ok(FLOOR_FRACTION * evaluate_probe(&mut g, p, 0.0)?.norm()))
        .collect()
}

fn finish(
    stack: &LayerStack,
    source: &SourceSpec,
    grid: &FrequencyGrid,
    mut columns: Vec<Vec<Complex64>>,
    probes: usize,
) -> Vec<Spectrum> {
    let m0 = first_direct_bin(stack, grid);
    let mut out = Vec::with_capacity(probes);
    for j in 0..probes {
        let mut values: Vec<Complex64> = Vec::with_capacity(grid.bins());
        if m0 == 1 {
            values.push(Complex64::new(0.0, 0.0));
        }
        for col in columns.iter_mut() {
            values.push(col[j]);
        }
        if m0 == 1 {
            // Quadratic extrapolation through the three lowest frequencies.
            // The transform of a real response is real at zero frequency.
            let dc = 3.0 * values[1] - 3.0 * values[2] + values[3];
            values[0] = Complex64::new(dc.re, 0.0);
        }
        for (m, v) in values.iter_mut().enumerate() {
            *v *= (-grid.laplace(m) * source.emission_time).exp();
        }
        out.push(Spectrum { grid: *grid, values });
    }
    out
}

/// Spectra of every probe over `grid`.
///
/// Frequencies are processed in parallel; at each frequency one
/// [`GreensFunction`] (and therefore one radial solve per order) is shared
/// by all probes. Results do not depend on the number of worker threads.
pub fn spectral_sweep(
    stack: &LayerStack,
    source: &SourceSpec,
    probes: &[Probe],
    grid: &FrequencyGrid,
) -> Result<Vec<Spectrum>> {
    check_inputs(stack, source, probes, grid)?;
    let floors = probe_floors(stack, source, probes, grid)?;
    let m0 = first_direct_bin(stack, grid);
    let columns = (m0..grid.bins())
        .into_par_iter()
        .map(|m| {
            let mut g = GreensFunction::new(stack, source.position, grid.laplace(m))?;
            probes
                .iter()
                .zip(&floors)
                .map(|(p, &f)| evaluate_probe(&mut g, p, f))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(stack, source, grid, columns, probes.len()))
}

/// Same as [`spectral_sweep`] but solving the radial systems afresh for
/// every probe; used to check that sharing solutions changes nothing.
pub fn spectral_sweep_uncached(
    stack: &LayerStack,
    source: &SourceSpec,
    probes: &[Probe],
    grid: &FrequencyGrid,
) -> Result<Vec<Spectrum>> {
    check_inputs(stack, source, probes, grid)?;
    let floors = probe_floors(stack, source, probes, grid)?;
    let m0 = first_direct_bin(stack, grid);
    let columns = (m0..grid.bins())
        .map(|m| {
            probes
                .iter()
                .zip(&floors)
                .map(|(p, &f)| {
                    let mut g = GreensFunction::new(stack, source.position, grid.laplace(m))?;
                    evaluate_probe(&mut g, p, f)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(stack, source, grid, columns, probes.len()))
}
