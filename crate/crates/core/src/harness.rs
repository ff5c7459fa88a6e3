//! Analytic-versus-particle comparisons and porosity sweeps.
//!
//! A [`Scenario`] bundles a stack, a source, transparent receivers and the
//! settings of both engines. [`run_comparison`] runs both engines on it and
//! reduces the outputs to per-receiver error metrics; [`porosity_sweep`]
//! repeats the engines while one layer's porosity varies and checks how
//! peak metrics and molecule retention are ordered across the sweep.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{spectral_sweep, FrequencyGrid, Probe, DEFAULT_DAMPING};
use crate::error::{Error, Result};
use crate::medium::{LayerStack, SourceSpec, Spherical};
use crate::pbs::{run_scenario, PbsConfig, PbsRun, Receiver};
use crate::specfun::gauss_legendre_on;
use crate::timedomain::{free_peak_time, inverse_transform, peak_metrics, PeakMetrics, TemporalCir};

/// Default analytic window in units of the slowest free-diffusion peak time
/// `d²/(6·D_min)` between source and receiver.
pub const WINDOW_PEAK_TIMES: f64 = 8.0;

/// Half-width of the local quadratic fit used to compare peak times,
/// as a fraction of the analytic FWHM.
pub const PEAK_FIT_FRACTION: f64 = 0.3;

/// Radial Gauss–Legendre nodes per panel for volume integrals.
const VOLUME_NODES: usize = 16;

/// Settings of the frequency-domain engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSettings {
    /// Window `T` in s; `None` picks one per receiver.
    pub window: Option<f64>,
    pub samples: usize,
    pub damping: f64,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        AnalyticSettings {
            window: None,
            samples: 4096,
            damping: DEFAULT_DAMPING,
        }
    }
}

/// Which layer's porosity a sweep varies, and over which values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Zero-based finite layer index.
    pub layer: usize,
    pub porosities: Vec<f64>,
    /// Time at which retention inside the spheroid is compared.
    pub retention_time: Option<f64>,
}

/// Engines to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Pbs,
    Both,
}

impl Engine {
    pub fn analytic(self) -> bool {
        matches!(self, Engine::Analytic | Engine::Both)
    }

    pub fn pbs(self) -> bool {
        matches!(self, Engine::Pbs | Engine::Both)
    }
}

/// Fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub stack: LayerStack,
    pub source: SourceSpec,
    pub receivers: Vec<Receiver>,
    pub analytic: AnalyticSettings,
    pub pbs: PbsConfig,
    pub sweep: Option<SweepSpec>,
}

/// Geometry preset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Full 275 μm spheroid.
    Full,
    /// Lengths shrunk 10×, times 100×.
    Desk,
}

impl Scale {
    /// Factor by which lengths are divided (times by its square).
    fn shrink(self) -> f64 {
        match self {
            Scale::Full => 1.0,
            Scale::Desk => 10.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Scale::Full => "full",
            Scale::Desk => "desk",
        }
    }
}

/// Porosities of the outer-layer sweep; only the first is a measured value.
pub const OUTER_POROSITIES: [f64; 3] = [0.1697, 0.10, 0.05];

impl Scenario {
    /// Three-layer spheroid with the source in layer 1 and one receiver in
    /// each layer plus one outside.
    pub fn internal_source(scale: Scale) -> Self {
        let a = scale.shrink();
        let stack = LayerStack::spheroid_fixture().scaled(1.0 / a).expect("positive scale");
        let at = |r: f64, phi: f64| Spherical::new(r / a, FRAC_PI_2, phi);
        let receivers = vec![
            Receiver::new("layer1", at(45.83, 0.0), 20.0 / a),
            Receiver::new("layer2", at(137.5, 0.0), 40.0 / a),
            Receiver::new("layer3", at(229.2, 0.0), 40.0 / a),
            Receiver::new("outside", at(360.0, 0.0), 80.0 / a),
        ];
        let t = a * a;
        Scenario {
            name: format!("internal-{}", scale.label()),
            stack,
            source: SourceSpec {
                molecule_count: 100_000,
                ..SourceSpec::at(at(45.83, FRAC_PI_2))
            },
            receivers,
            analytic: AnalyticSettings::default(),
            pbs: PbsConfig {
                dt: 2000.0 / t,
                molecules: 100_000,
                seed: 1,
                duration: 8.0e6 / t,
            },
            sweep: Some(SweepSpec {
                layer: 2,
                porosities: OUTER_POROSITIES.to_vec(),
                retention_time: None,
            }),
        }
    }

    /// Source outside the spheroid at 600 μm (60 μm at desk scale).
    pub fn external_source(scale: Scale) -> Self {
        let a = scale.shrink();
        let t = a * a;
        let mut s = Scenario::internal_source(scale);
        s.name = format!("external-{}", scale.label());
        s.source = SourceSpec {
            molecule_count: 50_000,
            ..SourceSpec::at(Spherical::new(600.0 / a, FRAC_PI_2, FRAC_PI_2))
        };
        s.receivers.truncate(1);
        s.analytic.window = Some(4.0e7 / t);
        s.analytic.samples = 2048;
        s.pbs = PbsConfig {
            dt: 5000.0 / t,
            molecules: 50_000,
            seed: 1,
            duration: 5.0e6 / t,
        };
        if let Some(sw) = s.sweep.as_mut() {
            sw.retention_time = Some(4.0e6 / t);
        }
        s
    }

    /// Checks every component and the receiver placement.
    pub fn validate(&self) -> Result<()> {
        self.source.validate(&self.stack)?;
        self.pbs.validate()?;
        FrequencyGrid::new(self.analytic.window.unwrap_or(1.0), self.analytic.samples, self.analytic.damping)?;
        if self.receivers.is_empty() {
            return Err(Error::Domain("at least one receiver is required".into()));
        }
        for r in &self.receivers {
            if !(r.radius > 0.0 && r.radius.is_finite()) {
                return Err(Error::Domain(format!(
                    "receiver `{}` radius must be positive, got {}",
                    r.name, r.radius
                )));
            }
            if r.center.distance(&self.source.position) <= r.radius {
                return Err(Error::Domain(format!(
                    "receiver `{}` contains the source; its ball average would be singular",
                    r.name
                )));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.porosities.is_empty() {
                return Err(Error::Domain("sweep needs at least one porosity".into()));
            }
            if sw.layer >= self.stack.finite_count() {
                return Err(Error::Domain(format!(
                    "sweep layer {} is not a finite layer",
                    sw.layer + 1
                )));
            }
            for &p in &sw.porosities {
                self.stack.with_porosity(sw.layer, p)?;
            }
        }
        Ok(())
    }

    /// Analytic window for receiver `i`.
    pub fn receiver_window(&self, i: usize) -> f64 {
        self.analytic.window.unwrap_or_else(|| {
            let d = self.receivers[i].center.distance(&self.source.position);
            self.source.emission_time + WINDOW_PEAK_TIMES * free_peak_time(d, self.stack.min_diffusion())
        })
    }

    pub fn receiver_grid(&self, i: usize) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.receiver_window(i), self.analytic.samples, self.analytic.damping)
    }

    /// Grid of the retention series: the longest receiver window.
    pub fn retention_grid(&self) -> Result<FrequencyGrid> {
        let w = (0..self.receivers.len())
            .map(|i| self.receiver_window(i))
            .fold(0.0, f64::max);
        FrequencyGrid::new(w, self.analytic.samples, self.analytic.damping)
    }

    /// Same scenario with one layer's porosity replaced.
    pub fn with_porosity(&self, layer: usize, porosity: f64) -> Result<Self> {
        let mut s = self.clone();
        s.stack = self.stack.with_porosity(layer, porosity)?;
        Ok(s)
    }
}

/// 32-point rule for the average over a ball: 4 Gauss–Legendre radii
/// (weight `3u²/ρ³`) times the 8 vertices of the inscribed cube, which
/// integrate spherical harmonics up to degree 3 exactly.
pub fn ball_quadrature(center: Spherical, radius: f64) -> Vec<(Spherical, f64)> {
    let (u, w) = gauss_legendre_on(4, 0.0, radius);
    let c = center.to_cartesian();
    let v = 1.0 / 3f64.sqrt();
    let mut out = Vec::with_capacity(32);
    for (&ui, &wi) in u.iter().zip(&w) {
        let weight = wi * 3.0 * ui * ui / radius.powi(3) / 8.0;
        for sx in [-v, v] {
            for sy in [-v, v] {
                for sz in [-v, v] {
                    let p = [c[0] + ui * sx, c[1] + ui * sy, c[2] + ui * sz];
                    out.push((Spherical::from_cartesian(p), weight));
                }
            }
        }
    }
    out
}

/// Probe whose value is the number of molecules (per released molecule)
/// inside the finite layers: `∫ 4πr² c̄(r) dr` over `[0, R_N]`.
pub fn retention_probe(stack: &LayerStack, source: &SourceSpec) -> Probe {
    let mut breaks = vec![0.0];
    breaks.extend_from_slice(stack.interface_radii());
    let r0 = source.position.r;
    if r0 > 0.0 && r0 < stack.spheroid_radius() {
        breaks.push(r0);
        breaks.sort_by(f64::total_cmp);
    }
    let mut nodes = Vec::new();
    for w in breaks.windows(2) {
        let (x, wx) = gauss_legendre_on(VOLUME_NODES, w[0], w[1]);
        nodes.extend(x.iter().zip(&wx).map(|(&r, &q)| (r, 4.0 * PI * r * r * q)));
    }
    Probe::AngularMean(nodes)
}

/// Outputs of the frequency-domain engine for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRun {
    /// Ball-averaged CIR per receiver.
    pub receivers: Vec<TemporalCir>,
    /// Fraction of released molecules inside the spheroid.
    pub retention: Option<TemporalCir>,
}

/// Runs the analytic engine for every receiver (and optionally the
/// retention integral).
pub fn run_analytic(scenario: &Scenario, retention: bool) -> Result<AnalyticRun> {
    scenario.validate()?;
    let receivers = scenario
        .receivers
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let grid = scenario.receiver_grid(i)?;
            let probe = Probe::Points(ball_quadrature(r.center, r.radius));
            let sp = spectral_sweep(&scenario.stack, &scenario.source, &[probe], &grid)?;
            inverse_transform(&sp[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let retention = if retention {
        let grid = scenario.retention_grid()?;
        let probe = retention_probe(&scenario.stack, &scenario.source);
        let sp = spectral_sweep(&scenario.stack, &scenario.source, &[probe], &grid)?;
        Some(inverse_transform(&sp[0])?)
    } else {
        None
    };
    Ok(AnalyticRun { receivers, retention })
}

/// Runs the particle engine with the scenario's receivers.
pub fn run_pbs(scenario: &Scenario) -> Result<PbsRun> {
    scenario.validate()?;
    run_scenario(&scenario.stack, &scenario.source, &scenario.receivers, &scenario.pbs)
}

/// Peak located by iterated least-squares parabolas over `±half_width`.
///
/// Less sensitive to counting noise than the sample maximum; applied to
/// both engines on the same time grid so that its shape bias cancels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub time: f64,
    pub value: f64,
}

pub fn smoothed_peak(times: &[f64], values: &[f64], half_width: f64) -> Result<PeakEstimate> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Degenerate("peak fit needs at least three samples".into()));
    }
    if !(half_width > 0.0) {
        return Err(Error::Domain(format!("fit half-width must be positive, got {half_width}")));
    }
    // Start from the maximum of a short moving average.
    let box_half = 0.2 * half_width;
    let mut best = (0, f64::NEG_INFINITY);
    let (mut lo, mut hi, mut acc) = (0, 0, 0.0);
    for (i, &t) in times.iter().enumerate() {
        while hi < times.len() && times[hi] <= t + box_half {
            acc += values[hi];
            hi += 1;
        }
        while times[lo] < t - box_half {
            acc -= values[lo];
            lo += 1;
        }
        let mean = acc / (hi - lo) as f64;
        if mean > best.1 {
            best = (i, mean);
        }
    }
    let mut tc = times[best.0];
    let mut value = values[best.0];
    for _ in 0..50 {
        let mut m = nalgebra::Matrix3::<f64>::zeros();
        let mut rhs = nalgebra::Vector3::<f64>::zeros();
        for (&t, &v) in times.iter().zip(values) {
            let x = (t - tc) / half_width;
            if x.abs() > 1.0 {
                continue;
            }
            let b = nalgebra::Vector3::new(1.0, x, x * x);
            m += b * b.transpose();
            rhs += b * v;
        }
        let Some(c) = m.lu().solve(&rhs) else { break };
        if c[2] >= 0.0 {
            break;
        }
        let x = (-c[1] / (2.0 * c[2])).clamp(-1.0, 1.0);
        value = c[0] + c[1] * x + c[2] * x * x;
        let next = (tc + half_width * x).clamp(times[0], times[times.len() - 1]);
        let done = (next - tc).abs() < 1e-6 * half_width;
        tc = next;
        if done {
            break;
        }
    }
    Ok(PeakEstimate { time: tc, value })
}

/// Agreement between the engines at one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverComparison {
    pub receiver: String,
    /// RMS difference on the analytic grid divided by the analytic peak.
    pub nrmse: f64,
    /// Expected NRMSE from binomial counting noise alone.
    pub noise_nrmse: f64,
    pub peak_value_error: f64,
    /// Relative difference of the fitted peak times.
    pub peak_time_error: f64,
    /// Relative difference of the raw sample maxima.
    pub raw_peak_time_error: f64,
    pub analytic_peak: f64,
    pub analytic_peak_time: f64,
    pub pbs_peak: f64,
    pub pbs_peak_time: f64,
}

/// Both engines' outputs plus per-receiver metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub scenario: String,
    pub receivers: Vec<ReceiverComparison>,
    pub analytic: AnalyticRun,
    pub pbs: PbsRun,
}

fn compare_receiver(
    scenario: &Scenario,
    index: usize,
    cir: &TemporalCir,
    run: &PbsRun,
) -> Result<ReceiverComparison> {
    let series = &run.receivers[index];
    let volume = scenario.receivers[index].volume();
    let n = run.molecules as f64;
    let start = run.times[0];
    let end = *run.times.last().expect("runs have at least one sample");
    let pbs_at = |t: f64| {
        if t < start {
            0.0
        } else {
            crate::timedomain::interpolate(&run.times, &series.concentration, t)
        }
    };
    let exact = cir.peak_metrics()?;
    let (mut se, mut noise, mut m) = (0.0, 0.0, 0usize);
    for (&t, &v) in cir.times.iter().zip(&cir.values) {
        if t > end {
            break;
        }
        se += (pbs_at(t) - v).powi(2);
        // binomial variance of the count for the analytic occupation probability
        let p = (v * volume).clamp(0.0, 1.0);
        noise += p * (1.0 - p) / n / (volume * volume);
        m += 1;
    }
    if m == 0 {
        return Err(Error::Degenerate(format!(
            "receiver `{}`: no analytic samples within the simulated duration",
            series.name
        )));
    }
    let nrmse = (se / m as f64).sqrt() / exact.peak;
    let noise_nrmse = (noise / m as f64).sqrt() / exact.peak;

    let raw = match peak_metrics(&run.times, &series.concentration) {
        Ok(m) => m,
        // no molecule reached the receiver: nothing to locate
        Err(Error::Degenerate(_)) => {
            return Ok(ReceiverComparison {
                receiver: series.name.clone(),
                nrmse,
                noise_nrmse,
                peak_value_error: -1.0,
                peak_time_error: f64::NAN,
                raw_peak_time_error: f64::NAN,
                analytic_peak: exact.peak,
                analytic_peak_time: exact.peak_time,
                pbs_peak: 0.0,
                pbs_peak_time: f64::NAN,
            })
        }
        Err(e) => return Err(e),
    };
    let h = PEAK_FIT_FRACTION * exact.fwhm;
    let analytic_on: Vec<f64> = run.times.iter().map(|&t| cir.at(t)).collect();
    let fit_a = smoothed_peak(&run.times, &analytic_on, h)?;
    let fit_p = smoothed_peak(&run.times, &series.concentration, h)?;
    let since = |t: f64| t - scenario.source.emission_time;
    Ok(ReceiverComparison {
        receiver: series.name.clone(),
        nrmse,
        noise_nrmse,
        peak_value_error: (fit_p.value - exact.peak) / exact.peak,
        peak_time_error: (since(fit_p.time) - since(fit_a.time)).abs() / since(fit_a.time),
        raw_peak_time_error: (since(raw.peak_time) - since(exact.peak_time)).abs() / since(exact.peak_time),
        analytic_peak: exact.peak,
        analytic_peak_time: exact.peak_time,
        pbs_peak: fit_p.value,
        pbs_peak_time: fit_p.time,
    })
}

/// Per-receiver metrics for engine outputs that belong to `scenario`.
pub fn compare(scenario: &Scenario, analytic: &AnalyticRun, pbs: &PbsRun) -> Result<Vec<ReceiverComparison>> {
    if analytic.receivers.len() != scenario.receivers.len() || pbs.receivers.len() != scenario.receivers.len() {
        return Err(Error::Domain("engine outputs do not match the scenario's receivers".into()));
    }
    analytic
        .receivers
        .iter()
        .enumerate()
        .map(|(i, cir)| compare_receiver(scenario, i, cir, pbs))
        .collect()
}

/// Runs both engines on the same scenario and compares them per receiver.
pub fn run_comparison(scenario: &Scenario) -> Result<ComparisonReport> {
    scenario.validate()?;
    let analytic = run_analytic(scenario, true)?;
    let pbs = run_pbs(scenario)?;
    let receivers = compare(scenario, &analytic, &pbs)?;
    Ok(ComparisonReport {
        scenario: scenario.name.clone(),
        receivers,
        analytic,
        pbs,
    })
}

/// Peak metrics of one receiver at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPeak {
    pub peak: f64,
    pub peak_time: f64,
}

/// One porosity value of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub porosity: f64,
    pub scenario: Scenario,
    pub analytic: Option<AnalyticRun>,
    pub pbs: Option<PbsRun>,
    pub analytic_peaks: Vec<SweepPeak>,
    pub pbs_peaks: Vec<SweepPeak>,
    /// Fraction of molecules inside the spheroid at the retention time.
    pub analytic_retention: Option<f64>,
    pub pbs_retention: Option<f64>,
}

/// Monotonicity of one quantity as the swept porosity decreases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

/// Ordering of one quantity across the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ordering {
    pub engine: Engine,
    /// Receiver name, or `spheroid` for retention.
    pub target: String,
    pub quantity: String,
    /// Porosities in decreasing order.
    pub porosities: Vec<f64>,
    pub values: Vec<f64>,
    pub trend: Trend,
}

/// Strict trend of `values` (listed by decreasing porosity).
pub fn trend(values: &[f64]) -> Trend {
    if values.len() < 2 {
        return Trend::Constant;
    }
    let pairs: Vec<_> = values.windows(2).collect();
    if pairs.iter().all(|w| w[1] > w[0]) {
        Trend::Increasing
    } else if pairs.iter().all(|w| w[1] < w[0]) {
        Trend::Decreasing
    } else if pairs.iter().all(|w| w[1] == w[0]) {
        Trend::Constant
    } else {
        Trend::Mixed
    }
}

/// Result of [`porosity_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub layer: usize,
    /// Points in the order the porosities were given.
    pub points: Vec<SweepPoint>,
    pub orderings: Vec<Ordering>,
    pub retention_time: f64,
}

/// Fitted peak of a particle series; NaN when the receiver saw nothing.
fn pbs_peak(times: &[f64], values: &[f64], fwhm_hint: Option<f64>) -> Result<SweepPeak> {
    let raw = match peak_metrics(times, values) {
        Ok(m) => m,
        Err(Error::Degenerate(_)) => {
            return Ok(SweepPeak {
                peak: f64::NAN,
                peak_time: f64::NAN,
            })
        }
        Err(e) => return Err(e),
    };
    let width = fwhm_hint.unwrap_or(raw.fwhm);
    let p = smoothed_peak(times, values, PEAK_FIT_FRACTION * width)?;
    Ok(SweepPeak {
        peak: p.value,
        peak_time: p.time,
    })
}

fn run_point(base: &Scenario, layer: usize, porosity: f64, engine: Engine, retention_time: f64) -> Result<SweepPoint> {
    let scenario = base.with_porosity(layer, porosity)?;
    let analytic = if engine.analytic() {
        Some(run_analytic(&scenario, true)?)
    } else {
        None
    };
    let pbs = if engine.pbs() { Some(run_pbs(&scenario)?) } else { None };
    let exact: Option<Vec<PeakMetrics>> = analytic
        .as_ref()
        .map(|a| a.receivers.iter().map(|c| c.peak_metrics()).collect::<Result<_>>())
        .transpose()?;
    let analytic_peaks = exact
        .iter()
        .flatten()
        .map(|m| SweepPeak {
            peak: m.peak,
            peak_time: m.peak_time,
        })
        .collect();
    let pbs_peaks = match &pbs {
        Some(run) => run
            .receivers
            .iter()
            .enumerate()
            .map(|(i, s)| pbs_peak(&run.times, &s.concentration, exact.as_ref().map(|e| e[i].fwhm)))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let analytic_retention = analytic
        .as_ref()
        .and_then(|a| a.retention.as_ref())
        .map(|c| c.at(retention_time));
    let pbs_retention = pbs.as_ref().map(|run| {
        let inside: Vec<f64> = run.inside.iter().map(|&c| c as f64 / run.molecules as f64).collect();
        crate::timedomain::interpolate(&run.times, &inside, retention_time)
    });
    Ok(SweepPoint {
        porosity,
        scenario,
        analytic,
        pbs,
        analytic_peaks,
        pbs_peaks,
        analytic_retention,
        pbs_retention,
    })
}

/// Runs the selected engines for each porosity of `layer` (zero-based).
///
/// Points run in parallel; each engine is deterministic, so the result
/// does not depend on scheduling.
pub fn porosity_sweep(
    base: &Scenario,
    layer: usize,
    porosities: &[f64],
    engine: Engine,
    retention_time: Option<f64>,
) -> Result<SweepResult> {
    base.validate()?;
    if porosities.is_empty() {
        return Err(Error::Domain("sweep needs at least one porosity".into()));
    }
    if layer >= base.stack.finite_count() {
        return Err(Error::Domain(format!("sweep layer {} is not a finite layer", layer + 1)));
    }
    for &p in porosities {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidLayer {
                layer,
                reason: format!("swept porosity must lie in (0, 1], got {p}"),
            });
        }
    }
    let retention_time = retention_time.unwrap_or(0.5 * base.pbs.duration) + base.source.emission_time;
    let points = porosities
        .par_iter()
        .map(|&p| run_point(base, layer, p, engine, retention_time))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].porosity.total_cmp(&points[a].porosity));
    let porosity_order: Vec<f64> = order.iter().map(|&i| points[i].porosity).collect();
    let mut orderings = Vec::new();
    let mut push = |engine: Engine, target: &str, quantity: &str, values: Vec<f64>| {
        orderings.push(Ordering {
            engine,
            target: target.to_string(),
            quantity: quantity.to_string(),
            porosities: porosity_order.clone(),
            trend: trend(&values),
            values,
        });
    };
    for (k, r) in base.receivers.iter().enumerate() {
        for (eng, peaks) in [
            (Engine::Analytic, engine.analytic()),
            (Engine::Pbs, engine.pbs()),
        ]
        .into_iter()
        .filter(|(_, on)| *on)
        .map(|(e, _)| {
            (
                e,
                order
                    .iter()
                    .map(|&i| match e {
                        Engine::Analytic => points[i].analytic_peaks[k],
                        _ => points[i].pbs_peaks[k],
                    })
                    .collect::<Vec<_>>(),
            )
        }) {
            push(eng, &r.name, "peak_time", peaks.iter().map(|p| p.peak_time).collect());
            push(eng, &r.name, "peak_value", peaks.iter().map(|p| p.peak).collect());
        }
    }
    if engine.analytic() {
        push(
            Engine::Analytic,
            "spheroid",
            "retention",
            order.iter().map(|&i| points[i].analytic_retention.unwrap_or(f64::NAN)).collect(),
        );
    }
    if engine.pbs() {
        push(
            Engine::Pbs,
            "spheroid",
            "retention",
            order.iter().map(|&i| points[i].pbs_retention.unwrap_or(f64::NAN)).collect(),
        );
    }
    Ok(SweepResult {
        layer,
        points,
        orderings,
        retention_time,
    })
}

impl SweepResult {
    pub fn ordering(&self, engine: Engine, target: &str, quantity: &str) -> Option<&Ordering> {
        self.orderings
            .iter()
            .find(|o| o.engine == engine && o.target == target && o.quantity == quantity)
    }
}
