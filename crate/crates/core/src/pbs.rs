//! Particle-based Brownian simulation of the layered sphere.
//!
//! Every molecule takes Gaussian steps with the diffusion coefficient of
//! its current layer. When a step crosses an interface the remainder of
//! the step beyond the crossing is scaled by `sqrt(D_new / D_old)`, as
//! many times as the step crosses interfaces. Degradation is a per-step
//! survival test with probability `exp(-k·Δt)` using the layer where the
//! step ends. Receivers are transparent counting spheres.
//!
//! Each particle owns its own random stream (ChaCha8 keyed by the seed,
//! stream = particle index) and all reductions are integer counts, so a
//! run is reproducible bit for bit regardless of the number of threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{norm, LayerStack, SourceSpec, Spherical};

/// Maximum number of interface crossings allowed within one step.
pub const MAX_CROSSINGS: usize = 64;
/// Distance by which a particle is moved past an interface it just crossed.
pub const INTERFACE_NUDGE: f64 = 1e-12;

/// Particles simulated per work unit; fixed so that results never depend
/// on how work is split between threads.
const CHUNK: usize = 512;

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbsConfig {
    /// Time step in s.
    pub dt: f64,
    pub molecules: u64,
    pub seed: u64,
    /// Simulated time after emission, in s.
    pub duration: f64,
}

impl PbsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {}", self.dt)));
        }
        if self.molecules == 0 {
            return Err(Error::Domain("molecule count must be at least 1".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Degenerate(format!(
                "simulation duration must be positive, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).ceil() as usize
    }
}

/// Transparent spherical receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub name: String,
    pub center: Spherical,
    /// Radius in μm.
    pub radius: f64,
}

impl Receiver {
    pub fn new(name: impl Into<String>, center: Spherical, radius: f64) -> Self {
        Receiver {
            name: name.into(),
            center,
            radius,
        }
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    fn contains(&self, c: &[f64; 3], p: &[f64; 3]) -> bool {
        let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
        d2 <= self.radius * self.radius
    }
}

/// Gaussian displacement with variance `2·D·Δt` per Cartesian axis.
pub fn brownian_step<R: Rng + ?Sized>(diffusion: f64, dt: f64, rng: &mut R) -> [f64; 3] {
    let s = (2.0 * diffusion * dt).sqrt();
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    [s * x, s * y, s * z]
}

/// Smallest `t` in `(0, 1]` at which `p + t·v` meets the sphere of radius
/// `radius`, leaving the current layer; `inward` selects the inner sphere.
fn crossing(p: &[f64; 3], v: &[f64; 3], radius: f64, inward: bool) -> Option<f64> {
    let a = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * (p[0] * v[0] + p[1] * v[1] + p[2] * v[2]);
    let c = p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if inward {
        if b >= 0.0 {
            return None;
        }
        // already on (or, by rounding, just inside) the inner sphere
        if c <= 0.0 {
            return Some(0.0);
        }
        // enter only on a genuine, non-tangent crossing
        if disc <= 0.0 {
            return None;
        }
        // numerically stable smaller root
        let t = c / (-0.5 * (b - disc.sqrt()));
        (t <= 1.0).then_some(t)
    } else {
        if c >= 0.0 {
            // on (or just beyond) the outer sphere
            return (b >= 0.0).then_some(0.0);
        }
        let disc = disc.max(0.0);
        // larger root of a·t² + b·t + c with c < 0
        let t = if b >= 0.0 {
            c / (-0.5 * (b + disc.sqrt()))
        } else {
            (-0.5 * (b - disc.sqrt())) / a
        };
        (t <= 1.0).then_some(t)
    }
}

/// Moves a particle from `start` (in `layer`) by `displacement`, scaling
/// the remaining part of the step by `sqrt(D_new/D_old)` at every interface
/// crossing. Returns the end position and its layer.
pub fn propagate_with_interfaces(
    stack: &LayerStack,
    start: [f64; 3],
    layer: usize,
    displacement: [f64; 3],
) -> Result<([f64; 3], usize)> {
    let mut p = start;
    let mut v = displacement;
    let mut layer = layer;
    let mut crossings = 0;
    loop {
        let outer = stack.outer_radius(layer);
        let inner = stack.inner_radius(layer);
        let t_out = if outer.is_finite() { crossing(&p, &v, outer, false) } else { None };
        let t_in = if layer > 0 { crossing(&p, &v, inner, true) } else { None };
        let (t, next) = match (t_in, t_out) {
            (Some(a), Some(b)) if a <= b => (a, layer - 1),
            (Some(a), None) => (a, layer - 1),
            (_, Some(b)) => (b, layer + 1),
            (None, None) => {
                let end = [p[0] + v[0], p[1] + v[1], p[2] + v[2]];
                return Ok((end, layer));
            }
        };
        crossings += 1;
        if crossings > MAX_CROSSINGS {
            return Err(Error::TooManyCrossings(crossings));
        }
        let hit = [p[0] + t * v[0], p[1] + t * v[1], p[2] + t * v[2]];
        let f = (1.0 - t) * (stack.diffusion(next) / stack.diffusion(layer)).sqrt();
        v = [v[0] * f, v[1] * f, v[2] * f];
        let len = norm(v);
        p = if len > 0.0 {
            let e = INTERFACE_NUDGE / len;
            [hit[0] + e * v[0], hit[1] + e * v[1], hit[2] + e * v[2]]
        } else {
            hit
        };
        layer = next;
        // A particle left exactly on an interface after a zero-length
        // remainder belongs to the layer that `locate` assigns.
        if len == 0.0 {
            return Ok((p, stack.locate(norm(p))));
        }
    }
}

/// Per-layer probabilities of dying within one step, `1 - exp(-k·Δt)`.
fn death_probabilities(stack: &LayerStack, dt: f64) -> Vec<f64> {
    (0..stack.layer_count())
        .map(|i| 1.0 - (-stack.degradation(i) * dt).exp())
        .collect()
}

/// One molecule with its private random stream.
#[derive(Debug, Clone)]
struct Particle {
    pos: [f64; 3],
    layer: usize,
    alive: bool,
    rng: ChaCha8Rng,
}

impl Particle {
    fn new(seed: u64, index: u64, pos: [f64; 3], layer: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Particle {
            pos,
            layer,
            alive: true,
            rng,
        }
    }

    fn step(&mut self, stack: &LayerStack, dt: f64, death: &[f64]) -> Result<()> {
        if !self.alive {
            return Ok(());
        }
        let disp = brownian_step(stack.diffusion(self.layer), dt, &mut self.rng);
        let (pos, layer) = propagate_with_interfaces(stack, self.pos, self.layer, disp)?;
        self.pos = pos;
        self.layer = layer;
        self.degrade(death);
        Ok(())
    }

    fn degrade(&mut self, death: &[f64]) {
        let q = death[self.layer];
        if q > 0.0 && self.rng.gen::<f64>() < q {
            self.alive = false;
        }
    }
}

/// Positions, alive flags and random streams of all molecules.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: Vec<Particle>,
    elapsed: f64,
}

impl ParticleEnsemble {
    /// `count` molecules at `origin`, streams derived from `seed`.
    pub fn new(stack: &LayerStack, origin: Spherical, count: usize, seed: u64) -> Self {
        let pos = origin.to_cartesian();
        let layer = stack.locate(origin.r);
        ParticleEnsemble {
            particles: (0..count).map(|i| Particle::new(seed, i as u64, pos, layer)).collect(),
            elapsed: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn positions(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.particles.iter().map(|p| p.pos)
    }

    pub fn alive_count(&self) -> usize {
        self.particles.iter().filter(|p| p.alive).count()
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.particles[i].alive
    }

    /// Places particle `i` (used to build controlled test ensembles).
    pub fn set_position(&mut self, stack: &LayerStack, i: usize, pos: [f64; 3]) {
        self.particles[i].pos = pos;
        self.particles[i].layer = stack.locate(norm(pos));
    }

    /// Moves every live molecule by one Brownian step, then degrades.
    pub fn step(&mut self, stack: &LayerStack, dt: f64) -> Result<()> {
        let death = death_probabilities(stack, dt);
        self.particles
            .par_iter_mut()
            .try_for_each(|p| p.step(stack, dt, &death))?;
        self.elapsed += dt;
        Ok(())
    }

    /// Survival test alone, using each molecule's current layer.
    pub fn apply_degradation(&mut self, stack: &LayerStack, dt: f64) {
        let death = death_probabilities(stack, dt);
        self.particles.par_iter_mut().for_each(|p| {
            if p.alive {
                p.degrade(&death)
            }
        });
    }

    /// Live molecules within `radius` of `center` (boundary inclusive).
    pub fn count_within(&self, center: &Spherical, radius: f64) -> u64 {
        let r = Receiver::new("", *center, radius);
        let c = center.to_cartesian();
        self.particles
            .iter()
            .filter(|p| p.alive && r.contains(&c, &p.pos))
            .count() as u64
    }
}

/// Normalised receiver concentration: count / (volume · N_total), in 1/μm³.
pub fn count_receiver(ensemble: &ParticleEnsemble, center: &Spherical, radius: f64, total: u64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("receiver radius must be positive, got {radius}")));
    }
    if total == 0 {
        return Err(Error::Domain("total molecule count must be positive".into()));
    }
    let n = ensemble.count_within(center, radius);
    Ok(n as f64 / (4.0 / 3.0 * PI * radius.powi(3) * total as f64))
}

/// Counts and normalised concentration at one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverSeries {
    pub name: String,
    pub radius: f64,
    pub counts: Vec<u64>,
    /// count / (volume · N), 1/μm³.
    pub concentration: Vec<f64>,
}

/// Output of [`run_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbsRun {
    /// Sample times in s: emission time plus multiples of `dt`.
    pub times: Vec<f64>,
    pub receivers: Vec<ReceiverSeries>,
    /// Live molecules with `|x| <= R_N` (inside the finite layers).
    pub inside: Vec<u64>,
    /// Live molecules with `|x| > R_N`.
    pub outside: Vec<u64>,
    pub dead: Vec<u64>,
    pub molecules: u64,
}

impl PbsRun {
    pub fn alive(&self) -> Vec<u64> {
        self.inside.iter().zip(&self.outside).map(|(a, b)| a + b).collect()
    }
}

/// Simulates `config.molecules` molecules released at the source and
/// records receiver and population counts after every step.
pub fn run_scenario(
    stack: &LayerStack,
    source: &SourceSpec,
    receivers: &[Receiver],
    config: &PbsConfig,
) -> Result<PbsRun> {
    config.validate()?;
    source.validate(stack)?;
    for r in receivers {
        if !(r.radius > 0.0 && r.radius.is_finite()) {
            return Err(Error::Domain(format!(
                "receiver `{}` radius must be positive, got {}",
                r.name, r.radius
            )));
        }
    }
    let steps = config.steps();
    let samples = steps + 1;
    let n_rec = receivers.len();
    // per sample: receivers..., inside, outside, dead
    let width = n_rec + 3;
    let centers: Vec<[f64; 3]> = receivers.iter().map(|r| r.center.to_cartesian()).collect();
    let death = death_probabilities(stack, config.dt);
    let spheroid = stack.spheroid_radius();
    let start = source.position.to_cartesian();
    let start_layer = source.layer(stack);
    let total = config.molecules;
    let chunks = total.div_ceil(CHUNK as u64);

    let tally = |chunk: u64| -> Result<Vec<u32>> {
        let mut counts = vec![0u32; samples * width];
        let lo = chunk * CHUNK as u64;
        let hi = (lo + CHUNK as u64).min(total);
        for index in lo..hi {
            let mut p = Particle::new(config.seed, index, start, start_layer);
            for j in 0..samples {
                if j > 0 {
                    p.step(stack, config.dt, &death)?;
                }
                let row = &mut counts[j * width..(j + 1) * width];
                if !p.alive {
                    row[n_rec + 2] += 1;
                    // dead particles never move again
                    for later in j + 1..samples {
                        counts[later * width + n_rec + 2] += 1;
                    }
                    break;
                }
                for (k, r) in receivers.iter().enumerate() {
                    if r.contains(&centers[k], &p.pos) {
                        row[k] += 1;
                    }
                }
                if norm(p.pos) <= spheroid {
                    row[n_rec] += 1;
                } else {
                    row[n_rec + 1] += 1;
                }
            }
        }
        Ok(counts)
    };

    let totals = (0..chunks)
        .into_par_iter()
        .map(tally)
        .try_reduce(
            || vec![0u32; samples * width],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;

    let column = |c: usize| -> Vec<u64> { (0..samples).map(|j| totals[j * width + c] as u64).collect() };
    let times = (0..samples)
        .map(|j| source.emission_time + j as f64 * config.dt)
        .collect();
    let series = receivers
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let counts = column(k);
            let norm = r.volume() * total as f64;
            ReceiverSeries {
                name: r.name.clone(),
                radius: r.radius,
                concentration: counts.iter().map(|&c| c as f64 / norm).collect(),
                counts,
            }
        })
        .collect();
    Ok(PbsRun {
        times,
        receivers: series,
        inside: column(n_rec),
        outside: column(n_rec + 1),
        dead: column(n_rec + 2),
        molecules: total,
    })
}
