//! Layered spherical geometry and the transport parameters derived from it.
//!
//! A [`LayerStack`] holds `N` finite concentric shells followed by one
//! unbounded exterior layer. Layer indices are zero-based throughout the
//! library: layer `0` contains the origin and layer `N` is the exterior.
//!
//! Units are μm, s and μm²/s everywhere.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One shell of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Radial thickness in μm. `f64::INFINITY` only for the exterior.
    pub width: f64,
    /// Extracellular volume fraction, in (0, 1].
    pub porosity: f64,
    /// First-order degradation rate in 1/s.
    pub degradation_rate: f64,
}

impl Layer {
    pub fn new(width: f64, porosity: f64, degradation_rate: f64) -> Self {
        Layer {
            width,
            porosity,
            degradation_rate,
        }
    }

    /// Free fluid: unit porosity, no degradation, infinite extent.
    pub fn free_exterior() -> Self {
        Layer::new(f64::INFINITY, 1.0, 0.0)
    }

    fn validate(&self, index: usize, exterior: bool) -> Result<()> {
        let fail = |reason: String| Error::InvalidLayer {
            layer: index,
            reason,
        };
        if exterior {
            if self.width != f64::INFINITY {
                return Err(fail("the exterior layer must have infinite width".into()));
            }
        } else if !(self.width.is_finite() && self.width > 0.0) {
            return Err(fail(format!(
                "width must be finite and positive, got {}",
                self.width
            )));
        }
        if !(self.porosity > 0.0 && self.porosity <= 1.0) {
            return Err(fail(format!(
                "porosity must lie in (0, 1], got {}",
                self.porosity
            )));
        }
        if !(self.degradation_rate >= 0.0 && self.degradation_rate.is_finite()) {
            return Err(fail(format!(
                "degradation rate must be finite and non-negative, got {}",
                self.degradation_rate
            )));
        }
        Ok(())
    }
}

/// Tortuosity of a porous layer, `ε^(-1/2)`.
pub fn tortuosity(porosity: f64) -> f64 {
    porosity.powf(-0.5)
}

/// Effective diffusion coefficient `(ε/τ)·D = ε^(3/2)·D`.
pub fn effective_diffusion(porosity: f64, free_diffusion: f64) -> Result<f64> {
    if !(porosity > 0.0 && porosity <= 1.0) {
        return Err(Error::Domain(format!(
            "porosity must lie in (0, 1], got {porosity}"
        )));
    }
    if !(free_diffusion > 0.0 && free_diffusion.is_finite()) {
        return Err(Error::Domain(format!(
            "free diffusion coefficient must be positive, got {free_diffusion}"
        )));
    }
    Ok(porosity / tortuosity(porosity) * free_diffusion)
}

/// Concentration partition ratio `κ = sqrt(D_outer / D_inner)` at a permeable interface.
pub fn jump_constant(d_inner: f64, d_outer: f64) -> Result<f64> {
    if !(d_inner > 0.0 && d_outer > 0.0) {
        return Err(Error::Domain(format!(
            "diffusion coefficients must be positive, got {d_inner} and {d_outer}"
        )));
    }
    Ok((d_outer / d_inner).sqrt())
}

/// Units accepted for the free-fluid diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffusionUnit {
    #[serde(rename = "um2/s")]
    Um2PerS,
    #[serde(rename = "cm2/s")]
    Cm2PerS,
    #[serde(rename = "m2/s")]
    M2PerS,
}

impl DiffusionUnit {
    /// Multiplier that converts a value in this unit to μm²/s.
    pub fn to_um2_per_s(self) -> f64 {
        match self {
            DiffusionUnit::Um2PerS => 1.0,
            DiffusionUnit::Cm2PerS => 1e8,
            DiffusionUnit::M2PerS => 1e12,
        }
    }
}

/// Concentric layers plus the unbounded exterior, with derived transport parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StackSpec", into = "StackSpec")]
pub struct LayerStack {
    layers: Vec<Layer>,
    free_diffusion: f64,
    diffusion: Vec<f64>,
    outer_radius: Vec<f64>,
    jump: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StackSpec {
    layers: Vec<Layer>,
    exterior: ExteriorSpec,
    free_diffusion: f64,
}

/// The exterior has no width field on the wire (JSON cannot carry infinity).
#[derive(Serialize, Deserialize)]
struct ExteriorSpec {
    porosity: f64,
    degradation_rate: f64,
}

impl TryFrom<StackSpec> for LayerStack {
    type Error = Error;
    fn try_from(spec: StackSpec) -> Result<Self> {
        let ext = Layer::new(f64::INFINITY, spec.exterior.porosity, spec.exterior.degradation_rate);
        LayerStack::new(spec.layers, ext, spec.free_diffusion)
    }
}

impl From<LayerStack> for StackSpec {
    fn from(stack: LayerStack) -> Self {
        let mut layers = stack.layers;
        let exterior = layers.pop().expect("stack always has an exterior layer");
        StackSpec {
            layers,
            exterior: ExteriorSpec {
                porosity: exterior.porosity,
                degradation_rate: exterior.degradation_rate,
            },
            free_diffusion: stack.free_diffusion,
        }
    }
}

impl LayerStack {
    /// Builds a stack from finite shells (innermost first) and an exterior layer.
    ///
    /// `free_diffusion` is in μm²/s.
    pub fn new(finite: Vec<Layer>, exterior: Layer, free_diffusion: f64) -> Result<Self> {
        if finite.is_empty() {
            return Err(Error::Domain("a stack needs at least one finite layer".into()));
        }
        for (i, layer) in finite.iter().enumerate() {
            layer.validate(i, false)?;
        }
        exterior.validate(finite.len(), true)?;
        let mut layers = finite;
        layers.push(exterior);

        let diffusion = layers
            .iter()
            .map(|l| effective_diffusion(l.porosity, free_diffusion))
            .collect::<Result<Vec<_>>>()?;
        let mut outer_radius = Vec::with_capacity(layers.len());
        let mut acc = 0.0;
        for layer in &layers {
            acc += layer.width;
            outer_radius.push(acc);
        }
        let jump = diffusion
            .windows(2)
            .map(|w| jump_constant(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(LayerStack {
            layers,
            free_diffusion,
            diffusion,
            outer_radius,
            jump,
        })
    }

    /// Finite shells surrounded by free fluid.
    pub fn with_free_exterior(finite: Vec<Layer>, free_diffusion: f64) -> Result<Self> {
        Self::new(finite, Layer::free_exterior(), free_diffusion)
    }

    /// Three equal-thickness layers of a 275 μm spheroid with porosities
    /// 0.2964, 0.1196 and 0.1697 in free fluid with D = 1e-9 cm²/s.
    pub fn spheroid_fixture() -> Self {
        let w = 275.0 / 3.0;
        Self::with_free_exterior(
            vec![
                Layer::new(w, 0.2964, 0.0),
                Layer::new(w, 0.1196, 0.0),
                Layer::new(w, 0.1697, 0.0),
            ],
            1e-9 * DiffusionUnit::Cm2PerS.to_um2_per_s(),
        )
        .expect("fixture parameters are valid")
    }

    /// Number of finite layers `N`.
    pub fn finite_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Total number of layers including the exterior, `N + 1`.
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Layer {
        &self.layers[i]
    }

    pub fn exterior_index(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn free_diffusion(&self) -> f64 {
        self.free_diffusion
    }

    pub fn diffusion(&self, i: usize) -> f64 {
        self.diffusion[i]
    }

    pub fn diffusions(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn degradation(&self, i: usize) -> f64 {
        self.layers[i].degradation_rate
    }

    pub fn tortuosity(&self, i: usize) -> f64 {
        tortuosity(self.layers[i].porosity)
    }

    /// Inner radius of layer `i` (`R_{i-1}` in 1-based notation; 0 for the core).
    pub fn inner_radius(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.outer_radius[i - 1]
        }
    }

    /// Outer radius of layer `i`; infinite for the exterior.
    pub fn outer_radius(&self, i: usize) -> f64 {
        self.outer_radius[i]
    }

    /// Radii of the `N` interfaces, innermost first.
    pub fn interface_radii(&self) -> &[f64] {
        &self.outer_radius[..self.finite_count()]
    }

    /// Radius of the outermost finite interface.
    pub fn spheroid_radius(&self) -> f64 {
        self.outer_radius[self.finite_count() - 1]
    }

    /// Jump constant across interface `i` (between layers `i` and `i + 1`).
    pub fn jump_constant(&self, i: usize) -> f64 {
        self.jump[i]
    }

    /// Layer containing radius `r`. A radius exactly on an interface belongs
    /// to the outer of the two layers.
    pub fn locate(&self, r: f64) -> usize {
        self.interface_radii().partition_point(|&radius| radius <= r)
    }

    /// Index of the interface that `r` lies on exactly, if any.
    pub fn interface_at(&self, r: f64) -> Option<usize> {
        self.interface_radii().iter().position(|&radius| radius == r)
    }

    /// Copy of the stack with one layer's porosity replaced.
    pub fn with_porosity(&self, layer: usize, porosity: f64) -> Result<Self> {
        if layer >= self.layers.len() {
            return Err(Error::Domain(format!("layer index {layer} out of range")));
        }
        let mut layers = self.layers.clone();
        layers[layer].porosity = porosity;
        let exterior = layers.pop().unwrap();
        Self::new(layers, exterior, self.free_diffusion)
    }

    /// Copy with every degradation rate replaced by `rate`.
    pub fn with_uniform_degradation(&self, rate: f64) -> Result<Self> {
        let mut layers = self.layers.clone();
        for l in &mut layers {
            l.degradation_rate = rate;
        }
        let exterior = layers.pop().unwrap();
        Self::new(layers, exterior, self.free_diffusion)
    }

    /// Copy with all widths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut layers = self.layers.clone();
        let exterior = layers.pop().unwrap();
        for l in &mut layers {
            l.width *= factor;
        }
        Self::new(layers, exterior, self.free_diffusion)
    }

    /// Smallest effective diffusion coefficient among all layers.
    pub fn min_diffusion(&self) -> f64 {
        self.diffusion.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Point in spherical coordinates: radius (μm), polar angle θ and azimuth φ (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spherical {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Spherical {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Spherical { r, theta, phi }
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [self.r * st * cp, self.r * st * sp, self.r * ct]
    }

    pub fn from_cartesian(p: [f64; 3]) -> Self {
        let r = norm(p);
        if r == 0.0 {
            return Spherical::new(0.0, 0.0, 0.0);
        }
        let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
        let mut phi = p[1].atan2(p[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        Spherical::new(r, theta, phi)
    }

    /// Cosine of the angle between the directions of `self` and `other`.
    pub fn cos_angle(&self, other: &Spherical) -> f64 {
        let c = self.theta.cos() * other.theta.cos()
            + self.theta.sin() * other.theta.sin() * (self.phi - other.phi).cos();
        c.clamp(-1.0, 1.0)
    }

    pub fn distance(&self, other: &Spherical) -> f64 {
        let a = self.to_cartesian();
        let b = other.to_cartesian();
        norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }
}

pub(crate) fn norm(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Impulsive point release.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub position: Spherical,
    /// Release time in s.
    #[serde(default)]
    pub emission_time: f64,
    /// Number of molecules released (particle simulation only).
    #[serde(default = "default_molecules")]
    pub molecule_count: u64,
}

fn default_molecules() -> u64 {
    1
}

impl SourceSpec {
    pub fn at(position: Spherical) -> Self {
        SourceSpec {
            position,
            emission_time: 0.0,
            molecule_count: 1,
        }
    }

    /// Checks angle ranges and rejects a source placed exactly on an interface.
    pub fn validate(&self, stack: &LayerStack) -> Result<()> {
        let p = self.position;
        if !(p.r >= 0.0 && p.r.is_finite()) {
            return Err(Error::Domain(format!("source radius must be >= 0, got {}", p.r)));
        }
        if !(0.0..=PI).contains(&p.theta) {
            return Err(Error::Domain(format!(
                "source polar angle must lie in [0, π], got {}",
                p.theta
            )));
        }
        if !(0.0..2.0 * PI).contains(&p.phi) {
            return Err(Error::Domain(format!(
                "source azimuth must lie in [0, 2π), got {}",
                p.phi
            )));
        }
        if !(self.emission_time >= 0.0 && self.emission_time.is_finite()) {
            return Err(Error::Domain(format!(
                "emission time must be >= 0, got {}",
                self.emission_time
            )));
        }
        if self.molecule_count == 0 {
            return Err(Error::Domain("molecule count must be positive".into()));
        }
        if let Some(i) = stack.interface_at(p.r) {
            return Err(Error::SourceOnInterface {
                r0: p.r,
                radius: stack.interface_radii()[i],
                interface: i,
            });
        }
        Ok(())
    }

    /// Layer containing the source.
    pub fn layer(&self, stack: &LayerStack) -> usize {
        stack.locate(self.position.r)
    }
}
