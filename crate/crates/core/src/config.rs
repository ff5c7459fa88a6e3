//! Scenario files.
//!
//! Scenarios are TOML documents with a `schema_version`; see
//! `docs/scenario-format.md` for the full schema. Indices in diagnostics
//! are one-based, matching the layer numbering users see.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::harness::{AnalyticSettings, Scenario, SweepSpec};
use crate::medium::{DiffusionUnit, Layer, LayerStack, SourceSpec, Spherical};
use crate::pbs::{PbsConfig, Receiver};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub medium: MediumSection,
    pub source: SourceSection,
    pub receivers: Vec<ReceiverSection>,
    #[serde(default)]
    pub analytic: AnalyticSection,
    pub pbs: PbsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity {
    pub value: f64,
    pub unit: DiffusionUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub free_diffusion: Quantity,
    pub layers: Vec<LayerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior: Option<ExteriorSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    /// μm
    pub width: f64,
    pub porosity: f64,
    /// 1/s
    #[serde(default)]
    pub degradation_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorSection {
    pub porosity: f64,
    #[serde(default)]
    pub degradation_rate: f64,
}

/// Spherical position; angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    #[serde(default)]
    pub emission_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    pub name: String,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
}

fn default_samples() -> usize {
    AnalyticSettings::default().samples
}

fn default_damping() -> f64 {
    AnalyticSettings::default().damping
}

impl Default for AnalyticSection {
    fn default() -> Self {
        AnalyticSection {
            window: None,
            samples: default_samples(),
            damping: default_damping(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PbsSection {
    pub dt: f64,
    pub molecules: u64,
    #[serde(default)]
    pub seed: u64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// One-based layer number.
    pub layer: usize,
    pub porosities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention_time: Option<f64>,
}

struct Checker {
    found: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.found.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.fail(path, format!("must be finite and positive, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.fail(path, format!("must be finite and non-negative, got {v}"));
        }
    }

    fn porosity(&mut self, path: &str, what: &str, v: f64) {
        if !(v > 0.0 && v <= 1.0) {
            self.fail(path, format!("{what}: porosity must lie in (0, 1], got {v}"));
        }
    }

    fn angles(&mut self, prefix: &str, theta: f64, phi: f64) {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            self.fail(format!("{prefix}.theta"), format!("polar angle must lie in [0, π], got {theta}"));
        }
        if !(0.0..2.0 * std::f64::consts::PI).contains(&phi) {
            self.fail(format!("{prefix}.phi"), format!("azimuth must lie in [0, 2π), got {phi}"));
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !name.starts_with('.')
}

impl ScenarioFile {
    /// Parses TOML text; type errors carry the offending field path.
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::config(
                if path == "." { "<document>".to_string() } else { path },
                inner.message().to_string(),
            )
        })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::config("<document>", format!("file is not UTF-8: {e}")))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    fn stack(&self) -> Result<LayerStack> {
        let d = self.medium.free_diffusion.value * self.medium.free_diffusion.unit.to_um2_per_s();
        let layers = self
            .medium
            .layers
            .iter()
            .map(|l| Layer::new(l.width, l.porosity, l.degradation_rate))
            .collect();
        let exterior = match self.medium.exterior {
            Some(e) => Layer::new(f64::INFINITY, e.porosity, e.degradation_rate),
            None => Layer::free_exterior(),
        };
        LayerStack::new(layers, exterior, d)
    }

    /// Every schema and physics violation, each with its field path.
    pub fn violations(&self) -> Vec<Violation> {
        let mut c = Checker { found: Vec::new() };
        if self.schema_version != SCHEMA_VERSION {
            c.fail(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        if !valid_name(&self.name) {
            c.fail("name", "must be non-empty and use only letters, digits, `-`, `_` and `.`");
        }
        c.positive("medium.free_diffusion.value", self.medium.free_diffusion.value);
        if self.medium.layers.is_empty() {
            c.fail("medium.layers", "at least one finite layer is required");
        }
        for (i, l) in self.medium.layers.iter().enumerate() {
            let p = format!("medium.layers[{}]", i + 1);
            c.positive(&format!("{p}.width"), l.width);
            c.porosity(&format!("{p}.porosity"), &format!("layer {}", i + 1), l.porosity);
            c.non_negative(&format!("{p}.degradation_rate"), l.degradation_rate);
        }
        if let Some(e) = self.medium.exterior {
            c.porosity("medium.exterior.porosity", "exterior", e.porosity);
            c.non_negative("medium.exterior.degradation_rate", e.degradation_rate);
        }

        let s = &self.source;
        c.non_negative("source.r", s.r);
        c.angles("source", s.theta, s.phi);
        c.non_negative("source.emission_time", s.emission_time);
        let stack = self.stack().ok();
        if let Some(stack) = &stack {
            if let Some(i) = stack.interface_at(s.r) {
                c.fail(
                    "source.r",
                    format!(
                        "source lies exactly on interface {} (R = {} μm); a point source must be strictly inside a layer",
                        i + 1,
                        stack.interface_radii()[i]
                    ),
                );
            }
        }

        if self.receivers.is_empty() {
            c.fail("receivers", "at least one receiver is required");
        }
        let src = Spherical::new(s.r, s.theta, s.phi);
        for (i, r) in self.receivers.iter().enumerate() {
            let p = format!("receivers[{}]", i + 1);
            if !valid_name(&r.name) {
                c.fail(
                    format!("{p}.name"),
                    "must be non-empty and use only letters, digits, `-`, `_` and `.`",
                );
            }
            if self.receivers[..i].iter().any(|o| o.name == r.name) {
                c.fail(format!("{p}.name"), format!("duplicate receiver name `{}`", r.name));
            }
            c.non_negative(&format!("{p}.r"), r.r);
            c.angles(&p, r.theta, r.phi);
            c.positive(&format!("{p}.radius"), r.radius);
            let centre = Spherical::new(r.r, r.theta, r.phi);
            if r.radius > 0.0 && centre.distance(&src) <= r.radius {
                c.fail(p.clone(), "receiver sphere contains the source");
            }
        }

        let a = &self.analytic;
        if let Some(w) = a.window {
            c.positive("analytic.window", w);
        }
        if a.samples < 8 || a.samples % 2 != 0 {
            c.fail("analytic.samples", format!("must be even and at least 8, got {}", a.samples));
        }
        c.non_negative("analytic.damping", a.damping);

        c.positive("pbs.dt", self.pbs.dt);
        if self.pbs.molecules == 0 {
            c.fail("pbs.molecules", "must be at least 1");
        }
        c.positive("pbs.duration", self.pbs.duration);

        if let Some(sw) = &self.sweep {
            let n = self.medium.layers.len();
            if sw.layer == 0 || sw.layer > n {
                c.fail("sweep.layer", format!("must name a finite layer in 1..={n}, got {}", sw.layer));
            }
            if sw.porosities.is_empty() {
                c.fail("sweep.porosities", "sweep list is empty");
            }
            for (i, &p) in sw.porosities.iter().enumerate() {
                c.porosity(&format!("sweep.porosities[{}]", i + 1), &format!("layer {}", sw.layer), p);
            }
            if let Some(t) = sw.retention_time {
                c.positive("sweep.retention_time", t);
            }
        }
        c.found
    }

    /// Validated scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(Error::Invalid(v));
        }
        let stack = self.stack()?;
        let s = &self.source;
        let source = SourceSpec {
            position: Spherical::new(s.r, s.theta, s.phi),
            emission_time: s.emission_time,
            molecule_count: self.pbs.molecules,
        };
        let scenario = Scenario {
            name: self.name.clone(),
            stack,
            source,
            receivers: self
                .receivers
                .iter()
                .map(|r| Receiver::new(r.name.clone(), Spherical::new(r.r, r.theta, r.phi), r.radius))
                .collect(),
            analytic: AnalyticSettings {
                window: self.analytic.window,
                samples: self.analytic.samples,
                damping: self.analytic.damping,
            },
            pbs: PbsConfig {
                dt: self.pbs.dt,
                molecules: self.pbs.molecules,
                seed: self.pbs.seed,
                duration: self.pbs.duration,
            },
            sweep: self.sweep.as_ref().map(|sw| SweepSpec {
                layer: sw.layer - 1,
                porosities: sw.porosities.clone(),
                retention_time: sw.retention_time,
            }),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// File describing `scenario` (diffusion written in μm²/s).
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let stack = &scenario.stack;
        let ext = stack.layer(stack.exterior_index());
        let exterior = (ext.porosity != 1.0 || ext.degradation_rate != 0.0).then_some(ExteriorSection {
            porosity: ext.porosity,
            degradation_rate: ext.degradation_rate,
        });
        let p = scenario.source.position;
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name: scenario.name.clone(),
            medium: MediumSection {
                free_diffusion: Quantity {
                    value: stack.free_diffusion(),
                    unit: DiffusionUnit::Um2PerS,
                },
                layers: stack.layers()[..stack.finite_count()]
                    .iter()
                    .map(|l| LayerSection {
                        width: l.width,
                        porosity: l.porosity,
                        degradation_rate: l.degradation_rate,
                    })
                    .collect(),
                exterior,
            },
            source: SourceSection {
                r: p.r,
                theta: p.theta,
                phi: p.phi,
                emission_time: scenario.source.emission_time,
            },
            receivers: scenario
                .receivers
                .iter()
                .map(|r| ReceiverSection {
                    name: r.name.clone(),
                    r: r.center.r,
                    theta: r.center.theta,
                    phi: r.center.phi,
                    radius: r.radius,
                })
                .collect(),
            analytic: AnalyticSection {
                window: scenario.analytic.window,
                samples: scenario.analytic.samples,
                damping: scenario.analytic.damping,
            },
            pbs: PbsSection {
                dt: scenario.pbs.dt,
                molecules: scenario.pbs.molecules,
                seed: scenario.pbs.seed,
                duration: scenario.pbs.duration,
            },
            sweep: scenario.sweep.as_ref().map(|sw| SweepSection {
                layer: sw.layer + 1,
                porosities: sw.porosities.clone(),
                retention_time: sw.retention_time,
            }),
        }
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<(Scenario, Vec<u8>)> {
    let (file, bytes) = ScenarioFile::load(path)?;
    Ok((file.to_scenario()?, bytes))
}
