//! Channel impulse responses for diffusion in multi-layer porous spheres.

pub mod analytic;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod harness;
pub mod medium;
pub mod pbs;
pub mod specfun;
pub mod timedomain;

pub use error::{Error, Result};
pub use medium::{Layer, LayerStack, SourceSpec, Spherical};
pub use pbs::{PbsConfig, Receiver};
