//! Semi-analytical Green's function of the layered sphere.
//!
//! [`RadialProblem`] solves the interface conditions for one harmonic
//! order; [`GreensFunction`] sums the harmonic series at observation
//! points; [`spectral_sweep`] batches both over a frequency grid.

mod radial;
mod series;
mod sweep;

pub use radial::{
    assemble_system, sigma, sigma_at, solve_radial, wavenumber, BesselPair, RadialPoint,
    RadialProblem, RadialSolution, CONDITION_LIMIT,
};
pub use series::{greens_frequency, GreensFunction, SeriesControl, SeriesForm, SeriesValue};
pub use sweep::{
    spectral_sweep, spectral_sweep_uncached, FrequencyGrid, Probe, DEFAULT_DAMPING, SpectralSample, Spectrum,
};
