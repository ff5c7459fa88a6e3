//! Special functions: spherical Bessel/Hankel functions of complex argument,
//! Legendre functions and Gauss–Legendre quadrature.

mod bessel;
mod legendre;
mod quadrature;

pub use bessel::{
    spherical_h, spherical_h_array, spherical_h_derivative, spherical_h_scaled,
    spherical_h_scaled_array, spherical_j, spherical_j_array, spherical_j_derivative,
    spherical_j_scaled, spherical_j_scaled_array, spherical_y, spherical_y_array,
    spherical_y_derivative, spherical_y_scaled, spherical_y_scaled_array, RadialKind, RatioTable,
};
pub use legendre::{legendre_p, legendre_p_normalized, legendre_polynomials};
pub use quadrature::{gauss_legendre, gauss_legendre_on};

/// Highest harmonic order any routine in this crate will request.
pub const MAX_ORDER: usize = 200;
