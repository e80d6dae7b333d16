//! Radial initial-value problems, profiles and quadrature.

pub mod integrate;
pub mod profile;
pub mod quadrature;

pub use integrate::{dopri5, integrate, integrate_with, series_start, Control, OdeOptions, Step};
pub use profile::{hermite3, hermite5, uniform_grid, Profile, State};
pub use quadrature::{gauss_legendre, hermite, quadrature, simpson, weighted_simpson};
