//! Radial Neumann solutions of `-Δu + u = e^(mu (u - 1))` on balls and annuli.

pub mod collocation;
pub mod continuation;
pub mod error;
pub mod gluing;
pub mod green;
pub mod linalg;
pub mod linearized;
pub mod monotone;
pub mod params;
pub mod radial;
pub mod scalar;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Domain64 = params::Domain<f64>;
pub type Params64 = params::Params<f64>;
pub type Profile64 = radial::Profile<f64>;
pub type GreenPair64 = green::GreenPair<f64>;
pub type EigenPair64 = spectrum::EigenPair<f64>;
pub type Domain32 = params::Domain<f32>;
pub type Params32 = params::Params<f32>;
pub type Profile32 = radial::Profile<f32>;
pub type GreenPair32 = green::GreenPair<f32>;
pub type EigenPair32 = spectrum::EigenPair<f32>;
