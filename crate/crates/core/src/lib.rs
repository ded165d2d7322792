//! Isotropic Gaussian random fields on the unit sphere, their evolution under
//! subordinate fractional diffusion, and Monte-Carlo verification of the
//! resulting covariance laws.

pub mod error;
pub mod evolution;
pub mod fields;
pub mod harmonics;
pub mod io;
pub mod rng;
pub mod spectra;
pub mod sphere_walk;
pub mod subordinators;
pub mod verify;

mod quadrature;
mod spec_string;

pub use error::{Error, Result};
pub use fields::HarmonicCoefficients;
pub use harmonics::{FieldMap, SphereGrid, SpherePoint};
pub use rng::StreamFactory;
pub use spectra::PowerSpectrum;
pub use subordinators::LaplaceExponent;
