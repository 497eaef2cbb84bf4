//! Optimal incident fields for detecting a scatterer in a half-space.
//!
//! Fields on the measurement plane are angular spectra ([`angular_spectrum`]);
//! energy is measured by the flux pairing ([`flux`]). Scattering operators
//! come from layered media ([`solver_1d`]), penetrable voxel scatterers
//! ([`solver_3d`]) or planted spectra ([`time_reversal::SyntheticBackend`]).
//! [`time_reversal`] runs the iterative time-reversal power method and
//! [`spectral`] predicts its frequency-tuned limit.

pub mod angular_spectrum;
pub mod error;
pub mod flux;
pub mod media;
pub mod quadrature;
pub mod solver_1d;
pub mod solver_3d;
pub mod spectral;
pub mod time_reversal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
