//! Rosenzweig-Porter matrix Brownian motion `H_t = V + Φ_t`, its resolvents,
//! the characteristic curves `dξ/dt = -S_t(ξ)` and eigenvector statistics.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod characteristics;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod localization;
pub mod quadrature;
pub mod regularity;
pub mod scalar;
pub mod seed;
pub mod spectral;
pub mod stats;

pub use error::{Error, NumericalFailure, Result};

pub type ModelParams64 = ensemble::ModelParams<f64>;
pub type Potential64 = ensemble::Potential<f64>;
pub type DysonPath64 = ensemble::DysonPath<f64>;
pub type SpectralData64 = spectral::SpectralData<f64>;
pub type SpectralPath64 = characteristics::SpectralPath<f64>;
pub type GridSpec64 = characteristics::GridSpec<f64>;
pub type LocalizationReport64 = localization::LocalizationReport<f64>;
