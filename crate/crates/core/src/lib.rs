//! Exact large-n solver for the Ohmic-dissipative spherical model on a
//! d-dimensional lattice with M imaginary-time slices.

pub mod aux_time;
pub mod correlators;
pub mod criticality;
pub mod error;
pub mod fit;
pub mod kernel;
pub mod oracle;
pub mod params;
pub mod quad;
pub mod roots;
pub mod saddle;
pub mod special;

pub use error::{Error, Result};
pub use fit::FitReport;
pub use kernel::KernelSpectrum;
pub use params::{ClassicalParams, QuantumParams, RegimeReport};
