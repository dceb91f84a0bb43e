//! Sequential two-photon detection by a five-level molecule.

pub mod analytic;
pub mod bridge;
pub mod error;
pub mod gdm;
pub mod liouvillian;
pub mod model;
pub mod ode;
pub mod povm;
pub mod pulses;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{LevelMatrix, LevelOperator, MoleculeParams};
pub use pulses::{Coupling, PulseEnvelope, Shape, Side, Signal, SpectralAmplitude, SpectralGrid};
