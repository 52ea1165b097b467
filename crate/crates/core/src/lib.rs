//! Simulation and analysis of a polarization-entangled photon-pair link over
//! telecom fiber.
//!
//! The crate is split along the measurement chain:
//!
//! - [`model`]: scenario parameters and closed-form rate/fiber/spectral physics.
//! - [`simkit`]: seeded Monte Carlo synthesis of detector timestamp streams.
//! - [`tsproc`]: timestamp file I/O, coincidence search, correlation histograms
//!   and delay recovery.
//! - [`analysis`]: visibility fits, background correction, heralding efficiency
//!   and BBM-92 key-rate estimation, plus pump-power sweeps.
//!
//! Timestamps are integer picoseconds throughout.

pub mod analysis;
mod error;
pub mod model;
pub mod simkit;
pub mod tsproc;

pub use error::{Error, Result};
