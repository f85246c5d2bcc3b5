//! Drifted Brownian particles absorbed at the origin: simulation, the
//! two-phase hydrodynamic limit, and numerical checks of both.

pub mod error;
pub mod harness;
pub mod kernels;
pub mod observables;
pub mod particles;
pub mod quad;
pub mod stefan;
pub mod strategies;

pub use error::{Error, Result};

/// Version tag written into every JSON output.
pub const SCHEMA_VERSION: u32 = 1;
