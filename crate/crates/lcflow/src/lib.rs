//! Pseudospectral tools for 2D liquid-crystal flow and harmonic map heat
//! flow on the periodic square: field containers, Fourier-side operators,
//! norms, sphere-valued field geometry, time integration, diagnostics,
//! coercivity-gap estimation, initial-data generators, and file formats.

pub mod config;
pub mod diagnostics;
pub mod director;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod io;
pub mod norms;
pub mod rigidity;
pub mod scenarios;
pub mod spectral;

pub use error::{Error, Result};
