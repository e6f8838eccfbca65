//! Complex geometric optics (Gaussian beam) solutions of linear symmetric hyperbolic systems.

pub mod amplitude;
pub mod assembly;
pub mod beam;
pub mod cli;
pub mod complex_symbol;
pub mod config;
pub mod eikonal;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod output;
pub mod system;
pub mod verify;

pub use error::{CgoError, Result};
