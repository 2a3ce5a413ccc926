//! One-dimensional phase-space dynamics: amplitudes, phase-space
//! distributions, the transforms between them, and the classical and
//! quantum evolution of both.

pub mod basis;
pub mod error;
pub mod experiments;
pub mod field;
pub mod fieldio;
pub mod grid;
pub mod liouville;
pub mod potential;
pub mod schrodinger;
pub mod spectral;
pub mod wigner;

pub use error::{Error, Result};
pub use field::{Amplitude, PhaseDistribution};
pub use grid::{ActionConstant, Boundary, PhaseSpaceGrid, SpatialGrid, SystemParams};
pub use potential::Potential;
