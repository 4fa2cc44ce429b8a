//! Bloch bands, effective Dirac description, Wannier functions and wave-packet
//! dynamics for a particle in a bichromatic optical lattice.

pub mod dirac;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod wannier;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use lattice::{BandStructure, BlochState, LatticeParams, PlaneWaveBasis, PERIOD};
