//! Simulation and analysis of two-path leakage suppression for a vibrational
//! qubit in a tilted-washboard optical lattice.
//!
//! The qubit is the pair of lowest quasi-bound states of one lattice well. A
//! phase modulation at the qubit frequency drives the qubit transition and,
//! at second order, leakage to higher states; an amplitude modulation at twice
//! that frequency opens a second, one-quantum leakage path. The relative phase
//! of the two drives sets whether the leakage paths interfere constructively or
//! destructively.

pub mod analytic;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod lattice;
pub mod measurement;
pub mod output;
pub mod propagator;
pub mod stationary;

pub use error::{Error, Result};
pub use grid::{SpectralGrid, WaveState};
pub use lattice::{DepthDistribution, DriveSchedule, LatticeParams};
pub use measurement::PopulationReport;
pub use propagator::{PropagationConfig, PropagationResult};
pub use stationary::{BasisConfig, StateBasis};
