//! Neutron spectrum unfolding with evolutionary solvers.
//!
//! Detector counts `C` relate to a group fluence `φ` through a response
//! matrix, `C = R·φ`. With far fewer detectors than energy groups the
//! system is underdetermined, so candidates are searched inside the box
//! `0 < φ_i < min_j C_j / R_ji` by a genetic algorithm or differential
//! evolution, driven by one of eight fitness functions.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fitness;
pub mod forward;
pub mod metrics;
pub mod solver;
pub mod types;

pub use error::{Result, UnfoldError};
pub use fitness::{FitnessFunction, FitnessKind, FitnessParams, PopulationContext};
pub use forward::{add_noise, convolve, make_problem, NoiseMode, NoiseSpec};
pub use metrics::{normalize_fitness, qs, qs_default, QsVariant, RunSummary, Stats};
pub use solver::{run_dea, run_ga, Algorithm, DeaConfig, GaConfig, Individual, RunTrace};
pub use types::{DetectorCounts, EnergyGrid, ResponseMatrix, Spectrum, UnfoldProblem};
