//! Robustness-based incompatibility measures of finite-outcome quantum
//! measurements.
//!
//! The crate computes the five noise-robustness measures of POVM
//! incompatibility (depolarising, random, probabilistic, jointly measurable,
//! generalised) through exact conic programs with dual certificates, evaluates
//! the analytic lower and upper bounds attached to each measure, and searches
//! for maximally incompatible measurement sets.

pub mod bounds;
pub mod linalg;
pub mod noise;
pub mod povm;
pub mod robustness;
pub mod sdp;
pub mod search;

pub use bounds::{BoundReport, Quantities};
pub use linalg::{HermitianMatrix, Spectrum, C64};
pub use noise::{NoiseInstance, NoiseModelKind};
pub use povm::{MeasurementSet, PostProcessing, PreProcessing, Povm};
pub use robustness::{RobustnessResult, SolveOptions};
pub use sdp::{ConicProgram, ConicSolution, SolveStatus};
pub use search::{SearchConfig, SearchRecord};
