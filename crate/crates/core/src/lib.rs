//! Simulation and planning toolkit for trimming tunable-transmon frequencies
//! with alternating-bias assisted annealing (ABAA).
//!
//! The crate is organised along the trimming workflow:
//!
//! - [`junction`]: stochastic room-temperature resistance of one qubit under
//!   fabrication spread, pulsing, relaxation and aging.
//! - [`tuning`]: the closed-loop pulse-until-threshold controller and its
//!   precision statistics.
//! - [`freq`]: resistance to frequency power law, target assignment and
//!   fitting utilities.
//! - [`lattice`]: detuning analysis, chip-offset removal and parking.
//! - [`yield_mc`]: unit-cell design, tiling and Monte Carlo edge yield.
//! - [`io`]: CSV/JSON file formats and run manifests.

pub mod freq;
pub mod io;
pub mod junction;
pub mod lattice;
pub mod seed;
pub mod stats;
pub mod tuning;
pub mod yield_mc;
