//! Control-plane engine and verification toolkit for large optical-tweezer
//! atom arrays.
//!
//! The crate is organized around the main stages of operating a ~12,000-site
//! tweezer array:
//!
//! - [`geometry`] / [`trap`] — site lattice, occupancy, and trap-parameter
//!   relations shared by everything else.
//! - [`hologram`] — weighted Gerchberg–Saxton phase retrieval with
//!   loading-based feedback and out-of-plane intensity propagation.
//! - [`imaging`] — photon-count model, histogram fits, threshold/kernel
//!   optimization, and the model-free three-image fidelity estimator.
//! - [`transport`] — trap-motion kinematics, AOD cylindrical-lensing physics,
//!   and thermal Monte Carlo transport simulation.
//! - [`rearrange`] — quadrant-partitioned Tetris rearrangement planning.
//! - [`waveform`] — phase-continuous multi-tone AOD waveform synthesis and
//!   chunked streaming benchmarks.
//! - [`qubit`] — single-qubit pulse simulator plus RB/IRB and coherence fits.
//! - [`planner`] — time-budget, zone-reach, and Rydberg power-budget
//!   calculators.

pub mod config;
pub mod consts;
pub mod error;
pub mod geometry;
pub mod hologram;
pub mod imaging;
pub mod numeric;
pub mod planner;
pub mod qubit;
pub mod rearrange;
pub mod rng;

pub mod transport;
pub mod trap;
pub mod waveform;

pub use error::{Error, Result};
