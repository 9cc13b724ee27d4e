//! Adaptive pressure matching for personal sound zones, centralized (CPM)
//! and distributed over a node network by diffusion LMS (DPM-D).
//!
//! * [`scene`] builds the room geometry and the acoustic transfer functions.
//! * [`engine`] holds the centralized update and its reference solutions.
//! * [`diffusion`] holds the node network and the adapt-then-combine iteration.
//! * [`metrics`] evaluates NMSE, acoustic contrast and the complexity model.
//! * [`harness`] runs seeded Monte Carlo experiments and writes CSV results.

pub mod cli;
pub mod diffusion;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod scene;

#[cfg(test)]
mod testutil;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
