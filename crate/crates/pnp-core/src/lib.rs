//! Finite-volume simulation suite for multi-species drift-diffusion
//! transport coupled to a self-consistent electric potential in periodically
//! perforated domains, and the matching effective (homogenized) model.
//!
//! The crate is organized around the pipeline:
//!
//! * [`grid`] builds the unit periodicity cell and the perforated
//!   macroscopic domain as masked Cartesian grids;
//! * [`cell`] solves the periodic cell problems and assembles the effective
//!   diffusion tensor;
//! * [`pnp`] advances the coupled transport/potential system with
//!   exponentially fitted fluxes (mass-conservative, positivity-preserving);
//! * [`homog`] assembles the macroscopic model, reconstructs first-order
//!   correctors, and evaluates two-scale pairings;
//! * [`diag`] holds the invariant monitors and error norms;
//! * [`config`] and [`runner`] wire everything into the `pnp` command-line
//!   scenarios.

pub mod cell;
pub mod config;
pub mod diag;
pub mod error;
pub mod expr;
pub mod grid;
pub mod homog;
pub mod pnp;
pub mod runner;
pub mod sparse;

pub use error::{Error, Result};
