//! Delayed-input WDM reservoir computing on a nonlinear silicon microring.
//!
//! Start with [`experiment::run_experiment`] for a single operating point
//! and [`sweep::run_sweep`] for a power × detuning grid.

// `!(x <= y)` is used on purpose so NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod config;
pub mod error;
pub mod experiment;
pub mod heatmap;
pub mod readout;
pub mod rng;
pub mod signal;
pub mod sweep;
pub mod validation;

pub use error::{Error, Result};
