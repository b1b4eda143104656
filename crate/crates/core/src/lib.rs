//! Calibrated bootstrap inference.
//!
//! The crate calibrates the resample size of an m-out-of-n bootstrap with a
//! Robbins–Monro search (RA), refines the pooled draws so their contour values
//! are close to uniform (DR), and turns the result into confidence regions.
//! Exact oracles and classical bootstrap baselines live alongside for
//! comparison, and the [`harness`] module drives complete experiments.

pub mod calibrate;
pub mod contour;
pub mod error;
pub mod harness;
pub mod inference;
pub mod mathkit;
pub mod models;
pub mod refine;

pub use error::{Error, Result};
