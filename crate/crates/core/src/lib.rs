//! Cavity-enhanced all-optical switching in warm ⁸⁷Rb vapor.
//!
//! The control field dresses the 5P₃/₂ → 5D₅/₂ transition, shifting the
//! refractive index seen by a weak signal on 5S₁/₂ → 5P₃/₂. The resulting phase
//! tunes a two-port ring cavity between its transmitted and reflected ports.
//!
//! Modules, bottom-up:
//! - [`medium`]: Doppler-averaged susceptibility, index, absorption and phase
//! - [`cavity`]: steady-state ring-cavity ports, finesse, ring-up time
//! - [`dynamics`]: round-trip time-domain simulation and eye metrics
//! - [`sweep`], [`fit`]: detuning maps, contrast curves, two-parameter fits
//! - [`config`], [`pipeline`]: run configuration and file-producing commands

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod config;
pub mod constants;
pub mod doppler;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod medium;
pub mod pipeline;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
