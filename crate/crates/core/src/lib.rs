//! OTDR fault-diagnostics workbench.
//!
//! Synthesizes backscatter traces with injected splice, bend and connector
//! faults, detects them with a fixed-cutoff baseline and with a small 1-D
//! convolutional network trained from scratch, scores both detectors, and
//! maps fault chainage onto a surveyed route.

pub mod baseline;
pub mod classifier;
pub mod error;
pub mod eval;
pub mod geo;
pub mod io;
pub mod nn;
pub mod plant;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
