//! Cyclic motion in population games: eigencycles of the replicator
//! linearization, angular momentum of play series, and the regressions that
//! connect them.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod render;
pub mod spectral;
pub mod stats;
pub mod tsmetrics;

pub use error::{Error, Result};
