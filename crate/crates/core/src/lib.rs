//! Control-display transfer functions for touch and mid-air pointing, a
//! Fitts-law target acquisition harness, a synthetic participant, and the
//! repeated-measures statistics used to compare methods.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod batch;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod session;
pub mod stats;
pub mod tracking;
pub mod transfer;
