//! Finite-market asymptotics for the efficient allocation in a double auction.

// `!(x > 0.0)` is used deliberately so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod closed_form;
pub mod config;
pub mod distributions;
pub mod error;
pub mod market;
pub mod montecarlo;
pub mod numeric;
pub mod output;
pub mod transforms;

pub use error::{Error, Result};
