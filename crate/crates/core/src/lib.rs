//! Max-min downlink power allocation learned by a regression network, and
//! budget-constrained adversarial attacks on the network's channel-gain input.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod model;
pub mod neural;
pub mod solver;

pub use error::{Error, Result};
