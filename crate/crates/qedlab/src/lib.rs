//! Laboratory for scheduling a multiclass many-server queue with abandonment
//! in the QED (square-root safety staffing) regime.
//!
//! The crate solves the limiting diffusion's HJB equation on a truncated box,
//! extracts the minimizing Markov policy, drives preemptive and nonpreemptive
//! scheduling rules built from it in an exact discrete-event simulator of the
//! n-th queueing system, and cross-checks that scaled discounted costs
//! converge to the HJB value.
//!
//! Entry points:
//! - [`params`]: limiting constants, n-th system rates, rescaling.
//! - [`cost`]: the running-cost catalog.
//! - [`hjb`]: HJB solver, policy extraction, mollifier, k = 1 oracle.
//! - [`policy`]: the scheduling rules (preemptive, nonpreemptive, baselines).
//! - [`queue`]: exact discrete-event simulation of the n-th system.
//! - [`diffusion`]: Euler-Maruyama simulation of the limiting diffusion.
//! - [`config`] / [`cli`]: experiment configuration and the CLI commands.

// numeric kernels keep explicit indices over zipped iterators, and
// validation uses negated comparisons so NaNs fail closed
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cost;
pub mod diffusion;
pub mod error;
pub mod hjb;
pub mod params;
pub mod policy;
pub mod queue;
pub mod simplex;

pub mod cli;

pub use error::{Error, Result};
