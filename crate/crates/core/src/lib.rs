//! Random-codebook advantage distillation for long-distance continuous-variable QKD.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the pure algorithmic parts:
//!
//! - [`numerics`]: Gaussian CDF and quantile, noncentral chi-square CDF / Marcum Q,
//!   binary and thermal entropy, quadrature.
//! - [`channel`]: the lossy Gaussian channel, mutual information, Eve's leakage
//!   from symplectic eigenvalues and the reference bounds.
//! - [`reconciliation`]: codebook generation, Bob's modulo-1 masking, Alice's
//!   quadratic scores, the threshold and the accept/reject decision.
//! - [`analytics`]: closed-form accept probabilities, symbol error rate and the
//!   secret key ratio, averaged over Alice's block energy.
//! - [`montecarlo`]: single protocol trials, tallies and sample collectors.
//! - [`optimizer`]: landscapes, grid search with local refinement, distance sweeps.
//!
//! Parallel drivers, file formats and the command-line tool live in the `rcad` crate.
//! Work that can be spread over threads goes through the [`exec::Executor`] trait so
//! that results never depend on the schedule.
#![no_std]

extern crate alloc;

pub mod analytics;
pub mod channel;
mod error;
pub mod exec;
pub mod montecarlo;
pub mod numerics;
pub mod optimizer;
pub mod reconciliation;

pub use error::{Error, Result};
