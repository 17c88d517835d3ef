//! Numerical laboratory for self-interacting Brownian path measures with
//! long-range temporal kernels `1/(1 + |t − s|^ξ)`.
//!
//! * [`model`]: parameters, paths, kernels, energies and the regime diagram.
//! * [`gaussian`]: exact solvers for the quadratic potential.
//! * [`sampler`]: Metropolis chains with tail shifts, IAT and batch means.
//! * [`hierarchy`]: dyadic statistics, quadratic-form gaps and recursions.
//! * [`experiments`]: scaling fits, cross-validation, the verify suite.
//! * [`cli`]: config parsing and the `subdiff` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod hierarchy;
pub mod model;
pub mod sampler;

pub use error::{Error, ErrorClass, Result};
