//! Latent-conditioned parameterized quantum circuits.
//!
//! Classical networks map latent samples to the angles of a
//! hardware-efficient ansatz; tracing out ancillas turns each circuit output
//! into a density matrix, so a latent prior pushes forward to an ensemble of
//! mixed states. Generators are trained against target ensembles with an
//! optimal-transport loss over a super-fidelity cost.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod grad;
pub mod impe;
pub mod netgen;
pub mod otloss;
pub mod priors;
pub mod qcore;
pub mod rng;

pub use error::{Error, Result};
