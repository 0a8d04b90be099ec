//! Channel overlaps, Fisher informations and low coordinate degree advantages
//! for latent variable hypothesis testing models, with exact discrete oracles
//! and spiked-matrix spectral simulations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advantage;
pub mod channels;
pub mod cli;
pub mod efron_stein;
pub mod error;
pub mod numeric;
pub mod priors;
pub mod rng;
pub mod spectral;
pub mod truncexp;

pub use error::{LcdfError, Result};
