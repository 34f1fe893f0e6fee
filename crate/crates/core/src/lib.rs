//! Cepstral Fisher discriminant analysis for replicated time series whose
//! spectra vary from replicate to replicate within each group.
//!
//! The pipeline is: estimate a log-spectrum per series ([`spectral`]),
//! project it onto a short cosine basis ([`cepstral`]), and run a classical
//! Fisher discriminant analysis on the truncated cepstra ([`discriminant`]).
//! [`baselines`] holds nearest-template classifiers built on spectral
//! information measures, and [`simulation`] generates conditional MA(1) and
//! AR(2) populations and runs Monte Carlo comparisons.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cepstral;
pub mod dataio;
pub mod discriminant;
pub mod error;
mod par;
pub mod simulation;
pub mod spectral;

pub use error::{Error, Result};
