//! Likelihood-free inference toolkit.
//!
//! `lfit` implements rejection ABC on top of projection-based dimension
//! reduction of candidate summary statistics. Besides the classic global
//! projections (linear-regression predictions, partial least squares scores)
//! it provides *localized* projections fitted only on simulations close to
//! the observed data, and an optimizer that tunes the localization
//! parameters (neighborhood size, component counts) against held-out
//! validation simulations.
//!
//! The crate is organized as:
//!
//! * [`table`], [`neighbors`], [`io`] — simulation tables, distances,
//!   k-nearest selection and persistence,
//! * [`simulators`] — Ricker map, g-and-k distribution and a toy model,
//!   plus prior sampling,
//! * [`summaries`] — candidate summary statistics and the
//!   square-root/standardization preprocessing pipeline,
//! * [`projections`] — ordinary least squares and SIMPLS partial least
//!   squares fits with cross-validated component selection,
//! * [`inference`] — rejection ABC, accuracy metrics and the local
//!   projection algorithms,
//! * [`harness`] — experiment configuration, runner and report/plot-data
//!   emission,
//! * [`cli`] — the `lfit` command line interface.
//!
//! All randomness flows through explicitly derived seeds (see [`rng`]), so
//! every result is a pure function of its inputs and a master seed,
//! independent of thread count.

pub mod cli;
pub mod error;
pub mod harness;
pub mod inference;
pub mod io;
mod linalg;
pub mod neighbors;
pub mod projections;
pub mod rng;
pub mod simulators;
pub mod summaries;
pub mod table;

pub use error::{Error, Result};
