//! Identification of latent-variable graphical models for Gaussian
//! reciprocal processes.
//!
//! The inverse covariance of a reciprocal process of order `n` and period `N`
//! is a banded symmetric block-circulant matrix. Writing it as `S − L`, with
//! `S` group-sparse across lags and `L` positive semidefinite of low rank,
//! gives a latent-variable graphical model. [`solver::solve`] estimates it
//! from sample covariance lags by running ADMM on the dual problem, where every
//! expensive step is blockwise in the frequency domain.

pub mod blockcirc;
pub mod covest;
pub mod error;
pub mod regset;
pub mod solver;
pub mod synthgen;

#[cfg(test)]
pub(crate) mod testutil;

pub use blockcirc::{BandedBlockCirculant, BlockCirculant, BlockEigen, PdFactor, SupportPattern, Symbol};
pub use error::{Error, Result};
