//! Pseudospectral solver and verification harness for the fractional
//! reaction-diffusion equation `u_t = -Λ^α u + λ u^p` on periodic grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: grids, fields, the Fourier contract and `Λ^α` as a multiplier.
//! * [`kernel`]: the α-stable heat kernel `P_α`, pointwise and on grids.
//! * [`solver`]: exponential time differencing of the mild formulation, with
//!   adaptive stepping and blow-up detection.
//! * [`asymptotics`]: mass-limit classification, the decay bound `H`, the
//!   small-data certificate and the scaled profile gap.
//! * [`testfn`]: rescaled test-function experiments (cutoffs, the composite
//!   inequality, scaling laws and the critical budget).
//! * [`config`], [`campaign`], [`io`]: configuration files, parameter sweeps and
//!   on-disk formats used by the `levy-fujita` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod campaign;
pub mod config;
pub mod error;
pub mod io;
pub mod kernel;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod testfn;

pub use error::{Error, Result};
