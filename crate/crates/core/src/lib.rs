//! Recovery of the coarsest equitable partition (cEP) of a hidden graph from
//! the outputs of a graph filter.
//!
//! Two recovery routes are provided:
//!
//! * [`wl::blind_wl`] simulates colour refinement through an oracle that
//!   returns `A·B` for chosen inputs `B`, and [`wl::robust_blind_wl`] replaces
//!   the exact row-equality test with Gaussian-mixture clustering so that a
//!   noisy covariance estimate can stand in for the oracle.
//! * [`spectral::spectral_extract`] takes the top-k eigenvectors of a
//!   (sample) covariance matrix and clusters their rows with k-means.
//!
//! Supporting modules generate graphs with an exactly planted equitable
//! partition ([`config_model`]), sample filtered signals ([`signal`]) and run
//! the evaluation sweeps ([`eval`]).

// NaN-rejecting `!(x >= 0.0)` checks and index loops over matrices are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config_model;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod seed;
pub mod signal;
pub mod spectral;
pub mod wl;

pub use error::{Error, Result};
pub use graph::{Graph, Partition, QuotientMatrix};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
