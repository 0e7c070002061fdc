//! Structure identification for linear stochastic networked dynamical
//! systems under partial observability.
//!
//! The system evolves as `y(t+1) = A y(t) + x(t+1)` with `A` non-negative
//! and stable. Only a subset `S` of the nodes is observed. For every ordered
//! pair of observed nodes this crate builds a vector of empirical lag
//! covariances and classifies the pair as connected or disconnected, either
//! by thresholding a matrix-valued estimator or with a trained classifier.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the Monte
//! Carlo harness and the command line live in the `netsep` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod classifiers;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod features;
pub mod graph;
pub mod hull;
pub mod seed;

pub use nalgebra::DMatrix;

pub use crate::error::{Error, Result};
