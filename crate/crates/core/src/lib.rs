//! Decentralized variance-reduced stochastic optimization over directed graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`digraph`]: strongly connected communication graphs and the edge-list format.
//! - [`weights`]: row/column stochastic weights, Perron vectors and contraction factors.
//! - [`problems`]: finite-sum objectives (quadratic and regularized logistic).
//! - [`algorithms`]: AB-SAGA and its baselines (AB, S-AB, centralized SAGA).
//! - [`theory`]: the 4×4 error-system matrix, step-size and communication bounds,
//!   and the small-gain certificate.
//! - [`experiment`]: configuration files, traces, and method comparisons.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod digraph;
pub mod error;
pub mod experiment;
pub mod problems;
pub mod theory;
pub mod weights;

pub use error::{Error, Result};
