//! Signed-attention graph transformer toolkit.
//!
//! Everything numerical lives here: a dense tensor engine with reverse-mode
//! differentiation ([`tensor`]), non-learnable graph math ([`graph`]), a
//! synthetic dataset generator with controllable homophily ([`csbm`]), the
//! model itself ([`model`]), and a deterministic training loop ([`train`]).
//! File formats and the command-line surface live in the companion
//! `signgt-cli` crate.
//!
//! The crate is `no_std`-compatible (it requires `alloc`): disable the
//! default `std` feature and enable `libm` for float math on bare targets.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("signgt-core needs either the `std` or the `libm` feature");

pub mod csbm;
pub mod dataset;
pub mod error;
pub mod graph;
mod math;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
