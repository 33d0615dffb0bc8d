//! Sparse coding with ambiguation: a self-contained pipeline for
//! privacy-aware image sharing.
//!
//! The crate trains a bottlenecked convolutional autoencoder whose latent
//! consists of `L` independent k-sparse code-maps, hides the true support
//! of those codes behind a compact key, pads the public codes with
//! statistically matched decoys, and accounts exactly for key size and
//! guessing complexity.
//!
//! Everything here is `no_std + alloc`; IO, file formats and the CLI live
//! in the companion `sca-cli` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod error;
pub mod graph;
pub mod metrics;
pub mod net;
pub mod protocol;
pub mod rate;
pub mod scalar;
pub mod tensor;
pub mod trainer;

mod kernels;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
