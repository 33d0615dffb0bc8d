//! Command-line pipeline for privacy-preserving sparse-coded image
//! sharing: training, encode-and-share, authorized/keyless decoding, a
//! random-guess attack, rate statistics, and quality metrics, plus the
//! bit-exact storage formats behind them.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod pnm;

pub use error::{CliError, Result};
