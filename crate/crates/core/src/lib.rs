//! Offensive-language detection pipeline.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Numeric kernels index several parallel buffers with one loop variable.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod resources;
pub mod rng;
pub mod synth;
pub mod tokenize;

pub use error::{Error, Result};
