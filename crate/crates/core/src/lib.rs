//! Disentangled stochastic interpolants: a two-time generative process that
//! separates the clean-to-degraded path (`r`) from the noise level (`g`),
//! together with samplers, reference integrators, toy denoisers and training.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod checkpoint;
pub mod denoiser;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod process;
pub mod sampler;
pub mod schedule;
pub mod sweep;
pub mod toydata;
pub mod training;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
