//! Kernel regression with patch-structured (convolutional and local) kernels.
//!
//! This crate is a numerical laboratory for teacher-student kernel ridge
//! regression where both the target function and the student prior are built
//! from low-dimensional constituent kernels acting on contiguous patches of
//! the input sequence. It provides:
//!
//! - [`kernels`]: constituent kernels (Laplacian, ReLU-NTK, random-feature
//!   NTK, power-law spectral) and their convolutional / local composites,
//!   with Gram and cross-Gram assembly;
//! - [`sampling`]: input sampling on the hypercube / sphere / torus and
//!   Gaussian-random-field targets with teacher-kernel covariance;
//! - [`regression`]: kernel ridge / ridgeless regression and test error;
//! - [`spectral`]: Fourier eigen-systems of composite kernels on the torus,
//!   target-coefficient variances, tail sums, replica learning-curve
//!   predictions, decaying-ridge estimates and closed-form exponents;
//! - [`harness`]: learning-curve sweeps over training-set sizes, exponent
//!   fitting, weight-sharing collapse checks, theory-vs-experiment reports;
//! - [`config`]: TOML run configuration shared by the CLI subcommands.
//!
//! The headline quantity throughout is the learning-curve exponent `beta` in
//! `error(P) ~ P^-beta`: for a teacher of filter size `t` learnt ridgeless by
//! a student of filter size `s >= t`, `beta = alpha_t / s` independently of
//! the embedding dimension, and `beta = gamma * alpha_t / (alpha_s + s)` with
//! a ridge decaying as `P^-gamma`.

pub mod config;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod regression;
pub mod rng;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
