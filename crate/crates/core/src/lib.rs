//! Noise-corrected Langevin sampling.
//!
//! When only the score of Gaussian-noised data is available (as denoising score
//! matching provides), plain Langevin samples the *noisy* distribution. The
//! noise-corrected iteration adds fresh noise before each score evaluation and
//! lowers the injected noise to `sqrt(2μ - σ²)`, cancelling the first-order bias.
//! With `μ = σ²/2` the injected noise vanishes and each step adds noise, then
//! removes half of it with the Tweedie correction ("half-denoising").
//!
//! The crate is organised as:
//!
//! * [`models`]: Gaussian mixtures, their exact score fields, exact sampling,
//!   the Tweedie denoiser and a closed-form affine denoising-score-matching fit.
//! * [`samplers`]: basic, noise-corrected and half-denoising Langevin steps and
//!   chain execution.
//! * [`analysis`]: 2D kernel density grids, normalized L2 distances, covariance
//!   distances and ensemble mixing curves.
//! * [`theory`]: closed-form covariance dynamics of the samplers on Gaussian
//!   targets.
//! * [`experiments`]: the three simulation studies (mixture bias, Gaussian
//!   bias, mixing speed) with JSON/CSV reports.
//! * [`cli`]: the `nclangevin` command-line interface.
//!
//! ```
//! use nclangevin::models::GmmModel;
//! use nclangevin::samplers::{run_chain, SamplerConfig};
//!
//! let data = GmmModel::gaussian(1, 1.0).unwrap();
//! let noisy = data.noisy_model(0.3).unwrap();
//! let config = SamplerConfig::half_denoise(0.3, 1_000, 7).unwrap();
//! let chain = run_chain(&config, &noisy).unwrap();
//! assert_eq!(chain.len(), 1_001);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiments;
mod kv;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod samplers;
pub mod theory;

pub use error::{Error, Result};
