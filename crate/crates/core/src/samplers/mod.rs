//! Langevin iterations driven by a score field.
//!
//! * basic: `x' = x + μ Ψ(x) + √(2μ) ν`. Run with the noise-free score this is
//!   the oracle sampler; run with a noisy-data score it samples the noisy
//!   distribution.
//! * noise-corrected: `x̃ = x + σ n`, `x' = x̃ + μ Ψ_x̃(x̃) + √(2μ − σ²) ν`,
//!   requiring `μ ≥ σ²/2`.
//! * half-denoising: the noise-corrected step at `μ = σ²/2`,
//!   `x' = x̃ + (σ²/2) Ψ_x̃(x̃)`.
//!
//! Each step draws its Gaussian blocks from the stream in a fixed order
//! (`n` first, then `ν`), which makes the reductions between variants exact
//! under a shared stream of variates.

mod chain;
mod config;
mod step;

pub(crate) use chain::tail_count;
pub use chain::{run_chain, run_chain_visit, Chain, ChainRunner};
pub use config::{Init, SamplerConfig, Variant};
pub use step::{
    basic_langevin_step, basic_langevin_update, half_denoise_step, half_denoise_update, noise_corrected_step,
    noise_corrected_update, DIVERGENCE_BOUND,
};
