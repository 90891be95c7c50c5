use crate::error::{Error, Result};
use crate::models::ScoreField;
use crate::rng::Stream;

/// Any coordinate beyond this magnitude aborts a chain.
pub const DIVERGENCE_BOUND: f64 = 1e6;

fn checked_score<S: ScoreField + ?Sized>(score: &S, at: &[f64], out: &mut [f64]) -> Result<()> {
    score.eval_into(at, out);
    if out.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            step: 0,
            state: at.to_vec(),
        })
    }
}

/// `out = state + μ Ψ(state) + √(2μ) ν` for a given `ν`.
///
/// `grad` is scratch of length `dim`.
pub fn basic_langevin_update<S: ScoreField + ?Sized>(
    score: &S,
    mu: f64,
    state: &[f64],
    nu: &[f64],
    grad: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    checked_score(score, state, grad)?;
    let c = (2.0 * mu).sqrt();
    for i in 0..state.len() {
        out[i] = state[i] + mu * grad[i] + c * nu[i];
    }
    Ok(())
}

/// `x̃ = state + σ n`, `out = x̃ + μ Ψ(x̃) + √(2μ − σ²) ν` for given `n`, `ν`.
///
/// `noisy` and `grad` are scratch of length `dim`; on return `noisy` holds `x̃`.
#[allow(clippy::too_many_arguments)]
pub fn noise_corrected_update<S: ScoreField + ?Sized>(
    score: &S,
    mu: f64,
    sigma2: f64,
    state: &[f64],
    n: &[f64],
    nu: &[f64],
    noisy: &mut [f64],
    grad: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let sigma = sigma2.sqrt();
    for i in 0..state.len() {
        noisy[i] = state[i] + sigma * n[i];
    }
    checked_score(score, noisy, grad)?;
    let c = (2.0 * mu - sigma2).max(0.0).sqrt();
    for i in 0..state.len() {
        out[i] = noisy[i] + mu * grad[i] + c * nu[i];
    }
    Ok(())
}

/// `x̃ = state + σ n`, `out = x̃ + (σ²/2) Ψ(x̃)` for a given `n`.
pub fn half_denoise_update<S: ScoreField + ?Sized>(
    score: &S,
    sigma2: f64,
    state: &[f64],
    n: &[f64],
    noisy: &mut [f64],
    grad: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let sigma = sigma2.sqrt();
    for i in 0..state.len() {
        noisy[i] = state[i] + sigma * n[i];
    }
    checked_score(score, noisy, grad)?;
    let half = sigma2 / 2.0;
    for i in 0..state.len() {
        out[i] = noisy[i] + half * grad[i];
    }
    Ok(())
}

fn check_step_input<S: ScoreField + ?Sized>(score: &S, state: &[f64]) -> Result<usize> {
    Error::check_dim(score.dim(), state.len())?;
    Ok(state.len())
}

/// One basic Langevin step drawing `ν` from `rng` (`dim` variates).
pub fn basic_langevin_step<S: ScoreField + ?Sized>(
    score: &S,
    mu: f64,
    state: &[f64],
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "must be positive"));
    }
    let dim = check_step_input(score, state)?;
    let mut nu = vec![0.0; dim];
    rng.fill_normal(&mut nu);
    let mut grad = vec![0.0; dim];
    let mut out = vec![0.0; dim];
    basic_langevin_update(score, mu, state, &nu, &mut grad, &mut out)?;
    Ok(out)
}

/// One noise-corrected step drawing `n` then `ν` from `rng` (`2 · dim`
/// variates).
pub fn noise_corrected_step<S: ScoreField + ?Sized>(
    noisy_score: &S,
    mu: f64,
    sigma2: f64,
    state: &[f64],
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    if !(mu > 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::invalid("mu", "mu must be positive and sigma2 nonnegative"));
    }
    if 2.0 * mu < sigma2 * (1.0 - 1e-12) {
        return Err(Error::StepSizeCondition { mu, sigma2 });
    }
    let dim = check_step_input(noisy_score, state)?;
    let mut n = vec![0.0; dim];
    let mut nu = vec![0.0; dim];
    rng.fill_normal(&mut n);
    rng.fill_normal(&mut nu);
    let (mut noisy, mut grad, mut out) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    noise_corrected_update(noisy_score, mu, sigma2, state, &n, &nu, &mut noisy, &mut grad, &mut out)?;
    Ok(out)
}

/// One half-denoising step drawing `n` from `rng` (`dim` variates).
pub fn half_denoise_step<S: ScoreField + ?Sized>(
    noisy_score: &S,
    sigma2: f64,
    state: &[f64],
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", "must be positive"));
    }
    let dim = check_step_input(noisy_score, state)?;
    let mut n = vec![0.0; dim];
    rng.fill_normal(&mut n);
    let (mut noisy, mut grad, mut out) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    half_denoise_update(noisy_score, sigma2, state, &n, &mut noisy, &mut grad, &mut out)?;
    Ok(out)
}
