use super::ScoreField;
use crate::error::{Error, Result};

/// Posterior-mean denoiser for isotropic Gaussian noise:
/// `E{x | x̃} = x̃ + σ² Ψ_x̃(x̃)`, where `noisy_score` is the score of the noisy
/// data.
pub fn tweedie_denoise<S>(noisy_score: &S, sigma2: f64, x_noisy: &[f64]) -> Result<Vec<f64>>
where
    S: ScoreField + ?Sized,
{
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", format!("{sigma2} must be positive")));
    }
    let grad = noisy_score.eval(x_noisy)?;
    Ok(x_noisy.iter().zip(&grad).map(|(x, g)| x + sigma2 * g).collect())
}
