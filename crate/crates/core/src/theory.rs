//! Exact covariance dynamics of the samplers on a centered Gaussian target.
//!
//! With a Gaussian score `Ψ(z) = −Σ_s⁻¹ z` (`Σ_s` the covariance the score
//! believes in) and correction noise `σ²`, one noise-corrected step is linear:
//! `x' = M x + σ M n + √(2μ − σ²) ν` with `M = I − μ Σ_s⁻¹`. Covariances
//! therefore evolve as `Σ' = M Σ M + σ² M² + (2μ − σ²) I`, whose fixed point is
//! `Σ = −σ² I + Σ_s [I − (μ/2) Σ_s⁻¹]⁻¹`. `σ² = 0` gives plain Langevin with
//! the same score, so one formula covers the proposed sampler (`Σ_s = Σ_x +
//! σ² I`), misspecified basic Langevin (`Σ_s = Σ_x + σ² I`, no correction) and
//! the oracle (`Σ_s = Σ_x`, no correction).
//!
//! `M` and `Σ_s` share eigenvectors, so every matrix function is evaluated in
//! the eigenbasis of `Σ_s`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigen_map, frobenius, spd_eigen};

/// Frobenius change below which the iterated recursion counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-10;

fn check_step(mu: f64, sigma2: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "must be positive"));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("sigma2", "must be nonnegative"));
    }
    if 2.0 * mu < sigma2 * (1.0 - 1e-12) {
        return Err(Error::StepSizeCondition { mu, sigma2 });
    }
    Ok(())
}

/// `M = I − μ Σ_s⁻¹`.
pub fn drift_matrix(sigma_score: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(sigma_score, "sigma_score")?;
    Ok(eigen_map(&eig, |l| 1.0 - mu / l))
}

/// One exact covariance update `Σ' = M Σ M + σ² M² + (2μ − σ²) I`.
pub fn covariance_recursion_step(
    sigma_cur: &DMatrix<f64>,
    sigma_score: &DMatrix<f64>,
    mu: f64,
    sigma2: f64,
) -> Result<DMatrix<f64>> {
    check_step(mu, sigma2)?;
    if sigma_cur.shape() != sigma_score.shape() {
        return Err(Error::DimensionMismatch {
            expected: sigma_score.nrows(),
            actual: sigma_cur.nrows(),
        });
    }
    let m = drift_matrix(sigma_score, mu)?;
    let dim = m.nrows();
    let next = &m * sigma_cur * &m + (&m * &m) * sigma2 + DMatrix::identity(dim, dim) * (2.0 * mu - sigma2);
    Ok((&next + next.transpose()) * 0.5)
}

/// Closed-form fixed point `−σ² I + Σ_s [I − (μ/2) Σ_s⁻¹]⁻¹`.
pub fn stationary_covariance(sigma_score: &DMatrix<f64>, mu: f64, sigma2_correction: f64) -> Result<DMatrix<f64>> {
    check_step(mu, sigma2_correction)?;
    let eig = spd_eigen(sigma_score, "sigma_score")?;
    if let Some(l) = eig.eigenvalues.iter().find(|&&l| (1.0 - mu / (2.0 * l)).abs() < 1e-12) {
        return Err(Error::Singular(format!(
            "I - (mu/2) sigma_score^-1 is singular (eigenvalue {l}, mu {mu})"
        )));
    }
    Ok(eigen_map(&eig, |l| -sigma2_correction + l / (1.0 - mu / (2.0 * l))))
}

/// Iterates the recursion from `start` until the Frobenius change drops below
/// `tol`. Returns the limit and the number of updates applied.
pub fn iterate_to_stationary(
    start: &DMatrix<f64>,
    sigma_score: &DMatrix<f64>,
    mu: f64,
    sigma2: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, usize)> {
    check_step(mu, sigma2)?;
    let m = drift_matrix(sigma_score, mu)?;
    let dim = m.nrows();
    if start.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: start.nrows(),
        });
    }
    let constant = (&m * &m) * sigma2 + DMatrix::identity(dim, dim) * (2.0 * mu - sigma2);
    let mut cur = start.clone();
    for k in 1..=max_iter {
        let next = &m * &cur * &m + &constant;
        let change = frobenius(&(&next - &cur));
        cur = next;
        if change < tol {
            return Ok(((&cur + cur.transpose()) * 0.5, k));
        }
    }
    Err(Error::Degenerate(format!(
        "covariance recursion did not settle within {max_iter} iterations"
    )))
}

/// Spectral norm of `M = I − μ Σ_s⁻¹`. A value in `(0, 1)` certifies that the
/// recursion contracts any perturbation: `ε' = M ε M`.
pub fn contraction_check(sigma_score: &DMatrix<f64>, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", "must be positive"));
    }
    let eig = spd_eigen(sigma_score, "sigma_score")?;
    Ok(eig.eigenvalues.iter().map(|&l| (1.0 - mu / l).abs()).fold(0.0, f64::max))
}

/// First-order (in `μ`) stationary biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPredictions {
    /// `(μ/2) I`
    #[serde(with = "crate::linalg::rows")]
    pub proposed: DMatrix<f64>,
    /// `(σ² + μ/2) I`
    #[serde(with = "crate::linalg::rows")]
    pub basic: DMatrix<f64>,
    /// `(μ/2) I`
    #[serde(with = "crate::linalg::rows")]
    pub oracle: DMatrix<f64>,
    /// basic / proposed, `1 + 2σ²/μ`; exactly 5 at `μ = σ²/2`.
    pub ratio: f64,
}

pub fn bias_predictions(sigma_x: &DMatrix<f64>, mu: f64, sigma2: f64) -> Result<BiasPredictions> {
    if !(mu > 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::invalid("mu", "mu must be positive and sigma2 nonnegative"));
    }
    let dim = sigma_x.nrows();
    let eye = DMatrix::<f64>::identity(dim, dim);
    Ok(BiasPredictions {
        proposed: &eye * (mu / 2.0),
        basic: &eye * (sigma2 + mu / 2.0),
        oracle: &eye * (mu / 2.0),
        ratio: 1.0 + 2.0 * sigma2 / mu,
    })
}

/// Which sampler a theory report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Noise-corrected with the noisy-data score.
    Proposed,
    /// Plain Langevin with the noisy-data score.
    Basic,
    /// Plain Langevin with the true score.
    Oracle,
}

impl Arm {
    /// `(score covariance, correction σ²)` for this arm.
    pub fn score_setup(self, sigma_x: &DMatrix<f64>, sigma2: f64) -> (DMatrix<f64>, f64) {
        let dim = sigma_x.nrows();
        let noisy = sigma_x + DMatrix::<f64>::identity(dim, dim) * sigma2;
        match self {
            Arm::Proposed => (noisy, sigma2),
            Arm::Basic => (noisy, 0.0),
            Arm::Oracle => (sigma_x.clone(), 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTheoryReport {
    pub arm: Arm,
    pub mu: f64,
    pub sigma2: f64,
    #[serde(with = "crate::linalg::rows")]
    pub stationary_cov: DMatrix<f64>,
    /// `stationary_cov − Σ_x`
    #[serde(with = "crate::linalg::rows")]
    pub bias: DMatrix<f64>,
    #[serde(with = "crate::linalg::rows")]
    pub predicted_first_order_bias: DMatrix<f64>,
    pub spectral_norm_m: f64,
    /// Recursion updates from a zero covariance until stationary.
    pub converged_in: usize,
}

/// Theory for one arm targeting `N(0, Σ_x)` with noise level `σ²` and step `μ`.
pub fn gaussian_theory_report(sigma_x: &DMatrix<f64>, mu: f64, sigma2: f64, arm: Arm) -> Result<GaussianTheoryReport> {
    let (sigma_score, correction) = arm.score_setup(sigma_x, sigma2);
    let stationary_cov = stationary_covariance(&sigma_score, mu, correction)?;
    let dim = sigma_x.nrows();
    let (_, converged_in) = iterate_to_stationary(
        &DMatrix::zeros(dim, dim),
        &sigma_score,
        mu,
        correction,
        STATIONARY_TOL,
        10_000_000,
    )?;
    let predictions = bias_predictions(sigma_x, mu, sigma2)?;
    let predicted_first_order_bias = match arm {
        Arm::Proposed => predictions.proposed,
        Arm::Basic => predictions.basic,
        Arm::Oracle => predictions.oracle,
    };
    Ok(GaussianTheoryReport {
        arm,
        mu,
        sigma2,
        bias: &stationary_cov - sigma_x,
        stationary_cov,
        predicted_first_order_bias,
        spectral_norm_m: contraction_check(&sigma_score, mu)?,
        converged_in,
    })
}
