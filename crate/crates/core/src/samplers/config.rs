use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Basic,
    NoiseCorrected,
    HalfDenoise,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::NoiseCorrected => "noise_corrected",
            Variant::HalfDenoise => "half_denoise",
        }
    }

    /// Gaussian blocks of length `dim` drawn per step.
    pub fn blocks_per_step(self) -> usize {
        match self {
            Variant::Basic | Variant::HalfDenoise => 1,
            Variant::NoiseCorrected => 2,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "basic" | "langevin" => Ok(Variant::Basic),
            "noise_corrected" => Ok(Variant::NoiseCorrected),
            "half_denoise" | "half_denoising" => Ok(Variant::HalfDenoise),
            other => Err(Error::invalid("variant", format!("unknown variant `{other}`"))),
        }
    }
}

/// Distribution of the initial state `x_0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Init {
    /// `N(0, I)` in the dimension of the score field.
    #[default]
    StandardNormal,
    Point { point: Vec<f64> },
    /// `N(mean, variance · I)`.
    Gaussian { mean: Vec<f64>, variance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub variant: Variant,
    pub mu: f64,
    pub sigma2: f64,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub init: Init,
}

/// Relative slack when comparing `2μ` with `σ²`, so that `μ` parsed from a
/// decimal string equal to half of `σ²` is accepted.
const STEP_SLACK: f64 = 1e-12;

impl SamplerConfig {
    pub fn basic(mu: f64, n_steps: usize, seed: u64) -> Result<Self> {
        SamplerConfig::new(Variant::Basic, Some(mu), 0.0, n_steps, seed)
    }

    pub fn noise_corrected(mu: f64, sigma2: f64, n_steps: usize, seed: u64) -> Result<Self> {
        SamplerConfig::new(Variant::NoiseCorrected, Some(mu), sigma2, n_steps, seed)
    }

    /// Step size is implied as `σ²/2`.
    pub fn half_denoise(sigma2: f64, n_steps: usize, seed: u64) -> Result<Self> {
        SamplerConfig::new(Variant::HalfDenoise, None, sigma2, n_steps, seed)
    }

    /// Builds and validates a config. For half-denoising `mu` may be omitted;
    /// a supplied value must equal `σ²/2`.
    pub fn new(variant: Variant, mu: Option<f64>, sigma2: f64, n_steps: usize, seed: u64) -> Result<Self> {
        let mu = match (variant, mu) {
            (Variant::HalfDenoise, None) => sigma2 / 2.0,
            (Variant::HalfDenoise, Some(mu)) => {
                if (2.0 * mu - sigma2).abs() > STEP_SLACK * sigma2.abs().max(f64::MIN_POSITIVE) {
                    return Err(Error::invalid(
                        "mu",
                        format!("half-denoising fixes mu = sigma2 / 2 = {}, got {mu}", sigma2 / 2.0),
                    ));
                }
                sigma2 / 2.0
            }
            (_, Some(mu)) => mu,
            (_, None) => return Err(Error::invalid("mu", "step size required for this variant")),
        };
        let config = SamplerConfig {
            variant,
            mu,
            sigma2,
            n_steps,
            seed,
            stream: 0,
            init: Init::StandardNormal,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("mu", format!("{} must be positive", self.mu)));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::invalid("sigma2", format!("{} must be nonnegative", self.sigma2)));
        }
        match self.variant {
            Variant::Basic => {}
            Variant::NoiseCorrected => {
                if 2.0 * self.mu < self.sigma2 * (1.0 - STEP_SLACK) {
                    return Err(Error::StepSizeCondition {
                        mu: self.mu,
                        sigma2: self.sigma2,
                    });
                }
            }
            Variant::HalfDenoise => {
                if !(self.sigma2 > 0.0) {
                    return Err(Error::invalid("sigma2", "half-denoising needs sigma2 > 0"));
                }
                if (2.0 * self.mu - self.sigma2).abs() > STEP_SLACK * self.sigma2 {
                    return Err(Error::invalid("mu", "half-denoising requires mu = sigma2 / 2"));
                }
            }
        }
        if let Init::Gaussian { variance, .. } = &self.init {
            if !(*variance >= 0.0) {
                return Err(Error::invalid("init.variance", "must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Weight of the injected noise `ν`.
    pub fn injected_noise_scale(&self) -> f64 {
        match self.variant {
            Variant::Basic => (2.0 * self.mu).sqrt(),
            Variant::NoiseCorrected => (2.0 * self.mu - self.sigma2).max(0.0).sqrt(),
            Variant::HalfDenoise => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_size_condition() {
        assert!(matches!(
            SamplerConfig::noise_corrected(0.1, 0.3, 10, 0),
            Err(Error::StepSizeCondition { .. })
        ));
        assert!(SamplerConfig::noise_corrected(0.15, 0.3, 10, 0).is_ok());
        assert!(SamplerConfig::noise_corrected(0.5, 0.3, 10, 0).is_ok());
    }

    #[test]
    fn half_denoise_mu_is_implied() {
        let c = SamplerConfig::half_denoise(0.3, 10, 0).unwrap();
        assert_eq!(c.mu, 0.15);
        assert!(SamplerConfig::new(Variant::HalfDenoise, Some(0.15), 0.3, 10, 0).is_ok());
        assert!(SamplerConfig::new(Variant::HalfDenoise, Some(0.2), 0.3, 10, 0).is_err());
        assert!(SamplerConfig::half_denoise(0.0, 10, 0).is_err());
    }

    #[test]
    fn nonpositive_mu_rejected() {
        assert!(SamplerConfig::basic(0.0, 10, 0).is_err());
        assert!(SamplerConfig::basic(-1.0, 10, 0).is_err());
        assert!(SamplerConfig::basic(f64::NAN, 10, 0).is_err());
    }

    #[test]
    fn variant_names_parse() {
        for v in [Variant::Basic, Variant::NoiseCorrected, Variant::HalfDenoise] {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("half-denoise".parse::<Variant>().unwrap(), Variant::HalfDenoise);
        assert!("metropolis".parse::<Variant>().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = SamplerConfig::noise_corrected(0.2, 0.3, 100, 7)
            .unwrap()
            .with_init(Init::Gaussian { mean: vec![0.5, 0.0], variance: 0.01 });
        let back: SamplerConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
