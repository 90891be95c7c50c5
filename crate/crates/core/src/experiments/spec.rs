use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::GmmModel;
use crate::samplers::{SamplerConfig, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    GmmBias,
    GaussianBias,
    Mixing,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::GmmBias => "gmm_bias",
            Scenario::GaussianBias => "gaussian_bias",
            Scenario::Mixing => "mixing",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "gmm_bias" => Ok(Scenario::GmmBias),
            "gaussian_bias" => Ok(Scenario::GaussianBias),
            "mixing" => Ok(Scenario::Mixing),
            _ => Err(Error::invalid("scenario", format!("unknown scenario `{s}`"))),
        }
    }
}

/// A compared sampler (or the exact-sampling reference).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Noise-corrected Langevin on the noisy-data score.
    Proposed,
    /// Plain Langevin on the noisy-data score, same step.
    Basic,
    /// Plain Langevin on the noisy-data score, a quarter of the step.
    BasicMu4,
    /// Plain Langevin on the noise-free score, same step.
    Oracle,
    /// Plain Langevin on the noise-free score, a quarter of the step.
    OracleMu4,
    /// Independent exact draws from the target.
    GroundTruth,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Proposed,
        Method::Basic,
        Method::BasicMu4,
        Method::Oracle,
        Method::OracleMu4,
        Method::GroundTruth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Basic => "basic",
            Method::BasicMu4 => "basic_mu4",
            Method::Oracle => "oracle",
            Method::OracleMu4 => "oracle_mu4",
            Method::GroundTruth => "ground_truth",
        }
    }

    /// Whether the sampler sees the noisy-data score.
    pub fn uses_noisy_score(self) -> bool {
        matches!(self, Method::Proposed | Method::Basic | Method::BasicMu4)
    }

    /// Sampler settings at noise level `sigma2` with proposed step `mu`;
    /// `None` for the exact-sampling reference.
    pub fn sampler_config(self, sigma2: f64, mu: f64, n_steps: usize, seed: u64) -> Result<Option<SamplerConfig>> {
        let config = match self {
            Method::Proposed => {
                if (2.0 * mu - sigma2).abs() <= 1e-12 * sigma2 {
                    SamplerConfig::new(Variant::HalfDenoise, None, sigma2, n_steps, seed)?
                } else {
                    SamplerConfig::new(Variant::NoiseCorrected, Some(mu), sigma2, n_steps, seed)?
                }
            }
            Method::Basic | Method::Oracle => SamplerConfig::basic(mu, n_steps, seed)?,
            Method::BasicMu4 | Method::OracleMu4 => SamplerConfig::basic(mu / 4.0, n_steps, seed)?,
            Method::GroundTruth => return Ok(None),
        };
        Ok(Some(config))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::invalid("methods", format!("unknown method `{s}`")))
    }
}

/// Noise-level label used in plots: `HighVar` for 0.3, `LowVar` for 0.1.
pub fn level_name(sigma2: f64) -> String {
    if sigma2 == 0.3 {
        "HighVar".into()
    } else if sigma2 == 0.1 {
        "LowVar".into()
    } else {
        format!("sigma2={sigma2}")
    }
}

/// Everything a report depends on. Running the same spec twice gives
/// bit-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Kernel count of the benchmark mixture (`gmm_bias`, `mixing`).
    pub kernels: usize,
    /// Explicit target replacing the benchmark mixture.
    #[serde(default)]
    pub model: Option<GmmModel>,
    /// Dimension of the white Gaussian target (`gaussian_bias`).
    pub dim: usize,
    /// Noise levels; each is run with every method.
    pub sigma2: Vec<f64>,
    /// Proposed step size; `σ²/2` per level when absent.
    #[serde(default)]
    pub mu: Option<f64>,
    pub methods: Vec<Method>,
    pub n_steps: usize,
    /// Ensemble size (`mixing`).
    pub n_trials: usize,
    /// Independent repetitions behind the standard errors.
    pub replicates: usize,
    pub seed: u64,
    pub tail_fraction: f64,
    pub bandwidth: f64,
    pub spacing: f64,
    pub bootstrap: usize,
    /// Variance of the concentrated mixing initializer.
    pub init_variance: f64,
}

pub const DESK_STEPS: usize = 100_000;
pub const PAPER_STEPS: usize = 1_000_000;

impl ExperimentSpec {
    /// Desk-scale defaults for `scenario`.
    pub fn defaults(scenario: Scenario) -> Self {
        let mut spec = ExperimentSpec {
            scenario,
            kernels: 2,
            model: None,
            dim: 5,
            sigma2: vec![0.3, 0.1],
            mu: None,
            methods: Method::ALL.to_vec(),
            n_steps: DESK_STEPS,
            n_trials: 10_000,
            replicates: 5,
            seed: 0,
            tail_fraction: 0.3,
            bandwidth: 0.1,
            spacing: 0.1,
            bootstrap: 200,
            init_variance: 0.01,
        };
        match scenario {
            Scenario::GmmBias => {}
            Scenario::GaussianBias => {
                spec.sigma2 = vec![0.3];
                spec.methods = vec![Method::Proposed, Method::Basic, Method::Oracle, Method::GroundTruth];
            }
            Scenario::Mixing => {
                spec.n_steps = 100;
                spec.replicates = 1;
                spec.methods = vec![Method::Proposed, Method::Basic, Method::Oracle];
            }
        }
        spec
    }

    /// Raises chain lengths of the bias scenarios to a million steps.
    pub fn paper_scale(mut self) -> Self {
        if self.scenario != Scenario::Mixing {
            self.n_steps = PAPER_STEPS;
        }
        self
    }

    /// Proposed step size at `sigma2`.
    pub fn mu_at(&self, sigma2: f64) -> f64 {
        self.mu.unwrap_or(sigma2 / 2.0)
    }

    /// The mixture targeted by `gmm_bias` and `mixing`.
    pub fn target_mixture(&self) -> Result<GmmModel> {
        match &self.model {
            Some(m) => Ok(m.clone()),
            None => GmmModel::canonical(self.kernels),
        }
    }

    /// Methods that run a chain, in request order.
    pub fn chain_methods(&self) -> Vec<Method> {
        self.methods.iter().copied().filter(|m| *m != Method::GroundTruth).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Error::Config {
            key: key.to_string(),
            message,
        };
        if self.sigma2.is_empty() {
            return Err(bad("sigma2", "at least one noise level is required".into()));
        }
        for &s in &self.sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(bad("sigma2", format!("{s} must be positive")));
            }
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(bad("mu", format!("{mu} must be positive")));
            }
        }
        for &s in &self.sigma2 {
            for m in &self.methods {
                m.sampler_config(s, self.mu_at(s), 1, 0)?;
            }
        }
        if self.methods.is_empty() {
            return Err(bad("methods", "at least one method is required".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(bad("methods", format!("`{m}` listed twice")));
            }
        }
        if self.n_steps == 0 {
            return Err(bad("steps", "must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(bad("replicates", "must be at least 1".into()));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(bad("tail_fraction", format!("{} is outside (0, 1]", self.tail_fraction)));
        }
        match self.scenario {
            Scenario::GmmBias | Scenario::Mixing => {
                let model = self.target_mixture().map_err(|e| bad("kernels", e.to_string()))?;
                if model.dim() != 2 {
                    return Err(bad("model", format!("mixture must be 2-dimensional, got {}", model.dim())));
                }
                if model.noise_variance() != 0.0 {
                    return Err(bad("model", "target mixture must be noise free".into()));
                }
            }
            Scenario::GaussianBias => {
                if self.dim == 0 {
                    return Err(bad("dim", "must be at least 1".into()));
                }
            }
        }
        match self.scenario {
            Scenario::GmmBias => {
                if !(self.bandwidth > 0.0) {
                    return Err(bad("bandwidth", "must be positive".into()));
                }
                if !(self.spacing > 0.0) {
                    return Err(bad("spacing", "must be positive".into()));
                }
            }
            Scenario::Mixing => {
                if self.n_trials < 2 {
                    return Err(bad("trials", "need at least 2 trials".into()));
                }
                if self.methods.contains(&Method::GroundTruth) {
                    return Err(bad("methods", "ground_truth has no mixing curve".into()));
                }
                if !(self.init_variance >= 0.0) {
                    return Err(bad("init_variance", "must be nonnegative".into()));
                }
            }
            Scenario::GaussianBias => {}
        }
        Ok(())
    }
}
