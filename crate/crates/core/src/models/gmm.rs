use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{SampleSet, ScoreField};
use crate::error::{Error, Result};
use crate::rng::Stream;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One isotropic kernel `weight · N(mean, variance · I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: f64,
}

/// A weighted mixture of isotropic Gaussians, optionally convolved with
/// `N(0, noise_variance · I)`.
///
/// The convolution is kept separate from the component variances: component
/// `k` has effective variance `variance_k + noise_variance`. Adding noise twice
/// therefore sums the noise levels before touching the variances, so
/// `m.noisy_model(a).noisy_model(b)` and `m.noisy_model(a + b)` evaluate
/// identically for a noise-free `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    dim: usize,
    components: Vec<Component>,
    noise_variance: f64,
}

impl GmmModel {
    /// Weights must be nonnegative with at least one positive and sum to one
    /// within 1e-12. Zero-weight components are kept but never contribute.
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self> {
        GmmModel::with_noise(dim, components, 0.0)
    }

    pub fn with_noise(dim: usize, components: Vec<Component>, noise_variance: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if components.is_empty() {
            return Err(Error::invalid("components", "at least one component required"));
        }
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            if !(c.weight >= 0.0) || !c.weight.is_finite() {
                return Err(Error::invalid("weight", format!("component {k}: {} is not a probability", c.weight)));
            }
            if !(c.variance > 0.0) || !c.variance.is_finite() {
                return Err(Error::invalid("variance", format!("component {k}: {} must be positive", c.variance)));
            }
            Error::check_dim(dim, c.mean.len())?;
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::invalid("mean", format!("component {k} is not finite")));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid("weight", format!("weights sum to {total}, not 1")));
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::invalid("noise_variance", "must be nonnegative"));
        }
        Ok(GmmModel {
            dim,
            components,
            noise_variance,
        })
    }

    /// Centered `N(0, variance · I)`.
    pub fn gaussian(dim: usize, variance: f64) -> Result<Self> {
        GmmModel::new(
            dim,
            vec![Component {
                weight: 1.0,
                mean: vec![0.0; dim],
                variance,
            }],
        )
    }

    /// Benchmark mixture in two dimensions.
    ///
    /// `kernels` equal-weight kernels with means on the unit circle (a single
    /// kernel sits at the origin). The shared kernel variance is chosen so the
    /// per-coordinate variances of the mixture are centred on 1; for 1 to 4
    /// kernels they lie in `[0.5, 1.5]`.
    pub fn canonical(kernels: usize) -> Result<Self> {
        if kernels == 0 {
            return Err(Error::invalid("kernels", "must be at least 1"));
        }
        let means: Vec<Vec<f64>> = if kernels == 1 {
            vec![vec![0.0, 0.0]]
        } else {
            (0..kernels)
                .map(|k| {
                    let angle = 2.0 * PI * k as f64 / kernels as f64;
                    vec![angle.cos(), angle.sin()]
                })
                .collect()
        };
        let spread: Vec<f64> = (0..2)
            .map(|i| {
                let mean = means.iter().map(|m| m[i]).sum::<f64>() / kernels as f64;
                means.iter().map(|m| (m[i] - mean).powi(2)).sum::<f64>() / kernels as f64
            })
            .collect();
        let variance = 1.0 - 0.5 * (spread[0] + spread[1]);
        if !(variance > 0.0) {
            return Err(Error::invalid("kernels", format!("{kernels} kernels leave no room for a positive kernel variance")));
        }
        let weight = 1.0 / kernels as f64;
        let components = means
            .into_iter()
            .map(|mean| Component { weight, mean, variance })
            .collect();
        GmmModel::new(2, components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Variance of the Gaussian noise convolved into this model.
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Variance of component `k` including the convolved noise.
    pub fn effective_variance(&self, k: usize) -> f64 {
        self.components[k].variance + self.noise_variance
    }

    /// Density of `x + n` with `x` from this model and `n ~ N(0, sigma2 · I)`.
    /// Its score is the noisy-data score.
    pub fn noisy_model(&self, sigma2: f64) -> Result<GmmModel> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2", format!("{sigma2} must be positive")));
        }
        Ok(GmmModel {
            dim: self.dim,
            components: self.components.clone(),
            noise_variance: self.noise_variance + sigma2,
        })
    }

    /// The same mixture with the convolved noise folded into its components.
    pub fn without_noise_tag(&self) -> GmmModel {
        let components = (0..self.components.len())
            .map(|k| Component {
                weight: self.components[k].weight,
                mean: self.components[k].mean.clone(),
                variance: self.effective_variance(k),
            })
            .collect();
        GmmModel {
            dim: self.dim,
            components,
            noise_variance: 0.0,
        }
    }

    #[inline]
    fn component_log_density(&self, k: usize, point: &[f64]) -> f64 {
        let c = &self.components[k];
        let v = self.effective_variance(k);
        let d2: f64 = point.iter().zip(&c.mean).map(|(x, m)| (x - m) * (x - m)).sum();
        c.weight.ln() - 0.5 * self.dim as f64 * (2.0 * PI * v).ln() - 0.5 * d2 / v
    }

    /// Log of the mixture density via log-sum-exp.
    pub fn log_pdf(&self, point: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim, point.len())?;
        let logs: Vec<f64> = (0..self.components.len())
            .filter(|&k| self.components[k].weight > 0.0)
            .map(|k| self.component_log_density(k, point))
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Ok(max);
        }
        Ok(max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln())
    }

    pub fn pdf(&self, point: &[f64]) -> Result<f64> {
        self.log_pdf(point).map(f64::exp)
    }

    /// Analytic gradient of [`log_pdf`](Self::log_pdf): the responsibility-
    /// weighted sum of component scores `(mean_k - point) / v_k`.
    pub fn score(&self, point: &[f64]) -> Result<Vec<f64>> {
        ScoreField::eval(self, point)
    }

    /// Responsibilities `p(k | point)`.
    pub fn responsibilities(&self, point: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim, point.len())?;
        let logs: Vec<f64> = (0..self.components.len())
            .map(|k| {
                if self.components[k].weight > 0.0 {
                    self.component_log_density(k, point)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut mean = DVector::zeros(self.dim);
        for c in &self.components {
            mean += DVector::from_column_slice(&c.mean) * c.weight;
        }
        mean
    }

    /// Analytic covariance `Σ w_k (v_k I + m_k m_kᵀ) - m̄ m̄ᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for (k, c) in self.components.iter().enumerate() {
            let m = DVector::from_column_slice(&c.mean);
            cov += (DMatrix::identity(self.dim, self.dim) * self.effective_variance(k) + &m * m.transpose()) * c.weight;
        }
        cov - &mean * mean.transpose()
    }

    /// `n` i.i.d. draws: a component by weight, then a Gaussian draw from it.
    pub fn exact_sample(&self, n: usize, rng: &mut Stream) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        let mut cumulative = Vec::with_capacity(self.components.len());
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            cumulative.push(acc);
        }
        let last_positive = self
            .components
            .iter()
            .rposition(|c| c.weight > 0.0)
            .expect("validated: some weight is positive");
        let sds: Vec<f64> = (0..self.components.len()).map(|k| self.effective_variance(k).sqrt()).collect();
        let mut points = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            let u = rng.uniform();
            // A zero-weight component repeats its predecessor's cumulative
            // value, so it can never be the first bound exceeding `u`.
            let k = cumulative.iter().position(|&c| u < c).unwrap_or(last_positive);
            for &m in &self.components[k].mean {
                points.push(m + sds[k] * rng.normal());
            }
        }
        Ok(SampleSet::new(self.dim, points)?
            .with_provenance("generator", "exact_sample")
            .with_provenance("components", self.components.len()))
    }
}

impl ScoreField for GmmModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        // Streaming softmax over components: rescale the running sums whenever
        // a larger log-density shows up.
        out.fill(0.0);
        let mut max = f64::NEG_INFINITY;
        let mut total = 0.0;
        for k in 0..self.components.len() {
            let c = &self.components[k];
            if c.weight <= 0.0 {
                continue;
            }
            let l = self.component_log_density(k, point);
            if l > max {
                let scale = (max - l).exp();
                total *= scale;
                out.iter_mut().for_each(|o| *o *= scale);
                max = l;
            }
            let e = (l - max).exp();
            total += e;
            let inv_v = 1.0 / self.effective_variance(k);
            for ((o, x), m) in out.iter_mut().zip(point).zip(&c.mean) {
                *o += e * (m - x) * inv_v;
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
    }
}
