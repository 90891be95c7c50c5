use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{Init, SamplerConfig, Variant};
use super::step::{basic_langevin_update, half_denoise_update, noise_corrected_update, DIVERGENCE_BOUND};
use crate::error::{Error, Result};
use crate::models::{SampleSet, ScoreField};
use crate::rng::Stream;

/// Steps one chain in place; the streaming counterpart of [`run_chain`].
pub struct ChainRunner<'a, S: ScoreField + ?Sized> {
    config: SamplerConfig,
    score: &'a S,
    rng: Stream,
    state: Vec<f64>,
    next: Vec<f64>,
    n: Vec<f64>,
    nu: Vec<f64>,
    noisy: Vec<f64>,
    grad: Vec<f64>,
    step: usize,
}

impl<'a, S: ScoreField + ?Sized> ChainRunner<'a, S> {
    /// Validates the config and draws `x_0`.
    pub fn new(config: &SamplerConfig, score: &'a S) -> Result<Self> {
        config.validate()?;
        let dim = score.dim();
        if matches!(config.variant, Variant::NoiseCorrected | Variant::HalfDenoise)
            && (score.noise_variance() - config.sigma2).abs() > 1e-12 * config.sigma2.max(1.0)
        {
            log::warn!(
                "score noise variance {} differs from correction sigma2 {}",
                score.noise_variance(),
                config.sigma2
            );
        }
        let mut rng = Stream::new(config.seed, config.stream);
        let state = match &config.init {
            Init::StandardNormal => {
                let mut x = vec![0.0; dim];
                rng.fill_normal(&mut x);
                x
            }
            Init::Point { point } => {
                Error::check_dim(dim, point.len())?;
                point.clone()
            }
            Init::Gaussian { mean, variance } => {
                Error::check_dim(dim, mean.len())?;
                let sd = variance.sqrt();
                mean.iter().map(|m| m + sd * rng.normal()).collect()
            }
        };
        Ok(ChainRunner {
            config: config.clone(),
            score,
            rng,
            next: vec![0.0; dim],
            n: vec![0.0; dim],
            nu: vec![0.0; dim],
            noisy: vec![0.0; dim],
            grad: vec![0.0; dim],
            state,
            step: 0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Number of updates applied so far.
    pub fn step_index(&self) -> usize {
        self.step
    }

    /// The noisy point `x̃_t` evaluated by the last noise-corrected or
    /// half-denoising update.
    pub fn last_noisy_point(&self) -> &[f64] {
        &self.noisy
    }

    pub fn advance(&mut self) -> Result<()> {
        let c = &self.config;
        let outcome = match c.variant {
            Variant::Basic => {
                self.rng.fill_normal(&mut self.nu);
                basic_langevin_update(self.score, c.mu, &self.state, &self.nu, &mut self.grad, &mut self.next)
            }
            Variant::NoiseCorrected => {
                self.rng.fill_normal(&mut self.n);
                self.rng.fill_normal(&mut self.nu);
                noise_corrected_update(
                    self.score,
                    c.mu,
                    c.sigma2,
                    &self.state,
                    &self.n,
                    &self.nu,
                    &mut self.noisy,
                    &mut self.grad,
                    &mut self.next,
                )
            }
            Variant::HalfDenoise => {
                self.rng.fill_normal(&mut self.n);
                half_denoise_update(
                    self.score,
                    c.sigma2,
                    &self.state,
                    &self.n,
                    &mut self.noisy,
                    &mut self.grad,
                    &mut self.next,
                )
            }
        };
        let step = self.step + 1;
        match outcome {
            Err(Error::Divergence { state, .. }) => return Err(Error::Divergence { step, state }),
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        if self.next.iter().any(|x| !(x.abs() <= DIVERGENCE_BOUND)) {
            return Err(Error::Divergence {
                step,
                state: self.next.clone(),
            });
        }
        std::mem::swap(&mut self.state, &mut self.next);
        self.step = step;
        Ok(())
    }
}

/// A full trajectory `x_0 ..= x_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    dim: usize,
    states: Vec<f64>,
    pub config: SamplerConfig,
    /// Noise variance of the score field that drove the chain.
    pub score_tag: f64,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.dim..(t + 1) * self.dim]
    }

    pub fn states(&self) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.dim)
    }

    /// The last `⌈fraction · len⌉` states.
    pub fn tail_samples(&self, fraction: f64) -> Result<SampleSet> {
        if self.len() < 2 {
            return Err(Error::Degenerate("chain needs at least 2 states for a tail".into()));
        }
        let keep = tail_count(self.len(), fraction)?;
        let start = self.len() - keep;
        Ok(SampleSet::new(self.dim, self.states[start * self.dim..].to_vec())?
            .with_provenance("generator", self.config.variant.name())
            .with_provenance("seed", self.config.seed)
            .with_provenance("mu", self.config.mu)
            .with_provenance("sigma2", self.config.sigma2)
            .with_provenance("score_noise_variance", self.score_tag)
            .with_provenance("tail_fraction", fraction))
    }

    /// CSV with columns `step, x0, x1, ...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string()];
        header.extend((0..self.dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (t, s) in self.states().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// `⌈fraction · len⌉`, guarding against `0.3 · 10 = 3.0000000000000004`.
pub(crate) fn tail_count(len: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("fraction", format!("{fraction} is outside (0, 1]")));
    }
    let exact = fraction * len as f64;
    let keep = (exact - exact * 1e-12).ceil() as usize;
    Ok(keep.clamp(1, len))
}

/// Runs `n_steps` updates and keeps every state.
pub fn run_chain<S: ScoreField + ?Sized>(config: &SamplerConfig, score: &S) -> Result<Chain> {
    let dim = score.dim();
    let mut states = Vec::with_capacity((config.n_steps + 1) * dim);
    run_chain_visit(config, score, |_, s| states.extend_from_slice(s))?;
    Ok(Chain {
        dim,
        states,
        config: config.clone(),
        score_tag: score.noise_variance(),
    })
}

/// Runs a chain, calling `visit(t, x_t)` for `t = 0 ..= n_steps`.
pub fn run_chain_visit<S, F>(config: &SamplerConfig, score: &S, mut visit: F) -> Result<()>
where
    S: ScoreField + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let mut runner = ChainRunner::new(config, score)?;
    visit(0, runner.state());
    for t in 1..=config.n_steps {
        runner.advance()?;
        visit(t, runner.state());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FnScore, GmmModel};

    fn gauss_noisy() -> GmmModel {
        GmmModel::gaussian(1, 1.0).unwrap().noisy_model(0.3).unwrap()
    }

    #[test]
    fn zero_steps_is_init_only() {
        let c = SamplerConfig::basic(0.1, 0, 1).unwrap();
        let chain = run_chain(&c, &gauss_noisy()).unwrap();
        assert_eq!(chain.len(), 1);
        assert!(chain.tail_samples(1.0).is_err());
    }

    #[test]
    fn seeds_determine_chains() {
        let m = gauss_noisy();
        let c = SamplerConfig::half_denoise(0.3, 500, 7).unwrap();
        let a = run_chain(&c, &m).unwrap();
        let b = run_chain(&c, &m).unwrap();
        assert_eq!(a, b);
        let mut other = c.clone();
        other.seed = 8;
        assert_ne!(run_chain(&other, &m).unwrap().state(500), a.state(500));
    }

    #[test]
    fn tail_ceiling_rule() {
        assert_eq!(tail_count(10, 0.3).unwrap(), 3);
        assert_eq!(tail_count(10, 1.0).unwrap(), 10);
        assert_eq!(tail_count(1_000_001, 0.3).unwrap(), 300_001);
        assert_eq!(tail_count(7, 0.01).unwrap(), 1);
        assert!(tail_count(10, 0.0).is_err());
        assert!(tail_count(10, 1.5).is_err());
        let c = SamplerConfig::basic(0.1, 9, 1).unwrap();
        let chain = run_chain(&c, &gauss_noisy()).unwrap();
        let tail = chain.tail_samples(0.3).unwrap();
        assert_eq!(tail.len(), 3);
        assert_eq!(tail.point(0), chain.state(7));
        assert_eq!(chain.tail_samples(1.0).unwrap().len(), 10);
    }

    #[test]
    fn point_init_and_dim_check() {
        let m = GmmModel::gaussian(2, 1.0).unwrap();
        let c = SamplerConfig::basic(0.1, 3, 1).unwrap().with_init(Init::Point { point: vec![0.5, -0.5] });
        assert_eq!(run_chain(&c, &m).unwrap().state(0), &[0.5, -0.5]);
        let bad = SamplerConfig::basic(0.1, 3, 1).unwrap().with_init(Init::Point { point: vec![0.5] });
        assert!(matches!(run_chain(&bad, &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn divergence_reports_step() {
        let repulsive = FnScore::new(1, 0.0, |x: &[f64], out: &mut [f64]| out[0] = 10.0 * x[0]);
        let c = SamplerConfig::basic(0.5, 1000, 1).unwrap().with_init(Init::Point { point: vec![1.0] });
        match run_chain(&c, &repulsive) {
            Err(Error::Divergence { step, state }) => {
                assert!(step > 1 && step < 1000);
                assert!(state[0].abs() > DIVERGENCE_BOUND);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_layout() {
        let c = SamplerConfig::basic(0.1, 2, 1).unwrap();
        let chain = run_chain(&c, &GmmModel::gaussian(2, 1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,x0,x1");
        assert_eq!(lines.len(), 4);
        let first: Vec<f64> = lines[1].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, chain.state(0));
    }
}
