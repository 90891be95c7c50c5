use std::io::Write;
use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ScoreField;
use crate::rng::{streams, Stream};
use crate::samplers::{ChainRunner, Init, SamplerConfig};

/// One sampler to run in a mixing ensemble.
pub struct MixingArm<'a> {
    pub label: String,
    /// Variant, `mu` and `sigma2`; steps, init, seed and stream come from
    /// [`MixingOptions`].
    pub config: SamplerConfig,
    pub score: &'a dyn ScoreField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingOptions {
    pub n_trials: usize,
    pub n_steps: usize,
    pub init: Init,
    pub seed: u64,
    /// Bootstrap resamples of the trials; 0 disables the bands.
    pub bootstrap: usize,
    /// Coverage of the percentile band.
    pub level: f64,
}

impl MixingOptions {
    pub fn new(n_trials: usize, n_steps: usize, init: Init, seed: u64) -> Self {
        MixingOptions {
            n_trials,
            n_steps,
            init,
            seed,
            bootstrap: 200,
            level: 0.95,
        }
    }
}

/// Error of the cross-trial covariance against the target, per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingCurve {
    pub label: String,
    pub per_step_error: Vec<f64>,
    /// Percentile bootstrap band; empty when bootstrapping is off.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_trials: usize,
    /// One curve per bootstrap resample. Resamples are shared by every arm
    /// of one [`mixing_curve`] call, so replicate `b` of two curves is paired.
    #[serde(skip)]
    pub replicates: Vec<Vec<f64>>,
}

impl MixingCurve {
    pub fn n_steps(&self) -> usize {
        self.per_step_error.len() - 1
    }

    /// Mean error over `steps`.
    pub fn mean_over(&self, steps: Range<usize>) -> f64 {
        mean_slice(&self.per_step_error[steps])
    }

    /// Mean of `self − other` over `steps`, with a paired percentile band.
    pub fn gap_over(&self, other: &MixingCurve, steps: Range<usize>, level: f64) -> Result<(f64, f64, f64)> {
        if self.replicates.len() != other.replicates.len() || self.per_step_error.len() != other.per_step_error.len() {
            return Err(Error::invalid("curves", "curves come from different ensembles"));
        }
        let point = self.mean_over(steps.clone()) - other.mean_over(steps.clone());
        let gaps: Vec<f64> = self
            .replicates
            .iter()
            .zip(&other.replicates)
            .map(|(a, b)| mean_slice(&a[steps.clone()]) - mean_slice(&b[steps.clone()]))
            .collect();
        let (lo, hi) = percentile_band(gaps, level);
        Ok((point, lo, hi))
    }

    /// CSV rows `step, error, variant`.
    pub fn write_csv<W: Write>(curves: &[MixingCurve], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "error", "variant", "lower", "upper"])?;
        for c in curves {
            for (t, e) in c.per_step_error.iter().enumerate() {
                let band = |v: &[f64]| v.get(t).map(|x| x.to_string()).unwrap_or_default();
                w.write_record(&[t.to_string(), e.to_string(), c.label.clone(), band(&c.lower), band(&c.upper)])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn mean_slice(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn percentile_band(mut v: Vec<f64>, level: f64) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    (at(tail), at(1.0 - tail))
}

/// Least-squares slope of the error against the step index over `steps`,
/// with the percentile band of the same slope over bootstrap replicates.
pub fn trend_slope(curve: &MixingCurve, steps: Range<usize>, level: f64) -> (f64, f64, f64) {
    fn slope(y: &[f64], t0: usize) -> f64 {
        let n = y.len() as f64;
        let tm = t0 as f64 + (n - 1.0) / 2.0;
        let ym = mean_slice(y);
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (k, v) in y.iter().enumerate() {
            let dt = (t0 + k) as f64 - tm;
            sxy += dt * (v - ym);
            sxx += dt * dt;
        }
        sxy / sxx
    }
    let point = slope(&curve.per_step_error[steps.clone()], steps.start);
    let reps = curve.replicates.iter().map(|r| slope(&r[steps.clone()], steps.start)).collect();
    let (lo, hi) = percentile_band(reps, level);
    (point, lo, hi)
}

/// Runs `n_trials` short chains per arm and tracks how fast the ensemble
/// covariance approaches `true_cov`.
///
/// Trial `i` of every arm uses the same random stream, so arms share their
/// initial states and, for variants drawing one block per step, the noise.
pub fn mixing_curve(arms: &[MixingArm<'_>], options: &MixingOptions, true_cov: &DMatrix<f64>) -> Result<Vec<MixingCurve>> {
    if options.n_trials < 2 {
        return Err(Error::invalid("n_trials", "need at least 2 trials"));
    }
    if !(options.level > 0.0 && options.level < 1.0) {
        return Err(Error::invalid("level", "must lie in (0, 1)"));
    }
    let n = options.n_trials;
    let mut boot = Stream::new(options.seed, streams::BOOTSTRAP);
    let counts: Vec<Vec<u32>> = (0..options.bootstrap)
        .map(|_| {
            let mut c = vec![0u32; n];
            for _ in 0..n {
                c[boot.index(n)] += 1;
            }
            c
        })
        .collect();
    arms.iter()
        .map(|arm| {
            let dim = arm.score.dim();
            if true_cov.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: true_cov.nrows(),
                });
            }
            let mut config = arm.config.clone().with_init(options.init.clone());
            config.n_steps = options.n_steps;
            config.seed = options.seed;
            let trajectories = (0..n)
                .into_par_iter()
                .map(|i| {
                    let cfg = config.clone().with_stream(streams::TRIALS + i as u64);
                    let mut runner = ChainRunner::new(&cfg, arm.score)?;
                    let mut out = Vec::with_capacity((options.n_steps + 1) * dim);
                    out.extend_from_slice(runner.state());
                    for _ in 0..options.n_steps {
                        runner.advance()?;
                        out.extend_from_slice(runner.state());
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let per_step: Vec<(f64, Vec<f64>)> = (0..=options.n_steps)
                .into_par_iter()
                .map(|t| {
                    let points: Vec<&[f64]> = trajectories.iter().map(|tr| &tr[t * dim..(t + 1) * dim]).collect();
                    step_errors(&points, &counts, true_cov)
                })
                .collect();
            let per_step_error: Vec<f64> = per_step.iter().map(|p| p.0).collect();
            let replicates: Vec<Vec<f64>> = (0..options.bootstrap)
                .map(|b| per_step.iter().map(|p| p.1[b]).collect())
                .collect();
            let (lower, upper) = if options.bootstrap > 0 {
                per_step.iter().map(|p| percentile_band(p.1.clone(), options.level)).unzip()
            } else {
                (Vec::new(), Vec::new())
            };
            Ok(MixingCurve {
                label: arm.label.clone(),
                per_step_error,
                lower,
                upper,
                n_trials: n,
                replicates,
            })
        })
        .collect()
}

/// Covariance error of the full ensemble and of each weighted resample.
fn step_errors(points: &[&[f64]], counts: &[Vec<u32>], target: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let d = target.nrows();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        for k in 0..d {
            mean[k] += p[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let centered: Vec<f64> = points.iter().flat_map(|p| (0..d).map(|k| p[k] - mean[k]).collect::<Vec<_>>()).collect();
    let weighted = |w: Option<&[u32]>| {
        let mut s = vec![0.0; d];
        let mut cov = DMatrix::zeros(d, d);
        for (i, c) in centered.chunks_exact(d).enumerate() {
            let wi = w.map_or(1.0, |w| w[i] as f64);
            if wi == 0.0 {
                continue;
            }
            for a in 0..d {
                s[a] += wi * c[a];
                for b in a..d {
                    cov[(a, b)] += wi * c[a] * c[b];
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / n - (s[a] / n) * (s[b] / n);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        (cov - target).norm()
    };
    let full = weighted(None);
    let reps = counts.iter().map(|c| weighted(Some(c))).collect();
    (full, reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::AffineScore;
    use crate::samplers::Variant;
    use crate::theory::stationary_covariance;
    use nalgebra::DVector;

    #[test]
    fn shared_start_and_flat_stationary_curve() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let exact = AffineScore::gaussian(DVector::zeros(2), &eye, 0.0).unwrap();
        let noisy = AffineScore::gaussian(DVector::zeros(2), &(&eye * 1.3), 0.3).unwrap();
        let specs: Vec<(String, SamplerConfig, bool)> = vec![
            ("basic".into(), SamplerConfig::basic(0.15, 1, 0).unwrap(), false),
            ("half".into(), SamplerConfig::half_denoise(0.3, 1, 0).unwrap(), true),
        ];
        let arms: Vec<MixingArm> = specs
            .iter()
            .map(|(l, c, uses_noisy)| MixingArm {
                label: l.clone(),
                config: c.clone(),
                score: if *uses_noisy { &noisy } else { &exact },
            })
            .collect();
        let stat = stationary_covariance(&(&eye * 1.3), 0.15, 0.3).unwrap();
        let init = Init::Gaussian {
            mean: vec![0.0, 0.0],
            variance: stat[(0, 0)],
        };
        let mut opts = MixingOptions::new(2000, 30, init, 5);
        opts.bootstrap = 100;
        let curves = mixing_curve(&arms[1..], &opts, &stat).unwrap();
        let c = &curves[0];
        assert_eq!(c.per_step_error.len(), 31);
        let (s, lo, hi) = trend_slope(c, 0..31, 0.95);
        assert!(s.abs() < 2.0 * (hi - lo), "slope {s} band {lo}..{hi}");

        let both = mixing_curve(&arms, &opts, &eye).unwrap();
        assert_eq!(both[0].per_step_error[0], both[1].per_step_error[0]);
        assert!(both.iter().all(|c| c.per_step_error.iter().all(|e| e.is_finite())));
        let (gap, glo, ghi) = both[0].gap_over(&both[1], 0..1, 0.95).unwrap();
        assert_eq!((gap, glo, ghi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn deterministic_and_validated() {
        let eye = DMatrix::<f64>::identity(1, 1);
        let s = AffineScore::gaussian(DVector::zeros(1), &eye, 0.0).unwrap();
        let arm = MixingArm {
            label: "b".into(),
            config: SamplerConfig::new(Variant::Basic, Some(0.1), 0.0, 1, 0).unwrap(),
            score: &s,
        };
        let opts = MixingOptions::new(50, 5, Init::StandardNormal, 9);
        let a = mixing_curve(std::slice::from_ref(&arm), &opts, &eye).unwrap();
        let b = mixing_curve(std::slice::from_ref(&arm), &opts, &eye).unwrap();
        assert_eq!(a[0].per_step_error, b[0].per_step_error);
        assert_eq!(a[0].lower, b[0].lower);
        let mut bad = opts.clone();
        bad.n_trials = 1;
        assert!(mixing_curve(std::slice::from_ref(&arm), &bad, &eye).is_err());
        assert!(mixing_curve(std::slice::from_ref(&arm), &opts, &DMatrix::identity(2, 2)).is_err());
        let mut buf = Vec::new();
        MixingCurve::write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,error,variant"));
        assert_eq!(text.lines().count(), 7);
    }
}
