use nalgebra::DMatrix;
use rayon::prelude::*;

use super::report::{mean_stderr, ExperimentReport, GaussianArmResult, MethodRow, ReportDetails};
use super::spec::{ExperimentSpec, Method, Scenario};
use crate::analysis::{covariance, covariance_distance, CovarianceAccumulator};
use crate::error::{Error, Result};
use crate::models::GmmModel;
use crate::rng::{replicate_seed, streams, Stream};
use crate::samplers::{run_chain_visit, tail_count, SamplerConfig};
use crate::theory::{contraction_check, gaussian_theory_report, Arm};

struct ArmRun {
    cov: DMatrix<f64>,
    /// Tail covariance of the coupled reference chain.
    reference: Option<DMatrix<f64>>,
}

/// Tail covariance of a chain on the white target `N(0, I)`, together with an
/// exact-target AR(1) reference chain coupled to it.
///
/// On this target every variant is linear, `x' = ρ x + e` with iid Gaussian
/// innovations `e`. The reference `z' = ρ z + √(1 − ρ²) e / sd(e)` reuses
/// those innovations and has stationary covariance exactly `I`, so
/// `cov(x) − cov(z)` estimates the bias with most of the sampling noise
/// cancelled.
fn run_white_arm(config: &SamplerConfig, score: &GmmModel, keep: usize) -> Result<ArmRun> {
    let dim = score.dim();
    let lambda = 1.0 + score.noise_variance();
    let rho = contraction_check(&DMatrix::from_diagonal_element(dim, dim, lambda), config.mu)?;
    let coupled = config.mu < lambda;
    let innovation_var = rho * rho * config.sigma2 + 2.0 * config.mu - config.sigma2;
    let gain = ((1.0 - rho * rho) / innovation_var).sqrt();
    let start = config.n_steps + 1 - keep;
    let mut prev = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut acc_x = CovarianceAccumulator::new(dim);
    let mut acc_z = CovarianceAccumulator::new(dim);
    run_chain_visit(config, score, |t, x| {
        if t == 0 {
            z.copy_from_slice(x);
        } else {
            for i in 0..dim {
                z[i] = rho * z[i] + gain * (x[i] - rho * prev[i]);
            }
        }
        prev.copy_from_slice(x);
        if t >= start {
            acc_x.push(x).expect("chain dimension is fixed");
            acc_z.push(&z).expect("chain dimension is fixed");
        }
    })?;
    Ok(ArmRun {
        cov: acc_x.covariance()?,
        reference: if coupled { Some(acc_z.covariance()?) } else { None },
    })
}

fn theory_arm(method: Method, mu: f64) -> Option<(Arm, f64)> {
    match method {
        Method::Proposed => Some((Arm::Proposed, mu)),
        Method::Basic => Some((Arm::Basic, mu)),
        Method::BasicMu4 => Some((Arm::Basic, mu / 4.0)),
        Method::Oracle => Some((Arm::Oracle, mu)),
        Method::OracleMu4 => Some((Arm::Oracle, mu / 4.0)),
        Method::GroundTruth => None,
    }
}

fn trace_mean(m: &DMatrix<f64>) -> f64 {
    m.trace() / m.nrows() as f64
}

/// Tail covariances of every method on `N(0, I_dim)`, compared with the
/// target and with the closed-form stationary covariance.
pub fn run_gaussian_bias_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.scenario != Scenario::GaussianBias {
        return Err(Error::invalid("scenario", "expected gaussian_bias"));
    }
    spec.validate()?;
    let dim = spec.dim;
    let eye = DMatrix::<f64>::identity(dim, dim);
    let target = GmmModel::gaussian(dim, 1.0)?;
    let noisy = spec
        .sigma2
        .iter()
        .map(|&s| target.noisy_model(s))
        .collect::<Result<Vec<GmmModel>>>()?;
    let keep = tail_count(spec.n_steps + 1, spec.tail_fraction)?;
    let seeds: Vec<u64> = (0..spec.replicates as u64).map(|r| replicate_seed(spec.seed, r)).collect();
    let jobs: Vec<(usize, usize, Method)> = (0..seeds.len())
        .flat_map(|r| (0..spec.sigma2.len()).flat_map(move |li| spec.methods.iter().map(move |&m| (r, li, m))))
        .collect();
    log::info!("gaussian-bias: {} runs of {} steps in dimension {dim}", jobs.len(), spec.n_steps);
    let runs = jobs
        .par_iter()
        .map(|&(r, li, m)| {
            let s2 = spec.sigma2[li];
            match m.sampler_config(s2, spec.mu_at(s2), spec.n_steps, seeds[r])? {
                Some(config) => {
                    let score = if m.uses_noisy_score() { &noisy[li] } else { &target };
                    run_white_arm(&config, score, keep)
                }
                None => {
                    let sample = target.exact_sample(keep, &mut Stream::new(seeds[r], streams::GROUND_TRUTH_A))?;
                    Ok(ArmRun {
                        cov: covariance(&sample)?,
                        reference: None,
                    })
                }
            }
        })
        .collect::<Result<Vec<ArmRun>>>()?;

    let mut rows = Vec::new();
    let mut arms = Vec::new();
    for (li, &s2) in spec.sigma2.iter().enumerate() {
        let mu = spec.mu_at(s2);
        for &m in &spec.methods {
            let mine: Vec<&ArmRun> = jobs
                .iter()
                .zip(&runs)
                .filter(|((_, l, mm), _)| *l == li && *mm == m)
                .map(|(_, run)| run)
                .collect();
            let distances = mine
                .iter()
                .map(|run| covariance_distance(&run.cov, &eye))
                .collect::<Result<Vec<f64>>>()?;
            let tail_covariance = mine.iter().fold(DMatrix::zeros(dim, dim), |acc, run| acc + &run.cov) / mine.len() as f64;
            let biases: Vec<f64> = mine.iter().map(|run| trace_mean(&(&run.cov - &eye))).collect();
            let (bias, bias_stderr) = mean_stderr(&biases);
            let coupled: Option<Vec<f64>> = mine
                .iter()
                .map(|run| run.reference.as_ref().map(|z| trace_mean(&(&run.cov - z))))
                .collect();
            let coupled = coupled.map(|v| mean_stderr(&v));
            let theory = match theory_arm(m, mu) {
                Some((arm, arm_mu)) => Some(gaussian_theory_report(&eye, arm_mu, s2, arm)?),
                None => None,
            };
            let row_mu = theory.as_ref().map(|t| t.mu);
            arms.push(GaussianArmResult {
                method: m,
                sigma2: s2,
                mu: row_mu,
                distance_to_truth: covariance_distance(&tail_covariance, &eye)?,
                distance_to_theory: theory
                    .as_ref()
                    .map(|t| covariance_distance(&tail_covariance, &t.stationary_cov))
                    .transpose()?,
                bias,
                bias_stderr,
                coupled_bias: coupled.map(|c| c.0),
                coupled_bias_stderr: coupled.map(|c| c.1),
                predicted_bias: theory.as_ref().map(|t| trace_mean(&t.bias)),
                theory,
                tail_covariance,
            });
            rows.push(MethodRow::from_replicates(m, s2, row_mu, distances));
        }
    }
    let report = ExperimentReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        replicate_seeds: seeds,
        rows,
        details: ReportDetails::GaussianBias { arms },
        grids: Vec::new(),
    };
    report.check_complete()?;
    Ok(report)
}
