use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{ExperimentReport, MethodRow, ReportDetails};
use super::spec::{level_name, ExperimentSpec, Method, Scenario};
use crate::analysis::{density_distance, kde2d_on, DensityGrid2D, GridGeometry};
use crate::error::{Error, Result};
use crate::models::{GmmModel, SampleSet, ScoreField};
use crate::rng::{replicate_seed, streams, Stream};
use crate::samplers::{run_chain_visit, tail_count, SamplerConfig};

/// Runs a chain and keeps only its last `keep` states.
pub(crate) fn chain_tail<S: ScoreField + ?Sized>(config: &SamplerConfig, score: &S, keep: usize) -> Result<SampleSet> {
    let dim = score.dim();
    let start = config.n_steps + 1 - keep;
    let mut points = Vec::with_capacity(keep * dim);
    run_chain_visit(config, score, |t, x| {
        if t >= start {
            points.extend_from_slice(x);
        }
    })?;
    Ok(SampleSet::new(dim, points)?
        .with_provenance("generator", config.variant.name())
        .with_provenance("seed", config.seed)
        .with_provenance("mu", config.mu)
        .with_provenance("sigma2", config.sigma2))
}

/// Density distance of every method's chain tail to an exact sample of the
/// mixture, repeated over seeds.
///
/// Within a replicate all methods and noise levels share one exact sample and
/// one grid geometry. The ground-truth floor compares a second exact sample
/// with the first on a grid covering just those two, so it does not depend on
/// which methods or noise levels were run.
pub fn run_gmm_bias_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.scenario != Scenario::GmmBias {
        return Err(Error::invalid("scenario", "expected gmm_bias"));
    }
    spec.validate()?;
    let target = spec.target_mixture()?;
    let noisy = spec
        .sigma2
        .iter()
        .map(|&s| target.noisy_model(s))
        .collect::<Result<Vec<GmmModel>>>()?;
    let keep = tail_count(spec.n_steps + 1, spec.tail_fraction)?;
    let (bw, sp) = (spec.bandwidth, spec.spacing);
    let jobs: Vec<(usize, Method)> = (0..spec.sigma2.len())
        .flat_map(|li| spec.chain_methods().into_iter().map(move |m| (li, m)))
        .collect();
    let seeds: Vec<u64> = (0..spec.replicates as u64).map(|r| replicate_seed(spec.seed, r)).collect();

    let mut distances: BTreeMap<(usize, Method), Vec<f64>> = BTreeMap::new();
    let mut floor = Vec::with_capacity(seeds.len());
    let mut grids = Vec::new();
    for (r, &seed) in seeds.iter().enumerate() {
        log::info!("gmm-bias replicate {}/{}: {} chains of {} steps", r + 1, seeds.len(), jobs.len(), spec.n_steps);
        let tails = jobs
            .par_iter()
            .map(|&(li, m)| {
                let s2 = spec.sigma2[li];
                let config = m
                    .sampler_config(s2, spec.mu_at(s2), spec.n_steps, seed)?
                    .expect("chain methods have a sampler");
                let score = if m.uses_noisy_score() { &noisy[li] } else { &target };
                chain_tail(&config, score, keep)
            })
            .collect::<Result<Vec<SampleSet>>>()?;
        let truth = target.exact_sample(keep, &mut Stream::new(seed, streams::GROUND_TRUTH_A))?;
        let second = target.exact_sample(keep, &mut Stream::new(seed, streams::GROUND_TRUTH_B))?;

        let own = GridGeometry::covering(&[&truth, &second], bw, sp)?;
        let a = kde2d_on(&truth, bw, &own)?;
        floor.push(density_distance(&kde2d_on(&second, bw, &own)?, &a, &a)?);

        let mut covered: Vec<&SampleSet> = tails.iter().collect();
        covered.push(&truth);
        let geometry = GridGeometry::covering(&covered, bw, sp)?;
        let reference = kde2d_on(&truth, bw, &geometry)?;
        let estimates = tails
            .par_iter()
            .map(|s| kde2d_on(s, bw, &geometry))
            .collect::<Result<Vec<DensityGrid2D>>>()?;
        for (&(li, m), grid) in jobs.iter().zip(&estimates) {
            let d = density_distance(grid, &reference, &reference)?;
            distances.entry((li, m)).or_default().push(d);
        }
        if r == 0 {
            for (&(li, m), grid) in jobs.iter().zip(estimates) {
                grids.push((format!("{}_{}", m.name(), level_name(spec.sigma2[li])), grid));
            }
            grids.push(("ground_truth".to_string(), reference));
        }
    }

    let mut rows = Vec::new();
    for (li, &s2) in spec.sigma2.iter().enumerate() {
        for &m in &spec.methods {
            let (mu, values) = match m {
                Method::GroundTruth => (None, floor.clone()),
                _ => {
                    let config = m.sampler_config(s2, spec.mu_at(s2), 1, 0)?.expect("chain method");
                    (Some(config.mu), distances.remove(&(li, m)).unwrap_or_default())
                }
            };
            rows.push(MethodRow::from_replicates(m, s2, mu, values));
        }
    }
    let report = ExperimentReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        replicate_seeds: seeds,
        rows,
        details: ReportDetails::GmmBias {
            floor,
            sample_size: keep,
        },
        grids,
    };
    report.check_complete()?;
    Ok(report)
}
