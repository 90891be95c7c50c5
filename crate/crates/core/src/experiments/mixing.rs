use rayon::prelude::*;

use super::report::{ExperimentReport, MethodRow, MixingLevelSummary, ReportDetails};
use super::spec::{level_name, ExperimentSpec, Method, Scenario};
use crate::analysis::{mixing_curve, MixingArm, MixingCurve, MixingOptions};
use crate::error::{Error, Result};
use crate::models::{GmmModel, ScoreField};
use crate::samplers::Init;

/// Steps at the start of the curves over which proposed and basic are
/// expected to coincide.
const EARLY_STEPS: usize = 10;
/// Steps at the end of the curves averaged into the plateau.
const PLATEAU_STEPS: usize = 10;
const BAND_LEVEL: f64 = 0.95;
/// Half-width of a two-sided 95% normal interval, in standard errors.
const Z95: f64 = 1.959_963_984_540_054;

/// Midpoint between the first two kernel means, or the single mean.
fn midpoint(model: &GmmModel) -> Vec<f64> {
    let c = model.components();
    match c.len() {
        1 => c[0].mean.clone(),
        _ => c[0].mean.iter().zip(&c[1].mean).map(|(a, b)| 0.5 * (a + b)).collect(),
    }
}

fn summarize(sigma2: f64, curves: &[MixingCurve], methods: &[Method]) -> Result<MixingLevelSummary> {
    let find = |m: Method| methods.iter().position(|x| *x == m).map(|i| &curves[i]);
    let step0_equal = curves.windows(2).all(|w| w[0].per_step_error[0] == w[1].per_step_error[0]);
    let n_steps = curves[0].n_steps();
    let early_steps = EARLY_STEPS.min(n_steps);
    let plateau_steps = PLATEAU_STEPS.min(n_steps + 1);
    let (mut early_overlap, mut plateau_gap) = (None, None);
    if let (Some(p), Some(b)) = (find(Method::Proposed), find(Method::Basic)) {
        if !p.lower.is_empty() {
            early_overlap = Some((0..=early_steps).all(|t| p.lower[t].max(b.lower[t]) <= p.upper[t].min(b.upper[t])));
            let (g, lo, hi) = b.gap_over(p, n_steps + 1 - plateau_steps..n_steps + 1, BAND_LEVEL)?;
            plateau_gap = Some([g, lo, hi]);
        }
    }
    Ok(MixingLevelSummary {
        sigma2,
        label: level_name(sigma2),
        step0_equal,
        early_overlap,
        early_steps,
        plateau_gap,
        plateau_steps,
    })
}

/// Ensembles of short chains started from a concentrated Gaussian between two
/// kernels; one error curve per method and noise level.
pub fn run_mixing_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if spec.scenario != Scenario::Mixing {
        return Err(Error::invalid("scenario", "expected mixing"));
    }
    spec.validate()?;
    let target = spec.target_mixture()?;
    let true_cov = target.covariance();
    let init = Init::Gaussian {
        mean: midpoint(&target),
        variance: spec.init_variance,
    };
    let mut options = MixingOptions::new(spec.n_trials, spec.n_steps, init, spec.seed);
    options.bootstrap = spec.bootstrap;
    options.level = BAND_LEVEL;
    let methods = spec.chain_methods();

    let per_level = spec
        .sigma2
        .par_iter()
        .map(|&s2| {
            log::info!("mixing sigma2 = {s2}: {} trials x {} steps", spec.n_trials, spec.n_steps);
            let noisy = target.noisy_model(s2)?;
            let arms = methods
                .iter()
                .map(|&m| {
                    let config = m.sampler_config(s2, spec.mu_at(s2), spec.n_steps, spec.seed)?.expect("chain method");
                    let score: &dyn ScoreField = if m.uses_noisy_score() { &noisy } else { &target };
                    Ok(MixingArm {
                        label: format!("{}_{}", m.name(), level_name(s2)),
                        config,
                        score,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let curves = mixing_curve(&arms, &options, &true_cov)?;
            let summary = summarize(s2, &curves, &methods)?;
            let rows = methods
                .iter()
                .zip(&arms)
                .zip(&curves)
                .map(|((&m, arm), c)| {
                    let last = c.n_steps();
                    let mut row = MethodRow::from_replicates(m, s2, Some(arm.config.mu), vec![c.per_step_error[last]]);
                    if !c.lower.is_empty() {
                        row.stderr = (c.upper[last] - c.lower[last]) / (2.0 * Z95);
                        row.stderr_log10 = row.stderr / (row.distance * std::f64::consts::LN_10);
                    }
                    row
                })
                .collect::<Vec<_>>();
            Ok((curves, summary, rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::new();
    let mut levels = Vec::new();
    let mut rows = Vec::new();
    for (c, s, r) in per_level {
        curves.extend(c);
        levels.push(s);
        rows.extend(r);
    }
    let report = ExperimentReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        replicate_seeds: vec![spec.seed],
        rows,
        details: ReportDetails::Mixing { curves, levels },
        grids: Vec::new(),
    };
    report.check_complete()?;
    Ok(report)
}
