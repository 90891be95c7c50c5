use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::manifest::FileRecord;
use crate::analysis::{covariance, MixingCurve};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, ExperimentReport, ExperimentSpec, ReportDetails};
use crate::linalg::rows::to_rows;
use crate::models::{dsm_fit_affine, read_model_file, tweedie_denoise, GmmModel, SampleSet};
use crate::rng::{streams, Stream};
use crate::samplers::{run_chain, SamplerConfig};
use crate::theory::{bias_predictions, gaussian_theory_report, Arm};

/// Where a command's input points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointSource {
    /// CSV with a header row; a `step` column is ignored.
    File { path: PathBuf },
    /// Exact draws from the job's model.
    Draw { n: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleJob {
    pub config: SamplerConfig,
    /// Noise-free target.
    pub model: GmmModel,
    /// Noise variance of the score the chain follows; 0 is the true score.
    pub score_noise: f64,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryJob {
    pub dim: usize,
    /// Target covariance is `variance · I`.
    pub variance: f64,
    pub sigma2: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseJob {
    pub model: GmmModel,
    pub sigma2: f64,
    pub source: PointSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmJob {
    pub sigma2: f64,
    pub seed: u64,
    pub source: PointSource,
    /// Needed when drawing points; also used to report the exact noisy score
    /// when it is affine.
    pub model: Option<GmmModel>,
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Sample(SampleJob),
    Experiment(ExperimentSpec),
    Theory(TheoryJob),
    Denoise(DenoiseJob),
    DsmFit(DsmJob),
}

/// Files produced by a job, relative to the output directory, plus the
/// summary printed on standard output.
pub struct JobOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
    pub inputs: Vec<FileRecord>,
}

impl Job {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Sample(j) => Some(j.config.seed),
            Job::Experiment(s) => Some(s.seed),
            Job::Theory(_) => None,
            Job::Denoise(j) => match j.source {
                PointSource::Draw { seed, .. } => Some(seed),
                PointSource::File { .. } => None,
            },
            Job::DsmFit(j) => Some(j.seed),
        }
    }

    pub fn run(&self) -> Result<JobOutput> {
        match self {
            Job::Sample(j) => run_sample(j),
            Job::Experiment(s) => run_experiment_job(s),
            Job::Theory(j) => run_theory(j),
            Job::Denoise(j) => run_denoise(j),
            Job::DsmFit(j) => run_dsm(j),
        }
    }
}

/// Built-in targets: `gauss<d>d` for `N(0, I_d)` and `gmm<k>` for the
/// benchmark mixture with `k` kernels. Anything else is read as a model file.
pub fn resolve_model(name: &str) -> Result<(GmmModel, Option<FileRecord>)> {
    if let Some(d) = name.strip_prefix("gauss").and_then(|r| r.strip_suffix('d')) {
        if let Ok(d) = d.parse::<usize>() {
            return Ok((GmmModel::gaussian(d, 1.0)?, None));
        }
    }
    if let Some(k) = name.strip_prefix("gmm") {
        if let Ok(k) = k.parse::<usize>() {
            return Ok((GmmModel::canonical(k)?, None));
        }
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Error::invalid(
            "model",
            format!("`{name}` is neither a built-in model (gauss<d>d, gmm<k>) nor a file"),
        ));
    }
    Ok((read_model_file(path)?, Some(FileRecord::hash_file(path)?)))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn points_csv(columns: &[(&str, &SampleSet)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = Vec::new();
    for (prefix, set) in columns {
        header.extend((0..set.dim()).map(|i| format!("{prefix}{i}")));
    }
    w.write_record(&header)?;
    let n = columns[0].1.len();
    for i in 0..n {
        let row: Vec<String> = columns
            .iter()
            .flat_map(|(_, s)| s.point(i).iter().map(|v| v.to_string()).collect::<Vec<_>>())
            .collect();
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))
}

/// Reads points from a CSV file with a header row, skipping a `step` column.
pub fn read_points(path: &Path) -> Result<SampleSet> {
    let shown = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: shown.clone(),
            line: 0,
            message: format!("{other:?}"),
        },
    })?;
    let keep: Vec<usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .filter(|(_, h)| h.trim() != "step")
        .map(|(i, _)| i)
        .collect();
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for &i in &keep {
            let field = record.get(i).unwrap_or("");
            points.push(field.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: shown.clone(),
                line: row + 2,
                message: format!("expected a number, found `{field}`"),
            })?);
        }
    }
    SampleSet::new(keep.len(), points)
}

fn load_points(source: &PointSource, model: Option<&GmmModel>) -> Result<(SampleSet, Vec<FileRecord>)> {
    match source {
        PointSource::File { path } => Ok((read_points(path)?, vec![FileRecord::hash_file(path)?])),
        PointSource::Draw { n, seed } => {
            let model = model.ok_or_else(|| Error::invalid("model", "drawing points needs a model"))?;
            Ok((model.exact_sample(*n, &mut Stream::new(*seed, streams::GROUND_TRUTH_A))?, Vec::new()))
        }
    }
}

fn run_sample(job: &SampleJob) -> Result<JobOutput> {
    let chain = if job.score_noise > 0.0 {
        run_chain(&job.config, &job.model.noisy_model(job.score_noise)?)?
    } else {
        run_chain(&job.config, &job.model)?
    };
    let csv = csv_bytes(|buf| chain.write_csv(buf))?;
    let tail = chain.tail_samples(job.tail_fraction)?;
    let cov = covariance(&tail)?;
    let mean: Vec<f64> = (0..tail.dim())
        .map(|k| tail.iter().map(|p| p[k]).sum::<f64>() / tail.len() as f64)
        .collect();
    Ok(JobOutput {
        files: vec![("chain.csv".into(), csv)],
        summary: json!({
            "command": "sample",
            "variant": job.config.variant.name(),
            "steps": job.config.n_steps,
            "tail_points": tail.len(),
            "tail_mean": mean,
            "tail_covariance": to_rows(&cov),
            "target_covariance": to_rows(&job.model.covariance()),
        }),
        inputs: Vec::new(),
    })
}

fn experiment_summary(report: &ExperimentReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "method": r.method.name(),
                "sigma2": r.sigma2,
                "distance": r.distance,
                "log10_distance": r.log10_distance,
                "stderr": r.stderr,
            })
        })
        .collect();
    let mut summary = json!({ "scenario": report.spec.scenario.name(), "rows": rows });
    match &report.details {
        ReportDetails::GmmBias { floor, .. } => summary["ground_truth_floor"] = json!(floor),
        ReportDetails::GaussianBias { arms } => {
            summary["bias"] = arms
                .iter()
                .map(|a| {
                    json!({
                        "method": a.method.name(),
                        "sigma2": a.sigma2,
                        "bias": a.bias,
                        "coupled_bias": a.coupled_bias,
                        "predicted_bias": a.predicted_bias,
                    })
                })
                .collect();
        }
        ReportDetails::Mixing { levels, .. } => summary["levels"] = json!(levels),
    }
    summary
}

fn run_experiment_job(spec: &ExperimentSpec) -> Result<JobOutput> {
    let report = run_experiment(spec)?;
    let mut files = vec![
        ("report.json".to_string(), serde_json::to_vec_pretty(&report)?),
        ("distances.csv".to_string(), csv_bytes(|buf| report.write_distances_csv(buf))?),
    ];
    for (label, grid) in &report.grids {
        files.push((format!("grids/{label}.csv"), csv_bytes(|buf| grid.write_csv(buf))?));
    }
    if !report.curves().is_empty() {
        files.push(("curves.csv".into(), csv_bytes(|buf| MixingCurve::write_csv(report.curves(), buf))?));
    }
    Ok(JobOutput {
        files,
        summary: experiment_summary(&report),
        inputs: Vec::new(),
    })
}

fn run_theory(job: &TheoryJob) -> Result<JobOutput> {
    if job.dim == 0 || !(job.variance > 0.0) {
        return Err(Error::invalid("dim", "dimension and variance must be positive"));
    }
    let sigma_x = DMatrix::from_diagonal_element(job.dim, job.dim, job.variance);
    let reports = [Arm::Proposed, Arm::Basic, Arm::Oracle]
        .into_iter()
        .map(|arm| gaussian_theory_report(&sigma_x, job.mu, job.sigma2, arm))
        .collect::<Result<Vec<_>>>()?;
    let first = bias_predictions(&sigma_x, job.mu, job.sigma2)?;
    let diag = |i: usize| reports[i].stationary_cov[(0, 0)];
    let bias = |i: usize| reports[i].bias[(0, 0)];
    let summary = json!({
        "command": "theory",
        "dim": job.dim,
        "mu": job.mu,
        "sigma2": job.sigma2,
        "stationary": { "proposed": diag(0), "basic": diag(1), "oracle": diag(2) },
        "bias": { "proposed": bias(0), "basic": bias(1), "oracle": bias(2) },
        "ratio": bias(1) / bias(0),
        "first_order_ratio": first.ratio,
        "contraction": reports[0].spectral_norm_m,
    });
    Ok(JobOutput {
        files: vec![("theory.json".into(), serde_json::to_vec_pretty(&reports)?)],
        summary,
        inputs: Vec::new(),
    })
}

fn run_denoise(job: &DenoiseJob) -> Result<JobOutput> {
    let noisy_score = job.model.noisy_model(job.sigma2)?;
    let (points, inputs) = load_points(&job.source, Some(&job.model))?;
    let dim = points.dim();
    let (clean, noisy) = match job.source {
        PointSource::Draw { seed, .. } => {
            let mut rng = Stream::new(seed, streams::DSM_NOISE);
            let sd = job.sigma2.sqrt();
            let shifted: Vec<f64> = points.as_flat().iter().map(|x| x + sd * rng.normal()).collect();
            (Some(points), SampleSet::new(dim, shifted)?)
        }
        PointSource::File { .. } => (None, points),
    };
    let mut flat = Vec::with_capacity(noisy.as_flat().len());
    for p in noisy.iter() {
        flat.extend(tweedie_denoise(&noisy_score, job.sigma2, p)?);
    }
    let denoised = SampleSet::new(dim, flat)?;
    let mut summary = json!({ "command": "denoise", "points": denoised.len(), "sigma2": job.sigma2 });
    let csv = match &clean {
        Some(clean) => {
            let mse = |a: &SampleSet| {
                a.as_flat().iter().zip(clean.as_flat()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / clean.len() as f64
            };
            summary["mse_denoised"] = json!(mse(&denoised));
            summary["mse_noisy"] = json!(mse(&noisy));
            points_csv(&[("clean", clean), ("noisy", &noisy), ("denoised", &denoised)])?
        }
        None => points_csv(&[("x", &denoised)])?,
    };
    Ok(JobOutput {
        files: vec![("denoised.csv".into(), csv)],
        summary,
        inputs,
    })
}

fn run_dsm(job: &DsmJob) -> Result<JobOutput> {
    let (points, inputs) = load_points(&job.source, job.model.as_ref())?;
    let fit = dsm_fit_affine(&points, job.sigma2, &mut Stream::new(job.seed, streams::DSM_NOISE))?;
    let mut out = json!({
        "matrix": to_rows(fit.matrix()),
        "offset": fit.offset().as_slice(),
        "noise_variance": job.sigma2,
        "points": points.len(),
    });
    if let Some(model) = job.model.as_ref().filter(|m| m.components().len() == 1) {
        let d = model.dim();
        let cov = model.covariance() + DMatrix::<f64>::identity(d, d) * job.sigma2;
        if let Some(inv) = cov.try_inverse() {
            let exact = -inv;
            out["exact_matrix"] = json!(to_rows(&exact));
            out["relative_error"] = json!((fit.matrix() - &exact).norm() / exact.norm());
        }
    }
    let mut summary = out.clone();
    summary["command"] = json!("dsm-fit");
    Ok(JobOutput {
        files: vec![("fit.json".into(), serde_json::to_vec_pretty(&out)?)],
        summary,
        inputs,
    })
}
