use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::spec::{ExperimentSpec, Method};
use crate::analysis::{DensityGrid2D, MixingCurve};
use crate::error::{Error, Result};
use crate::theory::GaussianTheoryReport;

/// Mean and standard error of one method at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub sigma2: f64,
    /// Step size the method ran with; absent for exact sampling.
    pub mu: Option<f64>,
    /// Mean distance to the target over replicates.
    pub distance: f64,
    pub stderr: f64,
    /// Mean of the per-replicate `log10` distances.
    pub log10_distance: f64,
    pub stderr_log10: f64,
    pub per_replicate: Vec<f64>,
}

impl MethodRow {
    pub(crate) fn from_replicates(method: Method, sigma2: f64, mu: Option<f64>, values: Vec<f64>) -> Self {
        let logs: Vec<f64> = values.iter().map(|v| v.log10()).collect();
        let (distance, stderr) = mean_stderr(&values);
        let (log10_distance, stderr_log10) = mean_stderr(&logs);
        MethodRow {
            method,
            sigma2,
            mu,
            distance,
            stderr,
            log10_distance,
            stderr_log10,
            per_replicate: values,
        }
    }
}

/// Sample mean and `sd / √n`; the error is 0 for a single value.
pub(crate) fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One Gaussian-target arm: simulated covariance against the closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianArmResult {
    pub method: Method,
    pub sigma2: f64,
    pub mu: Option<f64>,
    /// Tail covariance averaged over replicates.
    #[serde(with = "crate::linalg::rows")]
    pub tail_covariance: DMatrix<f64>,
    /// Frobenius distance of `tail_covariance` from the target covariance.
    pub distance_to_truth: f64,
    /// Frobenius distance of `tail_covariance` from the predicted stationary
    /// covariance.
    pub distance_to_theory: Option<f64>,
    /// `tr(tail cov − I) / dim`, mean and standard error over replicates.
    pub bias: f64,
    pub bias_stderr: f64,
    /// The same bias measured against a coupled exact-target reference chain
    /// driven by the sampler's own innovations; much less noisy.
    pub coupled_bias: Option<f64>,
    pub coupled_bias_stderr: Option<f64>,
    /// `tr(predicted stationary cov − I) / dim`.
    pub predicted_bias: Option<f64>,
    pub theory: Option<GaussianTheoryReport>,
}

/// Mixing summary at one noise level, comparing the proposed and basic arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingLevelSummary {
    pub sigma2: f64,
    pub label: String,
    /// All arms share the step-0 error exactly.
    pub step0_equal: bool,
    /// Proposed and basic bootstrap bands intersect at every step `t ≤ early_steps`.
    pub early_overlap: Option<bool>,
    pub early_steps: usize,
    /// Mean `basic − proposed` error over the last `plateau_steps` steps with
    /// its paired bootstrap band.
    pub plateau_gap: Option<[f64; 3]>,
    pub plateau_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportDetails {
    GmmBias {
        /// Ground-truth floor per replicate: distance between two
        /// independent exact samples.
        floor: Vec<f64>,
        sample_size: usize,
    },
    GaussianBias {
        arms: Vec<GaussianArmResult>,
    },
    Mixing {
        curves: Vec<MixingCurve>,
        levels: Vec<MixingLevelSummary>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub spec: ExperimentSpec,
    pub replicate_seeds: Vec<u64>,
    pub rows: Vec<MethodRow>,
    pub details: ReportDetails,
    /// Density grids of the first replicate, labelled `method_level`.
    #[serde(skip)]
    pub grids: Vec<(String, DensityGrid2D)>,
}

impl ExperimentReport {
    pub fn row(&self, method: Method, sigma2: f64) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method && r.sigma2 == sigma2)
    }

    pub fn gaussian_arm(&self, method: Method, sigma2: f64) -> Option<&GaussianArmResult> {
        match &self.details {
            ReportDetails::GaussianBias { arms } => arms.iter().find(|a| a.method == method && a.sigma2 == sigma2),
            _ => None,
        }
    }

    pub fn mixing_level(&self, sigma2: f64) -> Option<&MixingLevelSummary> {
        match &self.details {
            ReportDetails::Mixing { levels, .. } => levels.iter().find(|l| l.sigma2 == sigma2),
            _ => None,
        }
    }

    pub fn curves(&self) -> &[MixingCurve] {
        match &self.details {
            ReportDetails::Mixing { curves, .. } => curves,
            _ => &[],
        }
    }

    /// Checks that every requested method has a finite row at every level.
    pub(crate) fn check_complete(&self) -> Result<()> {
        for &s in &self.spec.sigma2 {
            for &m in &self.spec.methods {
                match self.row(m, s) {
                    Some(r) if r.distance.is_finite() && r.stderr.is_finite() => {}
                    Some(_) => {
                        return Err(Error::Degenerate(format!("non-finite result for {m} at sigma2 = {s}")));
                    }
                    None => return Err(Error::Degenerate(format!("missing result for {m} at sigma2 = {s}"))),
                }
            }
        }
        Ok(())
    }

    /// CSV columns `method, sigma2, distance, log10_distance, stderr`.
    pub fn write_distances_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "sigma2", "mu", "distance", "log10_distance", "stderr", "stderr_log10"])?;
        for r in &self.rows {
            w.write_record(&[
                r.method.name().to_string(),
                r.sigma2.to_string(),
                r.mu.map(|m| m.to_string()).unwrap_or_default(),
                r.distance.to_string(),
                r.log10_distance.to_string(),
                r.stderr.to_string(),
                r.stderr_log10.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
