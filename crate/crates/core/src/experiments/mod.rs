//! End-to-end studies: density bias on mixtures, covariance bias on Gaussians
//! and mixing speed from a concentrated start.

mod gaussian_bias;
mod gmm_bias;
mod mixing;
mod report;
mod spec;

pub use gaussian_bias::run_gaussian_bias_experiment;
pub use gmm_bias::run_gmm_bias_experiment;
pub use mixing::run_mixing_experiment;
pub use report::{ExperimentReport, GaussianArmResult, MethodRow, MixingLevelSummary, ReportDetails};
pub use spec::{level_name, ExperimentSpec, Method, Scenario, DESK_STEPS, PAPER_STEPS};

use crate::error::Result;

/// Dispatches on `spec.scenario`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.scenario {
        Scenario::GmmBias => run_gmm_bias_experiment(spec),
        Scenario::GaussianBias => run_gaussian_bias_experiment(spec),
        Scenario::Mixing => run_mixing_experiment(spec),
    }
}
