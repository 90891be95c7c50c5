//! Sample-quality metrics.

mod kde;
mod metrics;
mod mixing;

pub use kde::{density_distance, kde2d, kde2d_on, DensityGrid2D, GridGeometry, KERNEL_RADIUS};
pub use metrics::{covariance, covariance_distance, CovarianceAccumulator};
pub use mixing::{mixing_curve, trend_slope, MixingArm, MixingCurve, MixingOptions};
