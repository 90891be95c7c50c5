//! Analytic probability models and their score fields.

mod denoise;
mod dsm;
mod file;
mod gmm;
mod sample_set;
mod score;

pub use denoise::tweedie_denoise;
pub use dsm::dsm_fit_affine;
pub use file::{read_model_file, write_model_file, MODEL_FILE_SCHEMA};
pub use gmm::{Component, GmmModel};
pub use sample_set::SampleSet;
pub use score::{AffineScore, FnScore, ScoreField, ZeroScore};
