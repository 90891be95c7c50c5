use std::path::{Path, PathBuf};

use super::manifest::FileRecord;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentSpec, Method, Scenario};
use crate::kv;
use crate::models::read_model_file;

/// Keys accepted in an experiment config file.
pub const CONFIG_KEYS: &[&str] = &[
    "scenario",
    "kernels",
    "dim",
    "sigma2",
    "mu",
    "steps",
    "trials",
    "methods",
    "seed",
    "output_dir",
    "replicates",
    "bootstrap",
    "tail_fraction",
    "bandwidth",
    "spacing",
    "init_variance",
    "model",
];

/// A parsed config file.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub spec: ExperimentSpec,
    pub output_dir: Option<PathBuf>,
    pub model_file: Option<FileRecord>,
}

pub(crate) fn parse_methods(key: &str, value: &str) -> Result<Vec<Method>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<Method>().map_err(|_| Error::Config {
                key: key.to_string(),
                message: format!("unknown method `{s}`"),
            })
        })
        .collect()
}

/// Reads a `key = value` experiment config (see [`CONFIG_KEYS`]) on top of
/// the defaults of its scenario.
///
/// `scenario` comes from the caller (the CLI subcommand) or from the file's
/// `scenario` key; when both are present they must agree. A relative `model`
/// path is resolved against the config file's directory.
pub fn load_config(path: &Path, scenario: Option<Scenario>) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config = parse_config(&text, &path.display().to_string(), path.parent(), scenario, false)?;
    config.spec.validate()?;
    Ok(config)
}

/// Config parsing without validation, optionally starting from paper-scale
/// defaults, so that command-line flags can still be applied.
pub(crate) fn parse_config(
    text: &str,
    path: &str,
    base_dir: Option<&Path>,
    scenario: Option<Scenario>,
    paper_scale: bool,
) -> Result<ConfigFile> {
    let entries = kv::parse(text, path)?;
    for e in &entries {
        if !CONFIG_KEYS.contains(&e.key.as_str()) {
            return Err(Error::Config {
                key: e.key.clone(),
                message: format!("unknown key in {path} (line {})", e.line),
            });
        }
    }
    let from_file = entries
        .iter()
        .find(|e| e.key == "scenario")
        .map(|e| {
            e.value.parse::<Scenario>().map_err(|_| Error::Config {
                key: "scenario".into(),
                message: format!("unknown scenario `{}`", e.value),
            })
        })
        .transpose()?;
    let scenario = match (scenario, from_file) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config {
                key: "scenario".into(),
                message: format!("file sets `{}` but the command runs `{}`", b.name(), a.name()),
            })
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => {
            return Err(Error::Config {
                key: "scenario".into(),
                message: format!("missing in {path}"),
            })
        }
    };
    let mut spec = ExperimentSpec::defaults(scenario);
    if paper_scale {
        spec = spec.paper_scale();
    }
    let mut output_dir = None;
    let mut model_file = None;
    for e in &entries {
        let (k, v) = (e.key.as_str(), e.value.as_str());
        match k {
            "scenario" => {}
            "kernels" => spec.kernels = kv::parse_usize(k, v)?,
            "dim" => spec.dim = kv::parse_usize(k, v)?,
            "sigma2" => spec.sigma2 = kv::parse_f64_list(k, v)?,
            "mu" => spec.mu = Some(kv::parse_f64(k, v)?),
            "steps" => spec.n_steps = kv::parse_usize(k, v)?,
            "trials" => spec.n_trials = kv::parse_usize(k, v)?,
            "methods" => spec.methods = parse_methods(k, v)?,
            "seed" => spec.seed = kv::parse_u64(k, v)?,
            "replicates" => spec.replicates = kv::parse_usize(k, v)?,
            "bootstrap" => spec.bootstrap = kv::parse_usize(k, v)?,
            "tail_fraction" => spec.tail_fraction = kv::parse_f64(k, v)?,
            "bandwidth" => spec.bandwidth = kv::parse_f64(k, v)?,
            "spacing" => spec.spacing = kv::parse_f64(k, v)?,
            "init_variance" => spec.init_variance = kv::parse_f64(k, v)?,
            "output_dir" => output_dir = Some(PathBuf::from(v)),
            "model" => {
                let p = match base_dir {
                    Some(dir) if Path::new(v).is_relative() => dir.join(v),
                    _ => PathBuf::from(v),
                };
                spec.model = Some(read_model_file(&p).map_err(|err| Error::Config {
                    key: "model".into(),
                    message: err.to_string(),
                })?);
                model_file = Some(FileRecord::hash_file(&p)?);
            }
            _ => unreachable!("keys checked above"),
        }
    }
    Ok(ConfigFile {
        spec,
        output_dir,
        model_file,
    })
}
