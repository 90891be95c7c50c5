//! Plain-text model files.

use std::path::Path;

use super::{Component, GmmModel};
use crate::error::{Error, Result};
use crate::kv;

/// Documented layout of a model file.
pub const MODEL_FILE_SCHEMA: &str = "\
# Gaussian mixture model file: one `key = value` per line, `#` comments.
#   dim              positive integer
#   components       number of kernels K
#   noise_variance   optional, variance of convolved N(0, s I) noise (default 0)
#   weight.<k>       mixture weight of kernel k (k = 0..K-1), weights sum to 1
#   mean.<k>         dim numbers separated by spaces or commas
#   variance.<k>     isotropic kernel variance (covariance variance * I)
";

pub fn parse_model(text: &str, path: &str) -> Result<GmmModel> {
    let entries = kv::parse(text, path)?;
    let get = |key: &str| entries.iter().find(|e| e.key == key);
    let require = |key: &str| {
        get(key).ok_or_else(|| Error::Config {
            key: key.to_string(),
            message: format!("missing in {path}"),
        })
    };
    for e in &entries {
        let known = matches!(e.key.as_str(), "dim" | "components" | "noise_variance")
            || ["weight.", "mean.", "variance."]
                .iter()
                .any(|p| e.key.strip_prefix(p).is_some_and(|k| k.parse::<usize>().is_ok()));
        if !known {
            return Err(Error::Parse {
                path: path.to_string(),
                line: e.line,
                message: format!("unknown key `{}`", e.key),
            });
        }
    }
    let dim = kv::parse_usize("dim", &require("dim")?.value)?;
    let count = kv::parse_usize("components", &require("components")?.value)?;
    let noise = match get("noise_variance") {
        Some(e) => kv::parse_f64("noise_variance", &e.value)?,
        None => 0.0,
    };
    let mut components = Vec::with_capacity(count);
    for k in 0..count {
        let wkey = format!("weight.{k}");
        let mkey = format!("mean.{k}");
        let vkey = format!("variance.{k}");
        let weight = kv::parse_f64(&wkey, &require(&wkey)?.value)?;
        let mean = kv::parse_f64_list(&mkey, &require(&mkey)?.value)?;
        if mean.len() != dim {
            return Err(Error::Config {
                key: mkey,
                message: format!("expected {dim} values, found {}", mean.len()),
            });
        }
        let variance = kv::parse_f64(&vkey, &require(&vkey)?.value)?;
        components.push(Component { weight, mean, variance });
    }
    if let Some(extra) = entries.iter().find(|e| {
        e.key
            .split_once('.')
            .and_then(|(_, k)| k.parse::<usize>().ok())
            .is_some_and(|k| k >= count)
    }) {
        return Err(Error::Parse {
            path: path.to_string(),
            line: extra.line,
            message: format!("`{}` refers to a component beyond components = {count}", extra.key),
        });
    }
    GmmModel::with_noise(dim, components, noise)
}

pub fn format_model(model: &GmmModel) -> String {
    let mut out = String::from(MODEL_FILE_SCHEMA);
    out.push_str(&format!("dim = {}\n", model.dim()));
    out.push_str(&format!("components = {}\n", model.components().len()));
    out.push_str(&format!("noise_variance = {}\n", model.noise_variance()));
    for (k, c) in model.components().iter().enumerate() {
        let mean: Vec<String> = c.mean.iter().map(|m| m.to_string()).collect();
        out.push_str(&format!("weight.{k} = {}\n", c.weight));
        out.push_str(&format!("mean.{k} = {}\n", mean.join(" ")));
        out.push_str(&format!("variance.{k} = {}\n", c.variance));
    }
    out
}

pub fn read_model_file(path: impl AsRef<Path>) -> Result<GmmModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, &path.display().to_string())
}

pub fn write_model_file(model: &GmmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_model(model)).map_err(|e| Error::io(path, e))
}
