use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered draws in `R^dim`, stored row-major, with a free-form provenance
/// record (seed, generator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    points: Vec<f64>,
    pub provenance: BTreeMap<String, String>,
}

impl SampleSet {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if points.len() % dim != 0 {
            return Err(Error::invalid(
                "points",
                format!("{} values do not split into rows of {dim}", points.len()),
            ));
        }
        Ok(SampleSet {
            dim,
            points,
            provenance: BTreeMap::new(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::Degenerate("no rows".into()))?;
        let mut points = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            Error::check_dim(dim, row.as_ref().len())?;
            points.extend_from_slice(row.as_ref());
        }
        SampleSet::new(dim, points)
    }

    pub fn with_provenance(mut self, key: &str, value: impl ToString) -> Self {
        self.provenance.insert(key.to_string(), value.to_string());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::Degenerate("empty sample set".into()))
        } else {
            Ok(())
        }
    }
}
