use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SampleSet;

/// Kernels are truncated beyond this many bandwidths (relative weight
/// `exp(-18)`).
pub const KERNEL_RADIUS: f64 = 6.0;

/// Grid margin around the samples, in bandwidths.
const MARGIN: f64 = 3.0;

const MAX_NODES: usize = 50_000_000;

/// A regular 2D lattice: node `(i, j)` sits at `origin + spacing · (i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridGeometry {
    pub fn new(origin: [f64; 2], spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("spacing", "must be positive"));
        }
        if nx == 0 || ny == 0 || nx.saturating_mul(ny) > MAX_NODES {
            return Err(Error::invalid("grid", format!("{nx} x {ny} nodes is out of range")));
        }
        Ok(GridGeometry { origin, spacing, nx, ny })
    }

    /// Bounding box of every point in `sets` plus three bandwidths, with the
    /// corners snapped outward to multiples of `spacing`.
    pub fn covering(sets: &[&SampleSet], bandwidth: f64, spacing: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::invalid("bandwidth", "must be positive"));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("spacing", "must be positive"));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for set in sets {
            Error::check_dim(2, set.dim())?;
            for p in set.iter() {
                for a in 0..2 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
        }
        if !lo[0].is_finite() || !hi[0].is_finite() {
            return Err(Error::Degenerate("no finite points to cover".into()));
        }
        let mut origin = [0.0; 2];
        let mut counts = [0usize; 2];
        for a in 0..2 {
            let first = ((lo[a] - MARGIN * bandwidth) / spacing).floor();
            let last = ((hi[a] + MARGIN * bandwidth) / spacing).ceil();
            origin[a] = first * spacing;
            counts[a] = (last - first) as usize + 1;
        }
        GridGeometry::new(origin, spacing, counts[0], counts[1])
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.spacing,
            self.origin[1] + j as f64 * self.spacing,
        ]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Kernel density values at the nodes of a [`GridGeometry`], stored with `x`
/// varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid2D {
    pub geometry: GridGeometry,
    pub bandwidth: f64,
    pub values: Vec<f64>,
}

impl DensityGrid2D {
    pub fn from_values(geometry: GridGeometry, bandwidth: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("values", "densities must be finite and nonnegative"));
        }
        Ok(DensityGrid2D {
            geometry,
            bandwidth,
            values,
        })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.geometry.nx + i]
    }

    /// Riemann sum `Σ values · spacing²`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.spacing.powi(2)
    }

    /// Discrete L2 norm `(Σ values² · spacing²)^½`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.geometry.spacing.powi(2)).sqrt()
    }

    /// CSV with columns `x, y, density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "density"])?;
        for j in 0..self.geometry.ny {
            for i in 0..self.geometry.nx {
                let [x, y] = self.geometry.node(i, j);
                w.write_record(&[x.to_string(), y.to_string(), self.value(i, j).to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Nodes `lo..=hi` along one axis within the kernel radius of `p`.
fn axis_window(p: f64, origin: f64, spacing: f64, count: usize, reach: f64) -> Option<(usize, usize)> {
    let lo = ((p - reach - origin) / spacing).ceil();
    let hi = ((p + reach - origin) / spacing).floor();
    if hi < 0.0 || lo > (count - 1) as f64 {
        return None;
    }
    Some((lo.max(0.0) as usize, (hi as usize).min(count - 1)))
}

/// Isotropic Gaussian KDE on a grid covering `samples` alone.
pub fn kde2d(samples: &SampleSet, bandwidth: f64, spacing: f64) -> Result<DensityGrid2D> {
    Error::check_dim(2, samples.dim())?;
    samples.require_nonempty()?;
    let geometry = GridGeometry::covering(&[samples], bandwidth, spacing)?;
    kde2d_on(samples, bandwidth, &geometry)
}

/// Isotropic Gaussian KDE of 2D samples evaluated at the nodes of `geometry`.
///
/// The kernel factorises over the axes, so each sample contributes an outer
/// product of two short weight vectors.
pub fn kde2d_on(samples: &SampleSet, bandwidth: f64, geometry: &GridGeometry) -> Result<DensityGrid2D> {
    Error::check_dim(2, samples.dim())?;
    samples.require_nonempty()?;
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::invalid("bandwidth", "must be positive"));
    }
    let g = geometry;
    let reach = KERNEL_RADIUS * bandwidth;
    let inv_two_b2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut values = vec![0.0; g.len()];
    let mut wx = Vec::new();
    for p in samples.iter() {
        let (Some((ix0, ix1)), Some((iy0, iy1))) = (
            axis_window(p[0], g.origin[0], g.spacing, g.nx, reach),
            axis_window(p[1], g.origin[1], g.spacing, g.ny, reach),
        ) else {
            continue;
        };
        wx.clear();
        wx.extend((ix0..=ix1).map(|i| {
            let d = g.origin[0] + i as f64 * g.spacing - p[0];
            (-d * d * inv_two_b2).exp()
        }));
        for j in iy0..=iy1 {
            let d = g.origin[1] + j as f64 * g.spacing - p[1];
            let wy = (-d * d * inv_two_b2).exp();
            let row = &mut values[j * g.nx + ix0..=j * g.nx + ix1];
            for (v, w) in row.iter_mut().zip(&wx) {
                *v += w * wy;
            }
        }
    }
    let norm = 1.0 / (samples.len() as f64 * 2.0 * PI * bandwidth * bandwidth);
    values.iter_mut().for_each(|v| *v *= norm);
    DensityGrid2D::from_values(*geometry, bandwidth, values)
}

/// `‖a − b‖₂ / ‖reference‖₂` on a shared grid.
pub fn density_distance(a: &DensityGrid2D, b: &DensityGrid2D, reference: &DensityGrid2D) -> Result<f64> {
    if a.geometry != b.geometry || a.geometry != reference.geometry {
        return Err(Error::invalid("grid", "density grids have different geometry"));
    }
    let norm = reference.l2_norm();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("reference density is identically zero".into()));
    }
    let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        * a.geometry.spacing.powi(2);
    Ok(diff.sqrt() / norm)
}
