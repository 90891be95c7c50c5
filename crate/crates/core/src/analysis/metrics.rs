use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::SampleSet;

/// Sample covariance with denominator `n`.
pub fn covariance(samples: &SampleSet) -> Result<DMatrix<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid("samples", "covariance needs at least 2 points"));
    }
    let d = samples.dim();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for p in samples.iter() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = DMatrix::zeros(d, d);
    let mut c = vec![0.0; d];
    for p in samples.iter() {
        for k in 0..d {
            c[k] = p[k] - mean[k];
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += c[a] * c[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Single-pass covariance for samples that are never stored, such as long
/// chains visited step by step.
///
/// Points are accumulated relative to the first one pushed, which keeps the
/// sums well conditioned when the mean is far from the origin.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    dim: usize,
    count: u64,
    shift: Vec<f64>,
    sum: Vec<f64>,
    outer: DMatrix<f64>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        CovarianceAccumulator {
            dim,
            count: 0,
            shift: Vec::new(),
            sum: vec![0.0; dim],
            outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        Error::check_dim(self.dim, point.len())?;
        if self.count == 0 {
            self.shift = point.to_vec();
        }
        self.count += 1;
        for a in 0..self.dim {
            let ca = point[a] - self.shift[a];
            self.sum[a] += ca;
            for (b, (p, s)) in point.iter().zip(&self.shift).enumerate().skip(a) {
                self.outer[(a, b)] += ca * (p - s);
            }
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<Vec<f64>> {
        (self.count > 0).then(|| {
            let n = self.count as f64;
            self.shift.iter().zip(&self.sum).map(|(s, t)| s + t / n).collect()
        })
    }

    /// Covariance with denominator `n`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        if self.count < 2 {
            return Err(Error::invalid("samples", "covariance needs at least 2 points"));
        }
        let n = self.count as f64;
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for a in 0..self.dim {
            for b in a..self.dim {
                let v = self.outer[(a, b)] / n - (self.sum[a] / n) * (self.sum[b] / n);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        Ok(cov)
    }
}

/// Frobenius norm of `a − b`.
pub fn covariance_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(
            "matrix",
            format!("shape {:?} does not match {:?}", a.shape(), b.shape()),
        ));
    }
    Ok((a - b).norm())
}
