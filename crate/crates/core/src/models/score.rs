use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A vector field `point -> ∇ log p(point)`, tagged with the variance of the
/// Gaussian noise convolved into `p` (0 for a noise-free score).
pub trait ScoreField: Send + Sync {
    fn dim(&self) -> usize;

    fn noise_variance(&self) -> f64;

    /// Writes the score at `point` into `out`. Both slices have length
    /// `self.dim()`; callers are responsible for checking.
    fn eval_into(&self, point: &[f64], out: &mut [f64]);

    fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), point.len())?;
        let mut out = vec![0.0; self.dim()];
        self.eval_into(point, &mut out);
        Ok(out)
    }
}

impl<S: ScoreField + ?Sized> ScoreField for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_variance(&self) -> f64 {
        (**self).noise_variance()
    }
    fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        (**self).eval_into(point, out)
    }
}

/// The identically-zero field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroScore {
    pub dim: usize,
}

impl ScoreField for ZeroScore {
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_variance(&self) -> f64 {
        0.0
    }
    fn eval_into(&self, _point: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// A field backed by a closure.
pub struct FnScore<F> {
    dim: usize,
    noise_variance: f64,
    f: F,
}

impl<F> FnScore<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, noise_variance: f64, f: F) -> Self {
        FnScore {
            dim,
            noise_variance,
            f,
        }
    }
}

impl<F> ScoreField for FnScore<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
    fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        (self.f)(point, out)
    }
}

/// `z -> matrix · z + offset` with a symmetric matrix.
///
/// A Gaussian `N(m, C)` has the affine score `-C⁻¹ z + C⁻¹ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineScore {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
    noise_variance: f64,
}

const SYMMETRY_TOL: f64 = 1e-10;

impl AffineScore {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>, noise_variance: f64) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim {
            return Err(Error::invalid("matrix", "must be square and nonempty"));
        }
        Error::check_dim(dim, offset.len())?;
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(
                "matrix",
                format!("not symmetric (max |A - Aᵀ| = {asym:e})"),
            ));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::invalid("noise_variance", "must be nonnegative"));
        }
        Ok(AffineScore {
            matrix,
            offset,
            noise_variance,
        })
    }

    /// Score of `N(mean, cov)`, tagged with `noise_variance`.
    pub fn gaussian(mean: DVector<f64>, cov: &DMatrix<f64>, noise_variance: f64) -> Result<Self> {
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?;
        let precision = chol.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        let offset = &precision * mean;
        AffineScore::new(-precision, offset, noise_variance)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }
}

impl ScoreField for AffineScore {
    fn dim(&self) -> usize {
        self.offset.len()
    }
    fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
    fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.offset[i];
            for (j, p) in point.iter().enumerate() {
                acc += self.matrix[(i, j)] * p;
            }
            *o = acc;
        }
    }
}
