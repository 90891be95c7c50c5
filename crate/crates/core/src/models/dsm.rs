//! Denoising score matching restricted to affine score fields.
//!
//! With pairs `(x, x̃ = x + σ n)` the objective
//! `E‖x − (x̃ + σ² Ψ(x̃))‖²` equals `σ⁴ E‖r − Ψ(x̃)‖²` with `r = −n / σ`, so
//! fitting `Ψ(z) = A z + b` is least squares of `r` on `z`. Restricting `A` to
//! symmetric matrices turns the normal equations for `A` into the Lyapunov
//! equation `A C + C A = S + Sᵀ`, with `C` the covariance of `z` and `S` the
//! cross-covariance of `r` and `z`; it is solved exactly in the eigenbasis of
//! `C`. The offset is then `b = r̄ − A z̄`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{AffineScore, SampleSet};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Relative eigenvalue floor below which the design covariance counts as
/// singular.
const RANK_TOL: f64 = 1e-12;

pub fn dsm_fit_affine(samples: &SampleSet, sigma2: f64, rng: &mut Stream) -> Result<AffineScore> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", format!("{sigma2} must be positive")));
    }
    samples.require_nonempty()?;
    let dim = samples.dim();
    let n = samples.len();
    if n < dim + 1 {
        return Err(Error::Degenerate(format!(
            "{n} samples cannot determine an affine score in {dim} dimensions (need at least {})",
            dim + 1
        )));
    }
    let sigma = sigma2.sqrt();

    let mut z = DMatrix::<f64>::zeros(n, dim);
    let mut r = DMatrix::<f64>::zeros(n, dim);
    let mut noise = vec![0.0; dim];
    for (i, x) in samples.iter().enumerate() {
        rng.fill_normal(&mut noise);
        for j in 0..dim {
            z[(i, j)] = x[j] + sigma * noise[j];
            r[(i, j)] = -noise[j] / sigma;
        }
    }
    let z_mean = DVector::from_iterator(dim, z.column_iter().map(|c| c.mean()));
    let r_mean = DVector::from_iterator(dim, r.column_iter().map(|c| c.mean()));
    for j in 0..dim {
        z.column_mut(j).add_scalar_mut(-z_mean[j]);
        r.column_mut(j).add_scalar_mut(-r_mean[j]);
    }
    let inv_n = 1.0 / n as f64;
    let c_zz = z.transpose() * &z * inv_n;
    let c_rz = r.transpose() * &z * inv_n;

    let eig = SymmetricEigen::new((&c_zz + c_zz.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    if !(top > 0.0) || eig.eigenvalues.min() <= RANK_TOL * top {
        return Err(Error::Degenerate("noisy design covariance is singular".into()));
    }
    let u = &eig.eigenvectors;
    let rhs = u.transpose() * (&c_rz + c_rz.transpose()) * u;
    let lambda = &eig.eigenvalues;
    let rotated = DMatrix::from_fn(dim, dim, |i, j| rhs[(i, j)] / (lambda[i] + lambda[j]));
    let a = u * rotated * u.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let b = &r_mean - &a * &z_mean;
    AffineScore::new(a, b, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GmmModel, ScoreField};

    #[test]
    fn recovers_gaussian_noisy_score_1d() {
        let data = GmmModel::gaussian(1, 1.0).unwrap();
        let x = data.exact_sample(100_000, &mut Stream::from_seed(1)).unwrap();
        let fit = dsm_fit_affine(&x, 0.3, &mut Stream::new(1, 9)).unwrap();
        let expected = -1.0 / 1.3;
        assert!(((fit.matrix()[(0, 0)] - expected) / expected).abs() < 0.02, "{}", fit.matrix());
        assert!(fit.offset()[0].abs() < 0.02 * expected.abs());
        assert_eq!(fit.noise_variance(), 0.3);
    }

    #[test]
    fn recovers_white_2d() {
        let data = GmmModel::gaussian(2, 1.0).unwrap();
        let x = data.exact_sample(100_000, &mut Stream::from_seed(2)).unwrap();
        let fit = dsm_fit_affine(&x, 0.1, &mut Stream::new(2, 9)).unwrap();
        let expected = -1.0 / 1.1;
        for i in 0..2 {
            assert!(((fit.matrix()[(i, i)] - expected) / expected).abs() < 0.02);
        }
        assert!(fit.matrix()[(0, 1)].abs() < 0.02);
    }

    #[test]
    fn data_at_origin_gives_full_denoising() {
        let x = SampleSet::new(2, vec![0.0; 2 * 5_000]).unwrap();
        let fit = dsm_fit_affine(&x, 0.25, &mut Stream::from_seed(3)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { -4.0 } else { 0.0 };
                assert!((fit.matrix()[(i, j)] - want).abs() < 1e-9);
            }
            assert!(fit.offset()[i].abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_samples_is_degenerate() {
        let x = SampleSet::new(3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert!(matches!(
            dsm_fit_affine(&x, 0.1, &mut Stream::from_seed(4)),
            Err(Error::Degenerate(_))
        ));
        let empty = SampleSet::new(2, vec![]).unwrap();
        assert!(dsm_fit_affine(&empty, 0.1, &mut Stream::from_seed(4)).is_err());
    }
}
