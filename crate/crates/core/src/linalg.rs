//! Small dense-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric positive-definite matrix.
pub(crate) fn spd_eigen(m: &DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::invalid(what, "must be a nonempty square matrix"));
    }
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    if !(eig.eigenvalues.min() > 1e-14 * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular(format!("{what} is not positive definite")));
    }
    Ok(eig)
}

/// `U f(D) Uᵀ`.
pub(crate) fn eigen_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let d = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    let u = &eig.eigenvectors;
    let m = u * DMatrix::from_diagonal(&d) * u.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().amax()
}

/// Serde adapter storing a matrix as a list of rows.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
        let n = rows.len();
        let c = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != c) {
            return None;
        }
        Some(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| serde::de::Error::custom("ragged matrix rows"))
    }
}
