//! Dense symmetric eigensolver (cyclic Jacobi) and the spectral model that
//! the verification layer consumes.

use serde::{Deserialize, Serialize};

use super::sparse::SparseMatrix;
use super::vector::dot;
use crate::error::{Error, Result};

/// Largest dimension accepted by [`dense_sym_eigen`].
pub const DENSE_EIGEN_CAP: usize = 2000;

const MAX_SWEEPS: usize = 100;

/// How the eigenvectors of a [`SpectralModel`] are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EigenBasis {
    /// The operator is diagonal with ascending entries; `v_i = e_i`.
    Coordinate,
    /// Orthonormal eigenvectors, one `Vec` per eigenvalue, in eigenvalue order.
    Vectors(Vec<Vec<f64>>),
    /// Only eigenvalues are known.
    Unknown,
}

/// Eigenvalues of an SPD operator in ascending order, plus the eigenbasis when
/// it is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    basis: EigenBasis,
}

impl SpectralModel {
    pub fn new(eigenvalues: Vec<f64>, basis: EigenBasis) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Spectrum("no eigenvalues".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Spectrum("eigenvalues must be ascending".into()));
        }
        if !(eigenvalues[0] > 0.0) {
            return Err(Error::Spectrum(format!(
                "smallest eigenvalue {} is not positive",
                eigenvalues[0]
            )));
        }
        if let EigenBasis::Vectors(v) = &basis {
            if v.len() != eigenvalues.len() || v.iter().any(|c| c.len() != eigenvalues.len()) {
                return Err(Error::Spectrum(
                    "eigenvector set has the wrong shape".into(),
                ));
            }
        }
        Ok(SpectralModel { eigenvalues, basis })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn kappa(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    pub fn without_basis(self) -> Self {
        SpectralModel {
            basis: EigenBasis::Unknown,
            ..self
        }
    }

    /// Coefficients of `g` in the eigenbasis.
    pub fn project(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: g.len(),
            });
        }
        match &self.basis {
            EigenBasis::Coordinate => Ok(g.to_vec()),
            EigenBasis::Vectors(v) => Ok(v.iter().map(|vi| dot(vi, g)).collect()),
            EigenBasis::Unknown => Err(Error::Spectrum("eigenvectors are not available".into())),
        }
    }

    /// Inverse of [`SpectralModel::project`].
    pub fn reconstruct(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        match &self.basis {
            EigenBasis::Coordinate => Ok(zeta.to_vec()),
            EigenBasis::Vectors(v) => {
                let mut g = vec![0.0; self.dim()];
                for (vi, z) in v.iter().zip(zeta) {
                    for (gk, vk) in g.iter_mut().zip(vi) {
                        *gk += z * vk;
                    }
                }
                Ok(g)
            }
            EigenBasis::Unknown => Err(Error::Spectrum("eigenvectors are not available".into())),
        }
    }
}

/// Eigen-decomposition of a dense symmetric matrix given row-major.
/// Returns ascending eigenvalues and matching orthonormal eigenvectors.
pub fn jacobi_eigen(dense: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = dense.len();
    let mut a: Vec<f64> = dense.iter().flat_map(|r| r.iter().copied()).collect();
    if a.len() != n * n {
        return Err(Error::InvalidMatrix("dense input is not square".into()));
    }
    // v is stored row-major with eigenvectors in columns
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[i * n + j] * a[i * n + j];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off_norm = off(&a);
        if off_norm <= 1e-15 * total || off_norm == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { sweeps, off_norm });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| v[k * n + j]).collect())
        .collect();
    Ok((values, vectors))
}

/// Spectrum of a symmetric positive definite sparse matrix, densified.
pub fn dense_sym_eigen(a: &SparseMatrix) -> Result<SpectralModel> {
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric(
            "eigensolver requires a symmetric matrix".into(),
        ));
    }
    if a.n() > DENSE_EIGEN_CAP {
        return Err(Error::TooLarge {
            n: a.n(),
            cap: DENSE_EIGEN_CAP,
        });
    }
    let (values, vectors) = jacobi_eigen(&a.to_dense())?;
    SpectralModel::new(values, EigenBasis::Vectors(vectors))
}
