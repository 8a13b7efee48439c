//! Sparse and dense linear algebra kernels: CSR storage, the per-iteration
//! quadratic forms, Matrix Market I/O and a dense symmetric eigensolver used
//! for verification.

mod eigen;
mod market;
mod sparse;
pub mod vector;

pub use eigen::{dense_sym_eigen, jacobi_eigen, EigenBasis, SpectralModel, DENSE_EIGEN_CAP};
pub use market::{
    parse_matrix_market, read_matrix_market, write_matrix_market, write_matrix_market_to,
};
pub use sparse::{quad_forms, QuadForms, SparseMatrix};
