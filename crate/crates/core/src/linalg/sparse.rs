//! Compressed sparse row storage and the per-iteration kernels built on it.

use serde::{Deserialize, Serialize};

use super::vector::dot;
use crate::error::{Error, Result};

/// Square real matrix in CSR form.
///
/// Symmetric matrices are stored in full: when `symmetric` is set, every
/// stored `(i, j, v)` has a stored mirror `(j, i, v)`. The flag is only ever
/// set after that property has been checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structural invariants.
    /// `symmetric` is verified exactly, not trusted.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        let m = SparseMatrix {
            n,
            row_offsets,
            col_indices,
            values,
            symmetric: false,
        };
        m.validate()?;
        if symmetric {
            m.check_symmetric()?;
        }
        Ok(SparseMatrix { symmetric, ..m })
    }

    /// Builds a matrix from coordinate triplets. Duplicates are summed, explicit
    /// zeros are kept. The symmetric flag is set only if the result is exactly
    /// symmetric and `detect_symmetry` is requested.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        detect_symmetry: bool,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= n || j >= n {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));

        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_offsets[i + 1] += 1;
            col_indices.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }

        let mut m = SparseMatrix {
            n,
            row_offsets,
            col_indices,
            values,
            symmetric: false,
        };
        if detect_symmetry && m.check_symmetric().is_ok() {
            m.symmetric = true;
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SparseMatrix {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
            symmetric: true,
        }
    }

    /// Constant-coefficient tridiagonal Toeplitz matrix tridiag(off, diag, off).
    pub fn tridiagonal(n: usize, off: f64, diag: f64) -> Self {
        let triplets = (0..n).flat_map(|i| {
            let lo = (i > 0).then(|| (i, i - 1, off));
            let hi = (i + 1 < n).then(|| (i, i + 1, off));
            lo.into_iter()
                .chain(std::iter::once((i, i, diag)))
                .chain(hi)
        });
        Self::from_triplets(n, triplets, true).expect("indices are in range by construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(row, col, value)` in storage order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            range.map(move |k| (i, self.col_indices[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Diagonal entries if every stored entry lies on the diagonal.
    pub fn as_diagonal(&self) -> Option<Vec<f64>> {
        let mut d = vec![0.0; self.n];
        for (i, j, v) in self.triplets() {
            if i != j {
                if v != 0.0 {
                    return None;
                }
                continue;
            }
            d[i] = v;
        }
        Some(d)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    /// Returns a copy with the symmetric flag cleared. Used for operators whose
    /// symmetry must not be assumed downstream.
    pub fn into_general(self) -> Self {
        SparseMatrix {
            symmetric: false,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        let bad = |msg: String| Err(Error::InvalidMatrix(msg));
        if self.row_offsets.len() != n + 1 {
            return bad(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                n + 1
            ));
        }
        if self.row_offsets[0] != 0 {
            return bad("row_offsets[0] must be 0".into());
        }
        if self.row_offsets[n] != self.values.len() || self.col_indices.len() != self.values.len() {
            return bad("row_offsets[n], col_indices and values disagree on nnz".into());
        }
        for i in 0..n {
            let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if lo > hi {
                return bad(format!("row_offsets decreases at row {i}"));
            }
            let cols = &self.col_indices[lo..hi];
            if cols.iter().any(|&j| j >= n) {
                return bad(format!("column index out of range in row {i}"));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("column indices not strictly increasing in row {i}"));
            }
        }
        Ok(())
    }

    fn check_symmetric(&self) -> Result<()> {
        for (i, j, v) in self.triplets() {
            if i == j {
                continue;
            }
            let range = self.row_offsets[j]..self.row_offsets[j + 1];
            match self.col_indices[range.clone()].binary_search(&i) {
                Ok(k) if self.values[range.start + k] == v => {}
                Ok(k) => {
                    return Err(Error::NotSymmetric(format!(
                        "a[{i}][{j}] = {v} but a[{j}][{i}] = {}",
                        self.values[range.start + k]
                    )))
                }
                Err(_) => {
                    return Err(Error::NotSymmetric(format!(
                        "a[{i}][{j}] stored without its mirror"
                    )))
                }
            }
        }
        Ok(())
    }

    /// y = A x, as row-wise dot products in stored order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
        Ok(())
    }
}

/// The scalars every steplength is built from, evaluated at one gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadForms {
    /// gᵀg
    pub gg: f64,
    /// gᵀAg
    pub g_a_g: f64,
    /// (Ag)ᵀ(Ag), equal to gᵀA²g for symmetric A
    pub ag_ag: f64,
    pub norm_g: f64,
    pub norm_ag: f64,
}

impl QuadForms {
    /// Forms the scalars from `g` and a precomputed `w = Ag`.
    pub fn from_pair(g: &[f64], w: &[f64]) -> Self {
        let gg = dot(g, g);
        let ag_ag = dot(w, w);
        QuadForms {
            gg,
            g_a_g: dot(g, w),
            ag_ag,
            norm_g: gg.sqrt(),
            norm_ag: ag_ag.sqrt(),
        }
    }
}

/// One matvec `w = Ag` followed by the three inner products.
pub fn quad_forms(a: &SparseMatrix, g: &[f64]) -> Result<QuadForms> {
    let w = a.spmv(g)?;
    Ok(QuadForms::from_pair(g, &w))
}
