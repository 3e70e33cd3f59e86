//! Coordinate-format sparse matrix used for edge merge/occurrence matrices.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;

/// `rows × cols` matrix stored as row-sorted `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
    /// CSR-style offsets into `triplets`, length `rows + 1`.
    row_start: Vec<usize>,
}

impl SparseMatrix {
    /// Validates and sorts the triplets. Entries must be in range, unique and
    /// finite non-zero.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidSparse(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() || v == 0.0 {
                return Err(Error::InvalidSparse(format!(
                    "entry ({r}, {c}) has value {v}"
                )));
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = triplets
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::InvalidSparse(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_start = vec![0usize; rows + 1];
        for &(r, _, _) in &triplets {
            row_start[r + 1] += 1;
        }
        for r in 0..rows {
            row_start[r + 1] += row_start[r];
        }
        Ok(Self {
            rows,
            cols,
            triplets,
            row_start,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect()).expect("valid identity")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn row(&self, r: usize) -> &[(usize, usize, f64)] {
        &self.triplets[self.row_start[r]..self.row_start[r + 1]]
    }

    /// Dense copy; only meant for small matrices and diagnostics.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.rows, self.cols));
        for &(r, c, v) in &self.triplets {
            d[(r, c)] = v;
        }
        d
    }

    /// Computes `x · Mᵀ` in edge space, i.e. each output edge `r` is
    /// `Σ_c M[r, c] · x[:, c]`.
    pub fn apply(&self, x: &FeatureMap) -> Result<FeatureMap> {
        if x.edge_count() != self.cols {
            return Err(Error::DimensionMismatch {
                cols: self.cols,
                edges: x.edge_count(),
            });
        }
        let channels = x.channels();
        let mut out = Array2::<f64>::zeros((channels, self.rows));
        let xv = x.values();
        for ch in 0..channels {
            let src = xv.row(ch);
            let mut dst = out.row_mut(ch);
            for r in 0..self.rows {
                let mut acc = 0.0;
                for &(_, c, v) in self.row(r) {
                    acc += v * src[c];
                }
                dst[r] = acc;
            }
        }
        Ok(FeatureMap::from_array(out))
    }

    /// Computes the transposed product: output edge `c` is `Σ_r M[r, c] · x[:, r]`.
    pub fn apply_transpose(&self, x: &FeatureMap) -> Result<FeatureMap> {
        if x.edge_count() != self.rows {
            return Err(Error::DimensionMismatch {
                cols: self.rows,
                edges: x.edge_count(),
            });
        }
        let channels = x.channels();
        let mut out = Array2::<f64>::zeros((channels, self.cols));
        let xv = x.values();
        for ch in 0..channels {
            let src = xv.row(ch);
            let mut dst = out.row_mut(ch);
            for &(r, c, v) in &self.triplets {
                dst[c] += v * src[r];
            }
        }
        Ok(FeatureMap::from_array(out))
    }
}

/// The free function form of [`SparseMatrix::apply`].
pub fn sparse_apply(m: &SparseMatrix, x: &FeatureMap) -> Result<FeatureMap> {
    m.apply(x)
}
