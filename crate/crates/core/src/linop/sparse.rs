use std::io::{self, Write};

use nalgebra::DMatrix;

use super::OpError;

/// Sparse matrix in compressed-row storage.
///
/// Invariants held by every constructed value:
/// * `row_offsets` has length `n_rows + 1`, starts at 0, is non-decreasing,
///   and its last entry equals `col_indices.len() == values.len()`;
/// * within each row the column indices are strictly increasing and all
///   below `n_cols`;
/// * every stored value is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw compressed-row arrays, validating the
    /// storage invariants.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, OpError> {
        if row_offsets.len() != n_rows + 1 || row_offsets.first() != Some(&0) {
            return Err(OpError::InvalidSparse(format!(
                "row offsets must have length {} and start at 0",
                n_rows + 1
            )));
        }
        if col_indices.len() != values.len() || row_offsets[n_rows] != values.len() {
            return Err(OpError::InvalidSparse(
                "offset, index, and value lengths disagree".into(),
            ));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(OpError::InvalidSparse(format!(
                    "row offsets decrease at row {i}"
                )));
            }
            for k in lo..hi {
                if col_indices[k] >= n_cols {
                    return Err(OpError::InvalidSparse(format!(
                        "column index {} out of range in row {i}",
                        col_indices[k]
                    )));
                }
                if k > lo && col_indices[k] <= col_indices[k - 1] {
                    return Err(OpError::InvalidSparse(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OpError::NonFiniteEntry);
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicate
    /// coordinates are summed; entries are kept even when a sum is zero.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, OpError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(OpError::TripletOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            if !v.is_finite() {
                return Err(OpError::NonFiniteEntry);
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut per_row = vec![0usize; n_rows];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                // Duplicate coordinates accumulate.
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                per_row[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0);
        for count in per_row {
            row_offsets.push(row_offsets.last().unwrap() + count);
        }
        Self::new(n_rows, n_cols, row_offsets, col_indices, values)
    }

    /// The n-by-n identity.
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries (explicit zeros count).
    pub fn nnz(&self) -> usize {
        self.values.len()
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

    /// `out = self * x`. Lengths must already match.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        for (i, out_i) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *out_i = acc;
        }
    }

    /// `out = self^T * y`, scattering row contributions; no transposed copy
    /// is ever stored.
    pub(crate) fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n_rows);
        debug_assert_eq!(out.len(), self.n_cols);
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out[self.col_indices[k]] += self.values[k] * yi;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                dense[(i, self.col_indices[k])] = self.values[k];
            }
        }
        dense
    }

    /// Writes the matrix in Matrix Market coordinate format (real, general),
    /// for cross-checking against external tools.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                writeln!(
                    w,
                    "{} {} {:e}",
                    i + 1,
                    self.col_indices[k] + 1,
                    self.values[k]
                )?;
            }
        }
        Ok(())
    }
}
